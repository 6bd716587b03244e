"""Brute-force checks of the analytic protocol claims.

``simulate`` replays a protocol's sensor trajectory in a fixed world frame
over a grid holding a signed distance to the evader region (negative inside).
Each time step dilates the region by ``VT*dt`` and then clears the area swept
by the sensor segment, so evader capability is over- rather than
under-estimated.  The level set is re-initialised with a narrow-band fast
marching pass in a window around every swept quad, and over the whole grid
every few steps so that distances far from the sensor do not go stale.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import skfmm

from . import drifting, improved
from .critical import drifting_spiral_critical_speed, improved_spiral_critical_speed
from .scenario import ProtocolKind, Scenario, ScenarioError

Pose = tuple[np.ndarray, np.ndarray]  # (lower tip, upper tip)

ESCAPE_SLACK_CELLS = 2
BAND_CELLS = 3


# --------------------------------------------------------------------------
# Trajectory legs


@dataclass(frozen=True)
class Leg:
    name: str
    duration: float
    pose: Callable[[float], Pose]
    # permitted disk (center, radius) checked when the leg ends
    checkpoint: tuple[tuple[float, float], float] | None = None


def _unit(theta: float) -> np.ndarray:
    return np.array([math.sin(theta), math.cos(theta)])


def _spiral_leg(s, Vs, center, Ri, theta0, duration, name, checkpoint=None) -> Leg:
    c = np.asarray(center, dtype=float)

    def pose(t: float) -> Pose:
        theta = theta0 + drifting.angle_at_time(s, Vs, Ri, t)
        d = _unit(theta)
        grown = s.VT * t
        return c + (Ri - 2 * s.r + grown) * d, c + (Ri + grown) * d

    return Leg(name, duration, pose, checkpoint)


def _move_leg(start: Pose, end: Pose, duration: float, name, checkpoint=None) -> Leg:
    L0, U0 = (np.asarray(p, dtype=float) for p in start)
    L1, U1 = (np.asarray(p, dtype=float) for p in end)

    def pose(t: float) -> Pose:
        a = 0.0 if duration <= 0 else min(max(t / duration, 0.0), 1.0)
        return L0 + a * (L1 - L0), U0 + a * (U1 - U0)

    return Leg(name, duration, pose, checkpoint)


def _translate(p: Pose, offset) -> Pose:
    off = np.asarray(offset, dtype=float)
    return p[0] + off, p[1] + off


def _endgame_legs(s, Vs, plan, center, theta, end_pose: Pose, protocol) -> list[Leg]:
    """Final maneuver: reposition, spiral with the lower tip on the center,
    descend along the sensor axis, sweep right then back left."""
    c = np.asarray(center, dtype=float)
    d = _unit(theta)
    legs = []
    if protocol is ProtocolKind.DRIFTING:
        climb_end = _translate(end_pose, plan.stage_distances["r_out"] * d)
        legs.append(_move_leg(end_pose, climb_end, plan.stage_times["T_out"], "climb"))
        T_down = plan.stage_times["T_in_last"]
    else:
        tip_on_center = (c.copy(), c + 2 * s.r * d)
        legs.append(_move_leg(end_pose, tip_on_center, plan.stage_times["T_e"], "to-center"))
        T_down = plan.stage_times["T_down"]
    T_l = plan.stage_times["T_l"]
    last = _spiral_leg(s, Vs, c, 2 * s.r, theta, T_l, "last-spiral")
    legs.append(last)
    spiral_end = last.pose(T_l)
    axis = spiral_end[1] - spiral_end[0]
    axis /= np.linalg.norm(axis)
    descend_end = _translate(spiral_end, -plan.stage_distances["R_down"] * axis)
    legs.append(_move_leg(spiral_end, descend_end, T_down, "descend"))
    # direction of travel of a clockwise spiral at the same angle
    right = np.array([axis[1], -axis[0]])
    t, t_tilde = plan.linear_split
    right_end = _translate(descend_end, Vs * t * right)
    legs.append(_move_leg(descend_end, right_end, t, "linear-right"))
    left_end = _translate(right_end, -Vs * t_tilde * right)
    legs.append(_move_leg(right_end, left_end, t_tilde, "linear-left"))
    return legs


def drifting_legs(s: Scenario, Vs: float, horizon: float) -> list[Leg]:
    legs: list[Leg] = []
    R, cy, elapsed = s.R0, 0.0, 0.0
    while R > 2 * s.r and elapsed <= horizon:
        T = drifting.time_to_angle(s, Vs, R, 2 * math.pi)
        R_next, shift = drifting.radius_after_sweep(s, Vs, R)
        permitted = ((0.0, cy + shift), min(R_next, s.R0))
        legs.append(_spiral_leg(s, Vs, (0.0, cy), R, 0.0, T, f"sweep-{len(legs)}", permitted))
        R, cy, elapsed = R_next, cy + shift, elapsed + T
    if R <= 2 * s.r:
        plan = drifting.endgame(s, Vs, R)
        end_pose = legs[-1].pose(legs[-1].duration) if legs else (
            np.array([0.0, s.R0 - 2 * s.r]), np.array([0.0, s.R0]))
        legs += _endgame_legs(s, Vs, plan, (0.0, cy), 0.0, end_pose, ProtocolKind.DRIFTING)
    return legs


def improved_legs(s: Scenario, Vs: float, horizon: float) -> list[Leg]:
    legs: list[Leg] = []
    theta = 0.0
    R = s.R0
    end_pose = (np.array([0.0, s.R0 - 2 * s.r]), np.array([0.0, s.R0]))
    for st in improved.planned_steps(s, Vs, horizon):
        arc = 2 * math.pi + st.beta_i
        sweep = _spiral_leg(s, Vs, (0.0, 0.0), st.Ri, theta, st.sweep_time, f"sweep-{len(legs) // 2}")
        legs.append(sweep)
        theta += arc
        d = _unit(theta)
        start_next = ((st.R_next - 2 * s.r) * d, st.R_next * d)
        permitted = ((0.0, 0.0), min(st.R_next, s.R0))
        legs.append(_move_leg(sweep.pose(st.sweep_time), start_next, st.inward_time, "inward", permitted))
        end_pose = start_next
        R = st.R_next
    if R <= 2 * s.r:
        plan = improved.endgame(s, Vs, R)
        legs += _endgame_legs(s, Vs, plan, (0.0, 0.0), theta, end_pose, ProtocolKind.IMPROVED)
    return legs


def protocol_legs(s: Scenario, Vs: float, protocol: ProtocolKind, horizon: float) -> list[Leg]:
    protocol = ProtocolKind.parse(protocol)
    if protocol is ProtocolKind.DRIFTING:
        return drifting_legs(s, Vs, horizon)
    if protocol is ProtocolKind.IMPROVED:
        return improved_legs(s, Vs, horizon)
    raise ScenarioError("the circular baseline has no trajectory to simulate")


# --------------------------------------------------------------------------
# Grid


def quad_signed_distance(x: np.ndarray, y: np.ndarray, corners: np.ndarray) -> np.ndarray | None:
    """Signed distance to the convex hull of four points (negative inside).

    Returns None when the hull has no area.
    """
    hull = _convex_hull(corners)
    if hull is None:
        return None
    n = len(hull)
    dist = np.full(x.shape, np.inf)
    inside = np.ones(x.shape, dtype=bool)
    for k in range(n):
        a, b = hull[k], hull[(k + 1) % n]
        e = b - a
        px, py = x - a[0], y - a[1]
        tt = np.clip((px * e[0] + py * e[1]) / (e @ e), 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(px - tt * e[0], py - tt * e[1]))
        # hull is counter-clockwise: inside is to the left of every edge
        inside &= e[0] * py - e[1] * px >= 0
    return np.where(inside, -dist, dist)


def _convex_hull(points: np.ndarray) -> np.ndarray | None:
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return None
    area = 0.5 * sum(cross(hull[0], hull[i], hull[i + 1]) for i in range(1, len(hull) - 1))
    if area <= 1e-12 * (np.ptp(hull[:, 0]) + np.ptp(hull[:, 1])) ** 2:
        return None
    return hull


class RegionGrid:
    """Evader-region occupancy on a square lattice.

    ``phi`` holds a lower bound on the signed distance to the region; a cell
    is occupied when ``phi`` at its center is <= 0.
    """

    def __init__(
        self,
        cell_size: float,
        bounds: tuple[float, float, float, float],
        initial_radius: float,
        coverage_slack: float | None = None,
    ):
        xmin, xmax, ymin, ymax = bounds
        self.cell_size = h = float(cell_size)
        nx = int(math.ceil((xmax - xmin) / h))
        ny = int(math.ceil((ymax - ymin) / h))
        self.bounds = (xmin, xmin + nx * h, ymin, ymin + ny * h)
        self.xs = xmin + (np.arange(nx) + 0.5) * h
        self.ys = ymin + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(self.xs, self.ys)  # rows are y
        if initial_radius > 0:
            self.phi = np.hypot(X, Y) - initial_radius
        else:
            self.phi = np.hypot(X, Y) + h
        self.band = BAND_CELLS * h
        # cells whose center is this close to the swept quad count as swept
        self.coverage_slack = 0.5 * h if coverage_slack is None else coverage_slack

    @property
    def occupancy(self) -> np.ndarray:
        return self.phi <= 0

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.phi <= 0))

    def is_empty(self) -> bool:
        return not (self.phi <= 0).any()

    def dilate(self, distance: float) -> None:
        self.phi -= distance

    def _window(self, xlo, xhi, ylo, yhi):
        h = self.cell_size
        x0 = self.bounds[0]
        y0 = self.bounds[2]
        i0 = max(int((xlo - x0) / h), 0)
        i1 = min(int(math.ceil((xhi - x0) / h)), self.phi.shape[1])
        j0 = max(int((ylo - y0) / h), 0)
        j1 = min(int(math.ceil((yhi - y0) / h)), self.phi.shape[0])
        return slice(j0, j1), slice(i0, i1)

    def sweep_subtract(self, corners: np.ndarray) -> None:
        """Clear the convex hull of the sensor's start and end poses."""
        corners = np.asarray(corners, dtype=float)
        pad = 2 * self.band + 2 * self.cell_size
        lo = corners.min(axis=0)
        hi = corners.max(axis=0)
        outer = self._window(lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad)
        if outer[0].stop <= outer[0].start or outer[1].stop <= outer[1].start:
            return
        X, Y = np.meshgrid(self.xs[outer[1]], self.ys[outer[0]])
        sd = quad_signed_distance(X, Y, corners)
        if sd is None:
            return
        sd -= self.coverage_slack
        old = self.phi[outer]
        if not (old < -sd).any():
            return
        local = np.maximum(old, -sd)
        self.phi[outer] = self._reinitialise(local)

    def _reinitialise(self, local: np.ndarray) -> np.ndarray:
        band = self.band
        clamped = np.where(local > 0, np.maximum(local, band), np.minimum(local, -band))
        if (local > 0).all() or (local < 0).all():
            return clamped
        try:
            d = skfmm.distance(local, dx=self.cell_size, narrow=band)
        except ValueError:
            return clamped
        d = np.ma.filled(d, np.nan)
        near = np.isfinite(d)
        # only the part of the window at least one band from its edge is trusted
        out = local.copy()
        inner = np.zeros_like(near)
        k = BAND_CELLS + 1
        inner[k:-k, k:-k] = True
        trusted = near & inner
        out[trusted] = d[trusted]
        far = inner & ~near
        out[far] = clamped[far]
        return out

    def reinitialise_all(self) -> None:
        """Replace stale lower bounds with the distance to the current region.

        Far from the sensor ``phi`` only ever decreases, so without this the
        region would regrow from where it was rather than where it is.
        """
        if (self.phi > 0).all() or (self.phi < 0).all():
            return
        self.phi = np.asarray(skfmm.distance(self.phi, dx=self.cell_size), dtype=float)

    def cells_outside(self, center, radius: float) -> np.ndarray:
        """World coordinates of occupied cells farther than ``radius`` from ``center``."""
        js, is_ = np.nonzero(self.phi <= 0)
        pts = np.column_stack([self.xs[is_], self.ys[js]])
        far = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1]) > radius
        return pts[far]

    def write_pgm(self, path: Path) -> None:
        img = np.where(self.phi <= 0, 255, 0).astype(np.uint8)[::-1]
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
        path.write_bytes(header + img.tobytes())


# --------------------------------------------------------------------------
# Simulation


class VerdictKind(enum.Enum):
    CONFINEMENT_HELD = "ConfinementHeld"
    ESCAPE_WITNESS = "EscapeWitness"
    DETECTION_COMPLETE = "DetectionComplete"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True)
class SimVerdict:
    kind: VerdictKind
    time: float | None = None
    cell: tuple[float, float] | None = None
    analytic_time: float | None = None
    occupied_cells: int = 0
    steps: int = 0
    notes: tuple[str, ...] = field(default=())

    @property
    def success(self) -> bool:
        return self.kind in (VerdictKind.DETECTION_COMPLETE, VerdictKind.CONFINEMENT_HELD)

    @property
    def relative_error(self) -> float | None:
        if self.time is None or not self.analytic_time:
            return None
        return abs(self.time - self.analytic_time) / self.analytic_time


def _bounds(s: Scenario, legs: list[Leg], margin: float):
    pts = [np.array([-s.R0, -s.R0]), np.array([s.R0, s.R0])]
    for leg in legs:
        for a in np.linspace(0.0, leg.duration, 9):
            pts.extend(leg.pose(a))
    pts = np.array(pts)
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    return lo[0], hi[0], lo[1], hi[1]


def _steps(leg: Leg, dt: float, max_shift: float) -> Iterator[float]:
    """Step end times within a leg; also keeps each step's tip displacement
    below ``max_shift`` for legs that move faster than the nominal speed."""
    n = max(1, math.ceil(leg.duration / dt - 1e-9))
    L0, U0 = leg.pose(0.0)
    L1, U1 = leg.pose(leg.duration)
    if leg.name in ("inward", "to-center", "climb", "descend"):
        span = max(np.linalg.norm(L1 - L0), np.linalg.norm(U1 - U0))
        n = max(n, math.ceil(span / max_shift))
    for k in range(1, n + 1):
        yield leg.duration * k / n


def simulate(
    s: Scenario,
    Vs: float,
    protocol: ProtocolKind | str,
    cell_size: float,
    dt: float,
    horizon: float,
    frames_dir: str | Path | None = None,
    frame_every: int = 50,
    initial_radius: float | None = None,
) -> SimVerdict:
    protocol = ProtocolKind.parse(protocol)
    if protocol is ProtocolKind.CIRCULAR:
        raise ScenarioError("the circular baseline has no trajectory to simulate")
    if not (cell_size > 0 and dt > 0 and horizon > 0):
        raise ScenarioError("cell_size, dt and horizon must be positive")
    if not Vs * dt < cell_size:
        raise ScenarioError(
            f"anti-tunneling: Vs*dt must be below cell_size; need dt < {cell_size / Vs:.6g}"
        )
    legs = protocol_legs(s, Vs, protocol, horizon)
    analytic = math.fsum(leg.duration for leg in legs)
    grid = RegionGrid(
        cell_size,
        _bounds(s, legs, margin=2 * s.r + 4 * cell_size),
        s.R0 if initial_radius is None else initial_radius,
    )
    slack = ESCAPE_SLACK_CELLS * cell_size
    # keep the dilation between full re-initialisations below half the band
    reinit_every = max(1, int(0.5 * grid.band / (s.VT * dt)))
    frames = Path(frames_dir) if frames_dir is not None else None
    if frames is not None:
        frames.mkdir(parents=True, exist_ok=True)

    t = 0.0
    steps = 0

    def snapshot():
        if frames is not None and steps % frame_every == 0:
            grid.write_pgm(frames / f"frame_{steps // frame_every:06d}.pgm")

    def verdict(kind, **kw):
        if frames is not None:
            grid.write_pgm(frames / f"frame_{steps // frame_every + 1:06d}.pgm")
        return SimVerdict(kind, analytic_time=analytic, occupied_cells=grid.occupied_count(),
                          steps=steps, **kw)

    snapshot()
    if grid.is_empty():
        return verdict(VerdictKind.DETECTION_COMPLETE, time=0.0)

    for leg in legs:
        prev_t = 0.0
        prev = leg.pose(0.0)
        for lt in _steps(leg, dt, 0.9 * cell_size):
            step = lt - prev_t
            cur = leg.pose(lt)
            grid.dilate(s.VT * step)
            grid.sweep_subtract(np.array([prev[0], prev[1], cur[1], cur[0]]))
            prev, prev_t = cur, lt
            t += step
            steps += 1
            if steps % reinit_every == 0:
                grid.reinitialise_all()
            snapshot()
            if grid.is_empty():
                return verdict(VerdictKind.DETECTION_COMPLETE, time=t)
            if t >= horizon:
                return verdict(VerdictKind.TIMED_OUT, time=t)
        if leg.checkpoint is not None:
            center, radius = leg.checkpoint
            outside = grid.cells_outside(center, radius + slack)
            if len(outside):
                worst = outside[np.argmax(np.hypot(outside[:, 0] - center[0], outside[:, 1] - center[1]))]
                return verdict(VerdictKind.ESCAPE_WITNESS, time=t, cell=(float(worst[0]), float(worst[1])))

    # trajectory exhausted with evaders left: nobody sweeps any more
    remaining = horizon - t
    if remaining > 0:
        grid.dilate(s.VT * remaining)
        steps += 1
    return verdict(VerdictKind.TIMED_OUT, time=horizon,
                   notes=("trajectory ended with occupied cells",))


def critical_speed_for(s: Scenario, protocol: ProtocolKind | str) -> float:
    protocol = ProtocolKind.parse(protocol)
    if protocol is ProtocolKind.DRIFTING:
        return drifting_spiral_critical_speed(s)
    return improved_spiral_critical_speed(s).root


# --------------------------------------------------------------------------
# Spiral ODE and confinement inequality


def integrate_spiral_ode(s: Scenario, Vs: float, R_start: float, theta_target: float, steps: int) -> float:
    """Time for the formation center to turn through ``theta_target``.

    Classic RK4 with the turned angle as independent variable:
    dt/dtheta = R/w and dR/dtheta = VT R/w with w = sqrt(Vs^2 - VT^2).
    ``R_start`` is the initial distance of the formation center.
    """
    if not Vs > s.VT:
        raise ScenarioError(f"Vs must exceed VT (Vs={Vs}, VT={s.VT})")
    if theta_target == 0:
        return 0.0
    w = math.sqrt(Vs * Vs - s.VT * s.VT)
    k = s.VT / w
    # dt/dtheta depends only on R, so the state is (elapsed, R); plain floats
    # keep 1e5 steps cheap
    h = theta_target / steps
    t, R = 0.0, float(R_start)
    for _ in range(steps):
        R1 = R
        R2 = R + 0.5 * h * k * R1
        R3 = R + 0.5 * h * k * R2
        R4 = R + h * k * R3
        t += h / 6 * (R1 + 2 * R2 + 2 * R3 + R4) / w
        R += h / 6 * k * (R1 + 2 * R2 + 2 * R3 + R4)
    return t


def confinement_margin(s: Scenario, Vs: float, grid_n: int) -> np.ndarray:
    """Bound minus distance of every sampled wavefront point from the new center.

    Samples theta, psi on ``grid_n`` points each of [0, 2*pi] (only 0 when
    ``grid_n == 1``).
    """
    angles = np.linspace(0.0, 2 * math.pi, grid_n) if grid_n > 1 else np.zeros(1)
    TH, PS = np.meshgrid(angles, angles, indexing="ij")
    E = drifting.wavefront_point(s, Vs, TH, PS)
    t_full = drifting.time_to_angle(s, Vs, s.R0, 2 * math.pi)
    bound = s.R0 - s.r + s.VT * t_full
    dist = np.hypot(E[..., 0], E[..., 1] - s.r)
    return bound - dist


def verify_confinement_inequality(s: Scenario, Vs: float, grid_n: int) -> bool:
    t_full = drifting.time_to_angle(s, Vs, s.R0, 2 * math.pi)
    bound = s.R0 - s.r + s.VT * t_full
    return bool((confinement_margin(s, Vs, grid_n) >= -1e-9 * bound).all())
