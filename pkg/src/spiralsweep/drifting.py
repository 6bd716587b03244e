"""Drifting spiral protocol: pure spiral sweeps, region center rises by r per sweep.

Each sweep is flown in a frame centered on the current region center with
+y pointing "up"; the sweep starts with the sensor on the +y axis and turns
through 2*pi (x = R sin(theta), y = R cos(theta)).  Sweep ``i`` is flown
around a disk of radius ``R_i``; afterwards the region is a disk of radius
``R_{i+1} = (R_i - r) c2`` centered ``r`` higher.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .critical import drifting_spiral_critical_speed, endgame_speed_floor
from .scenario import (
    BelowCriticalError,
    EndGamePlan,
    InfeasiblePlanError,
    ProtocolKind,
    Scenario,
    ScenarioError,
    SweepIterationRecord,
    SweepSchedule,
)

CRITICAL_GUARD = 1e-12
MAX_ITERATIONS = 1_000_000


@dataclass(frozen=True)
class SpiralTrajectorySample:
    t: float
    theta: float
    center_point: tuple[float, float]
    upper_tip: tuple[float, float]
    lower_tip: tuple[float, float]


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """``R~_{i+1} = c2 R~_i + c1`` with ``R~ = R - r``; ``T_{i+1} = c2 T_i + c3``."""

    c1: float
    c2: float
    c3: float


def _check_speed(s: Scenario, Vs: float) -> None:
    if not Vs > s.VT:
        raise ScenarioError(f"Vs must exceed VT (Vs={Vs}, VT={s.VT})")


def growth_factor(s: Scenario, Vs: float, angle: float = 2 * math.pi) -> float:
    """exp(angle * VT / sqrt(Vs^2 - VT^2)): radial growth over ``angle`` of spiral."""
    _check_speed(s, Vs)
    return math.exp(angle * s.VT / math.sqrt(Vs * Vs - s.VT * s.VT))


def coefficients(s: Scenario, Vs: float) -> RecurrenceCoeffs:
    c2 = growth_factor(s, Vs)
    return RecurrenceCoeffs(c1=-s.r, c2=c2, c3=-s.r * (c2 - 1) / s.VT)


def time_to_angle(s: Scenario, Vs: float, Ri: float, theta: float) -> float:
    if not Ri > s.r:
        raise ScenarioError(f"sweep radius must exceed r (Ri={Ri}, r={s.r})")
    if theta < 0:
        raise ScenarioError(f"theta must be non-negative, got {theta}")
    return (Ri - s.r) * math.expm1(theta * s.VT / math.sqrt(Vs * Vs - s.VT * s.VT)) / s.VT


def angle_at_time(s: Scenario, Vs: float, Ri: float, t: float) -> float:
    """Angle swept after time ``t`` (closed-form inverse of :func:`time_to_angle`)."""
    _check_speed(s, Vs)
    w = math.sqrt(Vs * Vs - s.VT * s.VT)
    return w / s.VT * math.log1p(s.VT * t / (Ri - s.r))


def trajectory_sample(s: Scenario, Vs: float, Ri: float, theta: float) -> SpiralTrajectorySample:
    t = time_to_angle(s, Vs, Ri, theta)
    direction = np.array([math.sin(theta), math.cos(theta)])
    grown = s.VT * t
    C = (Ri - s.r + grown) * direction
    U = (Ri + grown) * direction
    L = (Ri - 2 * s.r + grown) * direction
    return SpiralTrajectorySample(t, theta, tuple(C), tuple(U), tuple(L))


def wavefront_point(s: Scenario, Vs: float, theta, psi, Ri: float | None = None):
    """Furthest reach at the end of the sweep of evaders left at the lower tip at ``theta``.

    Accepts scalars or broadcastable arrays; returns an ``(..., 2)`` array.
    """
    Ri = s.R0 if Ri is None else Ri
    _check_speed(s, Vs)
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    k = s.VT / math.sqrt(Vs * Vs - s.VT * s.VT)
    t_theta = (Ri - s.r) * np.expm1(theta * k) / s.VT
    t_full = (Ri - s.r) * math.expm1(2 * math.pi * k) / s.VT
    lower = Ri - 2 * s.r + s.VT * t_theta
    spread = s.VT * (t_full - t_theta)
    x = lower * np.sin(theta) + spread * np.sin(psi)
    y = lower * np.cos(theta) + spread * np.cos(psi)
    return np.stack(np.broadcast_arrays(x, y), axis=-1)


def radius_after_sweep(s: Scenario, Vs: float, Ri: float) -> tuple[float, float]:
    """(R_next, center_shift) after one full sweep around a disk of radius ``Ri``."""
    if not Ri > s.r:
        raise ScenarioError(f"sweep radius must exceed r (Ri={Ri}, r={s.r})")
    return (Ri - s.r) * growth_factor(s, Vs), s.r


def _require_shrinkage(s: Scenario, Vs: float) -> RecurrenceCoeffs:
    _check_speed(s, Vs)
    Vc = drifting_spiral_critical_speed(s)
    if Vs <= Vc * (1 + CRITICAL_GUARD):
        raise BelowCriticalError(
            f"no shrinkage: Vs={Vs:.6g} does not exceed the drifting critical speed {Vc:.6g}",
            critical=Vc,
        )
    return coefficients(s, Vs)


def iterations_closed_form(s: Scenario, Vs: float) -> int:
    """Sweep count from the closed form, using 2r as the target radius."""
    co = _require_shrinkage(s, Vs)
    w = math.sqrt(Vs * Vs - s.VT * s.VT)
    ratio = s.r * (2 - co.c2) / (s.R0 * (1 - co.c2) + s.r * co.c2)
    return max(0, math.ceil(w / (2 * math.pi * s.VT) * math.log(ratio)))


def iterations_to_contain(s: Scenario, Vs: float) -> int:
    """First N with R_N <= 2r, by iterating the shifted recurrence."""
    co = _require_shrinkage(s, Vs)
    shifted = s.R0 - s.r
    n = 0
    while shifted > s.r:
        shifted = co.c2 * shifted + co.c1
        n += 1
        if n > MAX_ITERATIONS:
            raise RuntimeError("drifting recurrence did not contain the region")
    return n


def contained_radius_closed_form(s: Scenario, Vs: float, N: int) -> float:
    co = coefficients(s, Vs)
    fixed = co.c1 / (1 - co.c2)
    return s.r + fixed + co.c2**N * (s.R0 - s.r - fixed)


def first_sweep_time(s: Scenario, Vs: float) -> float:
    return (s.R0 - s.r) * (growth_factor(s, Vs) - 1) / s.VT


def last_cycle_time_closed_form(s: Scenario, Vs: float, N: int) -> float:
    c2 = growth_factor(s, Vs)
    return s.r / s.VT + c2 ** (N - 1) / s.VT * (s.R0 * (c2 - 1) - s.r * c2)


def total_sweep_time_closed_form(s: Scenario, Vs: float, N: int) -> float:
    E = growth_factor(s, Vs)
    R0, r, VT = s.R0, s.r, s.VT
    return (
        -R0 / VT
        - r * E / (VT * (1 - E))
        + E**N * R0 / VT
        + r * E ** (N + 1) / (VT * (1 - E))
        + r * N / VT
    )


def schedule(s: Scenario, Vs: float) -> SweepSchedule:
    co = _require_shrinkage(s, Vs)
    records = []
    R = s.R0
    cy = 0.0
    while R > 2 * s.r:
        T = (R - s.r) * (co.c2 - 1) / s.VT
        R_next = (R - s.r) * co.c2
        cy += s.r
        records.append(
            SweepIterationRecord(
                index=len(records),
                radius_before=R,
                radius_after=R_next,
                sweep_time=T,
                center_after=(0.0, cy),
            )
        )
        R = R_next
        if len(records) > MAX_ITERATIONS:
            raise RuntimeError("drifting schedule did not contain the region")
    return SweepSchedule(
        iterations=tuple(records),
        containment_radius=R,
        containment_time=math.fsum(rec.sweep_time for rec in records),
    )


def endgame(s: Scenario, Vs: float, RN: float) -> EndGamePlan:
    """Climb, one last spiral around the center, descend, then a linear pass."""
    _check_speed(s, Vs)
    r, VT = s.r, s.VT
    if RN > 2 * r:
        raise ScenarioError(f"end game starts at RN <= 2r, got RN={RN}")
    c2 = growth_factor(s, Vs)
    r_out = (2 * r - RN) * Vs / (Vs + VT)
    T_out = (2 * r - RN) / (Vs + VT)
    T_l = r * (c2 - 1) / VT
    R_last = T_l * VT
    R_down = (r + R_last / 2) * Vs / (Vs + VT)
    T_in_last = R_down / Vs
    R_f = T_in_last * VT + R_last
    t = R_f / (Vs - VT)
    t_tilde = 2 * Vs * R_f / (Vs - VT) ** 2

    violations = []
    if R_f >= r:
        violations.append(f"region spread Rf={R_f:.6g} exceeds sensor margin r={r:.6g}")
    else:
        floor = endgame_speed_floor(r, R_f, VT)
        if not Vs > floor:
            violations.append(f"linear-phase speed floor: Vs={Vs:.6g} <= {floor:.6g}")
        elif not (r - R_f) / VT > t + t_tilde:
            violations.append("linear-phase margin: (r - Rf)/VT <= T_linear")
    return EndGamePlan(
        protocol=ProtocolKind.DRIFTING,
        stage_times={"T_out": T_out, "T_l": T_l, "T_in_last": T_in_last, "T_linear": t + t_tilde},
        stage_distances={"r_out": r_out, "R_last": R_last, "R_down": R_down, "R_f": R_f},
        linear_split=(t, t_tilde),
        violations=tuple(violations),
    )


def total_time(s: Scenario, Vs: float) -> tuple[dict[str, float], float]:
    sched = schedule(s, Vs)
    plan = endgame(s, Vs, sched.containment_radius)
    if not plan.feasible:
        raise InfeasiblePlanError("drifting end game infeasible: " + "; ".join(plan.violations), plan)
    breakdown = {"T_spiral": sched.containment_time, **plan.stage_times}
    return breakdown, math.fsum(breakdown.values())
