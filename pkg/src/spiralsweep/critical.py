"""Critical sweeper speeds and end-game speed floors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .scenario import Scenario, ScenarioError

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
MAX_DAMPING = 50

# R0/r must exceed this for the last spiral to leave a region narrower than 2r
LAST_SWEEP_RATIO = math.sqrt(4.0 / math.log(2.0) ** 2 + 1.0 / math.pi**2)


@dataclass(frozen=True)
class NewtonReport:
    root: float
    iterations: int
    residual: float
    converged: bool


class DomainError(ValueError):
    pass


def newton(
    f: Callable[[float], float],
    x0: float,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> NewtonReport:
    """Newton iteration with a central-difference derivative.

    ``f`` raises DomainError outside its domain; the offending step is halved
    until the iterate is admissible again.
    """
    x = x0
    fx = f(x)
    for it in range(max_iter + 1):
        if abs(fx) <= tol:
            return NewtonReport(x, it, abs(fx), True)
        if it == max_iter:
            break
        h = max(1e-6 * abs(x), 1e-6)
        try:
            slope = (f(x + h) - f(x - h)) / (2 * h)
        except DomainError:
            # one-sided near a domain edge
            slope = (f(x + h) - fx) / h
        if slope == 0 or not math.isfinite(slope):
            break
        step = fx / slope
        for _ in range(MAX_DAMPING):
            try:
                fx_new = f(x - step)
                break
            except DomainError:
                step *= 0.5
        else:
            raise DomainError(f"Newton step could not be damped into the domain from x={x}")
        x -= step
        fx = fx_new
    return NewtonReport(x, max_iter, abs(fx), False)


def lower_bound_speed(s: Scenario) -> float:
    return math.pi * s.R0 * s.VT / s.r


def tangent_angle_phi(VT: float, Vs: float) -> float:
    """Heading offset from the region normal that keeps the sensor tip tangent."""
    if not Vs > VT:
        raise ScenarioError(f"Vs must exceed VT (Vs={Vs}, VT={VT})")
    return math.asin(VT / Vs)


def drifting_spiral_critical_speed(s: Scenario) -> float:
    if not s.R0 > s.r:
        raise ScenarioError(f"drifting critical speed needs R0 > r (R0={s.R0}, r={s.r})")
    log_ratio = math.log(s.R0 / (s.R0 - s.r))
    return s.VT * math.sqrt(4 * math.pi**2 / log_ratio**2 + 1)


def improved_residual(s: Scenario, Vs: float) -> float:
    """Slack of the first-sweep confinement condition at speed ``Vs``.

    Positive above the critical speed, zero at it.
    """
    from .improved import beta_angle, sweep_time_with_beta

    if not Vs > s.VT:
        raise DomainError(f"Vs={Vs} must exceed VT={s.VT}")
    try:
        beta = beta_angle(s, Vs, s.R0)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    allowed = 2 * s.r * Vs / (Vs + s.VT)
    return allowed - s.VT * sweep_time_with_beta(s, Vs, s.R0, beta)


def improved_spiral_critical_speed(
    s: Scenario, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER
) -> NewtonReport:
    if not s.R0 > 2 * s.r:
        raise ScenarioError(f"improved critical speed needs R0 > 2r (R0={s.R0}, r={s.r})")
    return newton(lambda v: improved_residual(s, v), lower_bound_speed(s), tol, max_iter)


def circular_critical_speed(s: Scenario) -> float:
    return 2 * math.pi * s.R0 * s.VT / s.r + s.VT


def endgame_speed_floor(r: float, Rf: float, VT: float) -> float:
    """Largest root of the linear-phase margin quadratic; Vs must exceed it."""
    if not Rf < r:
        raise ScenarioError(
            f"end game infeasible: region spread exceeds sensor margin (Rf={Rf} >= r={r})"
        )
    return VT * (2 * r + Rf + math.sqrt(8 * r * Rf + Rf**2)) / (2 * (r - Rf))


def last_sweep_speed_condition(VT: float) -> float:
    """Speed above which the last spiral leaves a region narrower than 2r."""
    return VT * math.sqrt(4 * math.pi**2 / math.log(2.0) ** 2 + 1)


def last_sweep_feasibility(s: Scenario) -> bool:
    return s.R0 / s.r > LAST_SWEEP_RATIO


def all_critical_speeds(s: Scenario) -> dict[str, float]:
    improved = improved_spiral_critical_speed(s)
    if not improved.converged:
        raise RuntimeError(f"improved critical speed did not converge: {improved}")
    return {
        "lower_bound": lower_bound_speed(s),
        "improved_spiral": improved.root,
        "drifting_spiral": drifting_spiral_critical_speed(s),
        "circular": circular_critical_speed(s),
    }
