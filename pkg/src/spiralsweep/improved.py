"""Improved spiral protocol: fixed region center, spiral arcs of 2*pi + beta_i
followed by a radial inward advance before each new sweep."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .critical import endgame_speed_floor, improved_spiral_critical_speed
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

MAX_ITERATIONS = 1_000_000


@dataclass(frozen=True)
class ImprovedIterationState:
    Ri: float
    beta_i: float
    sweep_time: float
    delta_i: float
    delta_eff: float
    inward_time: float
    R_next: float


def beta_unreduced(s: Scenario, Vs: float, Ri: float) -> float:
    """Extra arc needed to catch the spread from the most dangerous point."""
    arg = 2 * s.r * Vs / ((Vs + s.VT) * (Ri - 2 * s.r))
    if not 0 < arg <= 1:
        raise ScenarioError(
            f"beta undefined: region too small for spiral arc (Ri={Ri}, arcsin argument {arg:.6g})"
        )
    return math.asin(arg)


def beta_angle(s: Scenario, Vs: float, Ri: float) -> float:
    # Below 4r the (Ri - 2r) factors cancel and beta stops depending on Ri;
    # at Ri = 4r both branches agree.
    if not Ri > 2 * s.r:
        raise ScenarioError(f"beta undefined: region too small for spiral arc (Ri={Ri} <= 2r)")
    if Ri >= 4 * s.r:
        return beta_unreduced(s, Vs, Ri)
    return math.asin(Vs / (Vs + s.VT))


def sweep_time_with_beta(s: Scenario, Vs: float, Ri: float, beta: float) -> float:
    if not Vs > s.VT:
        raise ScenarioError(f"Vs must exceed VT (Vs={Vs}, VT={s.VT})")
    if not Ri > s.r:
        raise ScenarioError(f"sweep radius must exceed r (Ri={Ri}, r={s.r})")
    exponent = (2 * math.pi + beta) * s.VT / math.sqrt(Vs * Vs - s.VT * s.VT)
    return (Ri - s.r) * math.expm1(exponent) / s.VT


def _advance(s: Scenario, Vs: float, Ri: float) -> ImprovedIterationState:
    beta = beta_angle(s, Vs, Ri)
    T = sweep_time_with_beta(s, Vs, Ri, beta)
    delta = 2 * s.r - s.VT * T
    delta_eff = delta * Vs / (Vs + s.VT)
    return ImprovedIterationState(
        Ri=Ri,
        beta_i=beta,
        sweep_time=T,
        delta_i=delta,
        delta_eff=delta_eff,
        inward_time=delta_eff / Vs,
        R_next=Ri - delta_eff,
    )


def iteration_step(s: Scenario, Vs: float, Ri: float) -> ImprovedIterationState:
    state = _advance(s, Vs, Ri)
    if state.delta_i < 0:
        raise BelowCriticalError(
            f"region expands: speed below critical (delta={state.delta_i:.6g} at Ri={Ri:.6g})"
        )
    return state


def planned_steps(s: Scenario, Vs: float, horizon: float):
    """Yield iteration states from R0 without the shrinkage check.

    Used to replay the protocol at speeds where the region grows; stops once
    the region is contained or the accumulated time passes ``horizon``.
    """
    R = s.R0
    elapsed = 0.0
    while R > 2 * s.r and elapsed <= horizon:
        state = _advance(s, Vs, R)
        yield state
        elapsed += state.sweep_time + state.inward_time
        R = state.R_next


def schedule(s: Scenario, Vs: float, max_iterations: int = MAX_ITERATIONS) -> SweepSchedule:
    report = improved_spiral_critical_speed(s)
    if not Vs > report.root:
        raise BelowCriticalError(
            f"no shrinkage: Vs={Vs:.6g} does not exceed the improved critical speed {report.root:.6g}",
            critical=report.root,
        )
    records = []
    R = s.R0
    while R > 2 * s.r:
        if len(records) >= max_iterations:
            raise RuntimeError(f"improved schedule not contained after {max_iterations} iterations")
        st = iteration_step(s, Vs, R)
        records.append(
            SweepIterationRecord(
                index=len(records),
                radius_before=R,
                radius_after=st.R_next,
                sweep_time=st.sweep_time,
                beta=st.beta_i,
                inward_time=st.inward_time,
            )
        )
        R = st.R_next
    total = math.fsum(rec.sweep_time for rec in records) + math.fsum(rec.inward_time for rec in records)
    return SweepSchedule(iterations=tuple(records), containment_radius=R, containment_time=total)


def endgame(s: Scenario, Vs: float, RN: float) -> EndGamePlan:
    """Tip to the center, one last spiral, descend, then a linear pass."""
    r, VT = s.r, s.VT
    if not Vs > VT:
        raise ScenarioError(f"Vs must exceed VT (Vs={Vs}, VT={VT})")
    if RN > 2 * r:
        raise ScenarioError(f"end game starts at RN <= 2r, got RN={RN}")
    c2 = math.exp(2 * math.pi * VT / math.sqrt(Vs * Vs - VT * VT))
    T_e = RN / Vs
    T_l = r * (c2 - 1) / VT
    R_last = T_l * VT
    R_down = Vs * (r + R_last / 2) / (Vs + VT)
    T_down = (r + R_last / 2) / (Vs + VT)
    R_f = T_down * VT + R_last
    t = R_f / (Vs - VT)
    t_tilde = 2 * Vs * R_f / (Vs - VT) ** 2

    violations = []
    if not R_last < 2 * r:
        violations.append(f"last spiral leaves R_last={R_last:.6g} >= 2r")
    if R_f >= r:
        violations.append(f"region spread Rf={R_f:.6g} exceeds sensor margin r={r:.6g}")
    else:
        floor = endgame_speed_floor(r, R_f, VT)
        if not Vs > floor:
            violations.append(f"linear-phase speed floor: Vs={Vs:.6g} <= {floor:.6g}")
    return EndGamePlan(
        protocol=ProtocolKind.IMPROVED,
        stage_times={"T_e": T_e, "T_l": T_l, "T_down": T_down, "T_linear": t + t_tilde},
        stage_distances={"R_N": RN, "R_last": R_last, "R_down": R_down, "R_f": R_f},
        linear_split=(t, t_tilde),
        violations=tuple(violations),
    )


def total_time(s: Scenario, Vs: float) -> tuple[dict[str, float], float]:
    sched = schedule(s, Vs)
    plan = endgame(s, Vs, sched.containment_radius)
    if not plan.feasible:
        raise InfeasiblePlanError("improved end game infeasible: " + "; ".join(plan.violations), plan)
    breakdown = {"T_spiral": sched.spiral_time, "T_in": sched.inward_time, **plan.stage_times}
    return breakdown, math.fsum(breakdown.values())
