"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a single PASS/FAIL line (listed again in the pytest
terminal summary).  Run directly with ``python tests/test_acceptance.py`` to
get just those lines.
"""
from __future__ import annotations

import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from spiralsweep import Scenario, cli, drifting, improved, oracle
from spiralsweep.critical import (
    LAST_SWEEP_RATIO,
    circular_critical_speed,
    drifting_spiral_critical_speed,
    endgame_speed_floor,
    improved_spiral_critical_speed,
    lower_bound_speed,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover - running as a script from elsewhere
    ACCEPTANCE_LINES = []

REF = Scenario(100.0, 10.0, 1.0)
DESK = Scenario(20.0, 4.0, 1.0)
GOLDEN = Path(__file__).parent / "golden"


class Criterion:
    """Collects named checks, then reports one line and fails on any miss."""

    def __init__(self, number: int, title: str, budget: float | None = None):
        self.number = number
        self.title = title
        self.budget = budget
        self.failures: list[str] = []
        self.count = 0
        self.start = time.perf_counter()

    def close(self, name, value, want, tol):
        self.count += 1
        if not abs(value - want) <= tol:
            self.failures.append(f"{name}={value:.6g} want {want:g}±{tol:g}")

    def true(self, name, ok, detail=""):
        self.count += 1
        if not ok:
            self.failures.append(f"{name} {detail}".strip())

    def finish(self):
        elapsed = time.perf_counter() - self.start
        if self.budget is not None and elapsed > self.budget:
            self.failures.append(f"runtime {elapsed:.2f}s over {self.budget:g}s budget")
        status = "PASS" if not self.failures else "FAIL"
        line = f"[{status}] criterion {self.number}: {self.title} ({self.count} checks, {elapsed:.2f}s)"
        if self.failures:
            line += " -- " + "; ".join(self.failures)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not self.failures, line


def random_drifting_cases(n, seed):
    rng = random.Random(seed)
    for _ in range(n):
        r = rng.uniform(0.5, 20.0)
        s = Scenario(rng.uniform(3.0, 100.0) * r, r, rng.uniform(0.2, 5.0))
        yield s, drifting_spiral_critical_speed(s) + rng.uniform(0.1, 10.0) * s.VT


def test_criterion_01_critical_speeds():
    c = Criterion(1, "critical speeds at the reference scenario", budget=1.0)
    c.close("V_LB", lower_bound_speed(REF), 31.4159, 1e-3)
    c.close("V_drifting", drifting_spiral_critical_speed(REF), 59.6435, 1e-3)
    rep = improved_spiral_critical_speed(REF)
    c.true("newton converged", rep.converged)
    c.close("V_improved", rep.root, 33.4294, 1e-2)
    c.close("V_circular", circular_critical_speed(REF), 63.8319, 1e-3)
    c.finish()


def test_criterion_02_drifting_totals():
    c = Criterion(2, "drifting totals at deltaV=1", budget=1.0)
    Vs = drifting_spiral_critical_speed(REF) + 1.0
    sched = drifting.schedule(REF, Vs)
    plan = drifting.endgame(REF, Vs, sched.containment_radius)
    c.close("T_spiral", sched.containment_time, 301.102, 0.01)
    c.close("T_out", plan.stage_times["T_out"], 0.3066, 1e-3)
    c.close("T_l", plan.stage_times["T_l"], 1.0918, 1e-3)
    c.close("T_in_last", plan.stage_times["T_in_last"], 0.1445, 1e-3)
    c.close("t", plan.linear_split[0], 0.0212, 1e-3)
    c.close("t_tilde", plan.linear_split[1], 0.0431, 1e-3)
    c.close("T_total", drifting.total_time(REF, Vs)[1], 302.7078, 0.002)
    c.finish()


def test_criterion_03_improved_totals():
    c = Criterion(3, "improved totals at deltaV=1", budget=1.0)
    Vs = improved_spiral_critical_speed(REF).root + 1.0
    sched = improved.schedule(REF, Vs)
    plan = improved.endgame(REF, Vs, sched.containment_radius)
    c.close("T_spiral", sched.spiral_time, 222.0191, 1e-2)
    c.close("T_in", sched.inward_time, 2.7655, 1e-2)
    c.close("T_e", plan.stage_times["T_e"], 0.139, 1e-2)
    c.close("T_l", plan.stage_times["T_l"], 2.003, 1e-2)
    c.close("T_down", plan.stage_times["T_down"], 0.3105, 1e-2)
    c.close("R_f", plan.stage_distances["R_f"], 2.3135, 1e-2)
    c.close("T_linear", plan.stage_times["T_linear"], 0.2118, 1e-2)
    c.close("T_total", improved.total_time(REF, Vs)[1], 227.4489, 1e-2)
    c.finish()


def test_criterion_04_endgame_floors():
    c = Criterion(4, "end-game speed floors and ratio threshold", budget=1.0)
    c.close("drifting floor", endgame_speed_floor(10.0, 1.2629, 1.0), 1.7966, 1e-3)
    c.close("improved floor", endgame_speed_floor(10.0, 2.3135, 1.0), 2.3491, 1e-3)
    c.close("ratio threshold", LAST_SWEEP_RATIO, 2.9029, 1e-4)
    c.finish()


def test_criterion_05_closed_form_vs_recurrence():
    c = Criterion(5, "drifting closed forms match the recurrence (100 scenarios)", budget=1.0)
    worst = 0.0
    for s, Vs in random_drifting_cases(100, seed=2024):
        sched = drifting.schedule(s, Vs)
        N = sched.iteration_count
        c.true("N", drifting.iterations_closed_form(s, Vs) == N, f"closed form differs at {s}")
        for got, want in (
            (drifting.total_sweep_time_closed_form(s, Vs, N), sched.containment_time),
            (drifting.contained_radius_closed_form(s, Vs, N), sched.containment_radius),
        ):
            worst = max(worst, abs(got - want) / abs(want))
    c.true("relative error <= 1e-6", worst <= 1e-6, f"worst {worst:.3g}")
    c.finish()


def test_criterion_06_ode_cross_check():
    c = Criterion(6, "RK4 ODE matches the closed-form sweep time (20 scenarios)", budget=5.0)
    worst = 0.0
    for s, Vs in random_drifting_cases(20, seed=6):
        closed = drifting.time_to_angle(s, Vs, s.R0, 2 * math.pi)
        num = oracle.integrate_spiral_ode(s, Vs, s.R0 - s.r, 2 * math.pi, 100_000)
        worst = max(worst, abs(num - closed) / closed)
    c.true("relative error <= 1e-6", worst <= 1e-6, f"worst {worst:.3g}")
    c.finish()


def test_criterion_07_confinement_inequality():
    c = Criterion(7, "confinement inequality on a 400x400 grid (100 scenarios)", budget=10.0)
    for s, Vs in random_drifting_cases(100, seed=7):
        c.true("inequality", oracle.verify_confinement_inequality(s, Vs, 400), f"violated at {s}, Vs={Vs}")
    c.finish()


def test_criterion_08_study_trends():
    c = Criterion(8, "parameter-study trends", budget=30.0)
    # alpha study, drifting, deltaV = VT
    prev = (-1, -1.0)
    for alpha in range(2, 101):
        s = Scenario(alpha * 10.0, 10.0, 1.0)
        sch = drifting.schedule(s, drifting_spiral_critical_speed(s) + 1.0)
        cur = (sch.iteration_count, sch.containment_time)
        c.true("alpha trend", cur[0] >= prev[0] and cur[1] >= prev[1], f"at alpha={alpha}")
        prev = cur
    # deltaV studies
    dvs = np.arange(0.5, 10.0 + 1e-9, 0.25)
    for name, mod, Vc in (
        ("drifting", drifting, drifting_spiral_critical_speed(REF)),
        ("improved", improved, improved_spiral_critical_speed(REF).root),
    ):
        N_prev, T_prev, Ttot_prev = math.inf, math.inf, math.inf
        for dv in dvs:
            sch = mod.schedule(REF, Vc + dv)
            total = mod.total_time(REF, Vc + dv)[1]
            ok = sch.iteration_count <= N_prev and sch.containment_time <= T_prev and total <= Ttot_prev
            c.true(f"{name} deltaV trend", ok, f"at deltaV={dv:g}")
            N_prev, T_prev, Ttot_prev = sch.iteration_count, sch.containment_time, total
    # both spirals above the circular critical speed
    Vcirc = circular_critical_speed(REF)
    for dv in dvs:
        t_imp = improved.total_time(REF, Vcirc + dv)[1]
        t_dri = drifting.total_time(REF, Vcirc + dv)[1]
        c.true("improved < drifting above circular critical", t_imp < t_dri, f"at deltaV={dv:g}")
    c.finish()


@pytest.mark.slow
@pytest.mark.parametrize("protocol", ["drifting", "improved"])
def test_criterion_09_oracle_bracketing(protocol):
    number = 9
    c = Criterion(number, f"grid oracle brackets the {protocol} critical speed")
    Vc = oracle.critical_speed_for(DESK, protocol)
    h = DESK.r / 20
    for factor in (1.1, 0.9):
        Vs = factor * Vc
        t0 = time.perf_counter()
        v = oracle.simulate(DESK, Vs, protocol, h, 0.9 * h / Vs, horizon=200.0)
        took = time.perf_counter() - t0
        c.true(f"{factor}*Vc runtime < 120s", took < 120.0, f"took {took:.1f}s")
        if factor > 1:
            analytic = (drifting if protocol == "drifting" else improved).total_time(DESK, Vs)[1]
            c.true(f"{factor}*Vc detects", v.kind is oracle.VerdictKind.DETECTION_COMPLETE, v.kind.value)
            if v.time is not None:
                c.close(f"{factor}*Vc relative error", abs(v.time - analytic) / analytic, 0.0, 0.10)
        else:
            failed = v.kind in (oracle.VerdictKind.ESCAPE_WITNESS, oracle.VerdictKind.TIMED_OUT)
            c.true(f"{factor}*Vc fails", failed, v.kind.value)
    c.finish()


def test_criterion_10_cli_goldens(capsys):
    c = Criterion(10, "CLI output matches committed goldens", budget=5.0)
    ref = ["--R0", "100", "--r", "10", "--VT", "1"]
    cases = {
        "critical.txt": ["critical", *ref],
        "critical.csv": ["critical", *ref, "--format", "csv"],
        "schedule_drifting.csv": ["schedule", *ref, "--deltaV", "1", "--protocol", "drifting", "--format", "csv"],
        "schedule_improved.csv": ["schedule", *ref, "--deltaV", "1", "--protocol", "improved", "--format", "csv"],
    }
    for name, argv in cases.items():
        code = cli.main(argv)
        out = capsys.readouterr().out
        c.true(f"{name} exit 0", code == 0, f"exit {code}")
        c.true(f"{name} byte-identical", out.encode() == (GOLDEN / name).read_bytes())
    c.finish()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
