"""Guaranteed-detection spiral sweeps against smart evaders in a disk.

Critical speeds, sweep schedules and end-game timing for the drifting and
improved spiral protocols, plus a grid-based wavefront simulator that checks
the analytic claims independently.
"""
from .scenario import (
    BelowCriticalError,
    EndGamePlan,
    InfeasiblePlanError,
    ProtocolKind,
    RegionDisk,
    Scenario,
    ScenarioError,
    SpeedSpec,
    SweepIterationRecord,
    SweepSchedule,
    critical_speed,
    resolve_speed,
    validate_scenario,
)
from .critical import (
    NewtonReport,
    all_critical_speeds,
    circular_critical_speed,
    drifting_spiral_critical_speed,
    endgame_speed_floor,
    improved_spiral_critical_speed,
    last_sweep_feasibility,
    lower_bound_speed,
    tangent_angle_phi,
)

__all__ = [
    "BelowCriticalError",
    "EndGamePlan",
    "InfeasiblePlanError",
    "NewtonReport",
    "ProtocolKind",
    "RegionDisk",
    "Scenario",
    "ScenarioError",
    "SpeedSpec",
    "SweepIterationRecord",
    "SweepSchedule",
    "all_critical_speeds",
    "circular_critical_speed",
    "critical_speed",
    "drifting_spiral_critical_speed",
    "endgame_speed_floor",
    "improved_spiral_critical_speed",
    "last_sweep_feasibility",
    "lower_bound_speed",
    "resolve_speed",
    "tangent_angle_phi",
    "validate_scenario",
]
