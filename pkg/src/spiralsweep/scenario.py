"""Shared value types for spiral sweep planning.

Lengths, times and speeds are plain floats in any consistent unit system.
``r`` is always the sensor *half*-length; the full line sensor is ``2r`` long.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping


class ScenarioError(ValueError):
    """Invalid scenario or speed input."""


class BelowCriticalError(ValueError):
    """The sweeper speed cannot shrink the evader region for this protocol."""

    def __init__(self, message: str, critical: float | None = None):
        super().__init__(message)
        self.critical = critical


class InfeasiblePlanError(RuntimeError):
    """An end-game plan violates one of its feasibility constraints."""

    def __init__(self, message: str, plan: "EndGamePlan | None" = None):
        super().__init__(message)
        self.plan = plan


class ProtocolKind(enum.Enum):
    DRIFTING = "drifting"
    IMPROVED = "improved"
    CIRCULAR = "circular"  # critical-speed queries only

    @classmethod
    def parse(cls, value: "str | ProtocolKind") -> "ProtocolKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ScenarioError(f"unknown protocol {value!r} (expected one of {names})") from None


@dataclass(frozen=True)
class Scenario:
    R0: float
    r: float
    VT: float

    @property
    def alpha(self) -> float:
        return self.R0 / self.r


@dataclass(frozen=True)
class SpeedSpec:
    """Sweeper speed, either absolute or an increment above a critical speed."""

    Vs: float | None = None
    protocol: ProtocolKind | None = None
    deltaV: float | None = None

    def __post_init__(self):
        absolute = self.Vs is not None
        relative = self.deltaV is not None
        if absolute == relative:
            raise ScenarioError("give either an absolute Vs or a deltaV above a critical speed")
        if relative:
            if self.protocol is None:
                raise ScenarioError("deltaV needs the protocol whose critical speed it is added to")
            if not self.deltaV > 0:
                raise ScenarioError(f"deltaV must be positive, got {self.deltaV}")

    @classmethod
    def absolute(cls, Vs: float) -> "SpeedSpec":
        return cls(Vs=Vs)

    @classmethod
    def above_critical(cls, protocol: ProtocolKind | str, deltaV: float) -> "SpeedSpec":
        return cls(protocol=ProtocolKind.parse(protocol), deltaV=deltaV)


@dataclass(frozen=True)
class RegionDisk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ScenarioError(f"disk radius must be non-negative, got {self.radius}")


@dataclass(frozen=True)
class SweepIterationRecord:
    index: int
    radius_before: float
    radius_after: float
    sweep_time: float
    beta: float = 0.0
    inward_time: float = 0.0
    # region center after this iteration, world frame
    center_after: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SweepSchedule:
    iterations: tuple[SweepIterationRecord, ...]
    containment_radius: float
    containment_time: float

    @property
    def iteration_count(self) -> int:
        return len(self.iterations)

    @property
    def spiral_time(self) -> float:
        return math.fsum(it.sweep_time for it in self.iterations)

    @property
    def inward_time(self) -> float:
        return math.fsum(it.inward_time for it in self.iterations)

    @property
    def final_center(self) -> tuple[float, float]:
        if not self.iterations:
            return (0.0, 0.0)
        return self.iterations[-1].center_after


@dataclass(frozen=True)
class EndGamePlan:
    """Stage times and distances of the final maneuver.

    ``stage_times`` is ordered as the stages are flown.  ``violations`` names
    each feasibility constraint that failed; it is empty iff ``feasible``.
    """

    protocol: ProtocolKind
    stage_times: Mapping[str, float]
    stage_distances: Mapping[str, float]
    linear_split: tuple[float, float]
    violations: tuple[str, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def total_time(self) -> float:
        return math.fsum(self.stage_times.values())

    @property
    def T_linear(self) -> float:
        return self.linear_split[0] + self.linear_split[1]


def validate_scenario(s: Scenario) -> Scenario:
    for name in ("R0", "r", "VT"):
        value = getattr(s, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ScenarioError(f"{name} must be a positive finite number, got {value!r}")
    if s.R0 < 2 * s.r:
        raise ScenarioError(
            f"sensor does not fit: R0 >= 2r required, got R0={s.R0} < 2r={2 * s.r}"
        )
    return s


def critical_speed(s: Scenario, protocol: ProtocolKind | str) -> float:
    from . import critical

    protocol = ProtocolKind.parse(protocol)
    if protocol is ProtocolKind.DRIFTING:
        return critical.drifting_spiral_critical_speed(s)
    if protocol is ProtocolKind.IMPROVED:
        report = critical.improved_spiral_critical_speed(s)
        if not report.converged:
            raise RuntimeError(f"improved critical speed did not converge: {report}")
        return report.root
    return critical.circular_critical_speed(s)


def resolve_speed(s: Scenario, spec: SpeedSpec) -> float:
    if spec.Vs is not None:
        if not spec.Vs > s.VT:
            raise ScenarioError(f"sweeper speed must exceed VT={s.VT}, got Vs={spec.Vs}")
        return float(spec.Vs)
    return critical_speed(s, spec.protocol) + spec.deltaV
