"""Brute-force threshold search, Pareto frontier extraction, and strategy
comparison under quality-of-service constraints.

The search space is the Cartesian grid over the E-1 branch thresholds; each
point is evaluated exactly once and selection is a deterministic sort, so
parallel and serial sweeps agree bit for bit. For E > 4 the grid explodes
combinatorially; expect (points per dim)^(E-1) evaluations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import product

from .costs import DeviceProfile, EvalReport, evaluate
from .gate import Mode, Policy
from .lr import LRModel
from .trace import Trace


class QoSRule(Enum):
    ABSOLUTE_10PTS = "absolute-10pts"
    RELATIVE_90PCT = "relative-90pct"


class Objective(Enum):
    MIN_LATENCY = "min-latency"
    MIN_ENERGY = "min-energy"


class ParetoAxes(Enum):
    ACC_VS_LATENCY = "acc-latency"
    ACC_VS_ENERGY = "acc-energy"


@dataclass(frozen=True)
class QoSSpec:
    """Constraint triple; any subset may be present but not none of them."""

    accuracy_floor: float | None = None
    latency_cap_ms: float | None = None
    energy_cap_mj: float | None = None

    def __post_init__(self) -> None:
        if self.accuracy_floor is None and self.latency_cap_ms is None \
                and self.energy_cap_mj is None:
            raise ValueError("QoS spec needs at least one constraint")
        if self.accuracy_floor is not None and not 0.0 <= self.accuracy_floor <= 1.0:
            raise ValueError("accuracy floor must lie in [0, 1]")
        if self.latency_cap_ms is not None and self.latency_cap_ms <= 0:
            raise ValueError("latency cap must be > 0")
        if self.energy_cap_mj is not None and self.energy_cap_mj <= 0:
            raise ValueError("energy cap must be > 0")

    def satisfied(self, report: EvalReport) -> bool:
        if self.accuracy_floor is not None and report.accuracy < self.accuracy_floor:
            return False
        if self.latency_cap_ms is not None and report.avg_latency_ms > self.latency_cap_ms:
            return False
        if self.energy_cap_mj is not None and report.avg_energy_mj > self.energy_cap_mj:
            return False
        return True

    def violation(self, report: EvalReport) -> float:
        """Total relative shortfall across constraints; 0 iff satisfied.
        Used to pick the closest point when nothing on the grid is feasible."""
        v = 0.0
        if self.accuracy_floor is not None and self.accuracy_floor > 0:
            v += max(0.0, (self.accuracy_floor - report.accuracy) / self.accuracy_floor)
        if self.latency_cap_ms is not None:
            v += max(0.0, (report.avg_latency_ms - self.latency_cap_ms) / self.latency_cap_ms)
        if self.energy_cap_mj is not None:
            v += max(0.0, (report.avg_energy_mj - self.energy_cap_mj) / self.energy_cap_mj)
        return v


def qos_from_context(sota_accuracy: float, offload_latency_ms: float,
                     offload_energy_mj: float,
                     rule: QoSRule = QoSRule.ABSOLUTE_10PTS) -> QoSSpec:
    """Derive the constraint triple from context: accuracy floor 10 points
    below (or 90% of) the state-of-the-art accuracy, and latency/energy caps
    at half the cost of offloading every sample."""
    if not 0.0 < sota_accuracy <= 1.0:
        raise ValueError("sota_accuracy must lie in (0, 1]")
    if rule == QoSRule.ABSOLUTE_10PTS:
        floor = sota_accuracy - 0.10
    else:
        floor = 0.9 * sota_accuracy
    return QoSSpec(
        accuracy_floor=floor,
        latency_cap_ms=0.5 * offload_latency_ms,
        energy_cap_mj=0.5 * offload_energy_mj,
    )


@dataclass(frozen=True)
class GridSpec:
    """Per-dimension threshold grid, inclusive of both bounds."""

    lower: float = 0.5
    upper: float = 1.0
    step: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 <= self.lower < self.upper <= 1.0:
            raise ValueError("grid needs 0 <= lower < upper <= 1")
        if self.step <= 0:
            raise ValueError("grid step must be > 0")

    def points(self) -> tuple[float, ...]:
        count = int((self.upper - self.lower) / self.step + 1e-9) + 1
        return tuple(round(self.lower + i * self.step, 12) for i in range(count))

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """lower:upper:step, e.g. '0.5:1.0:0.05'."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid '{text}' must be lower:upper:step")
        return cls(lower=float(parts[0]), upper=float(parts[1]), step=float(parts[2]))


@dataclass(frozen=True)
class OptimizeResult:
    policy: Policy
    report: EvalReport
    feasible: bool


def sweep(trace: Trace, model: LRModel | None, profile: DeviceProfile,
          grid: GridSpec, mode: Mode = Mode.EE_HI,
          threads: int = 1) -> list[tuple[Policy, EvalReport]]:
    """Evaluate every grid point (Cartesian over the E-1 threshold dims) in
    lexicographic order. With one exit the grid collapses to the single
    threshold-free policy."""
    dims = trace.num_exits - 1
    policies = [Policy(mode=mode, thresholds=combo)
                for combo in product(grid.points(), repeat=dims)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(
                lambda p: evaluate(trace, p, model, profile), policies))
    else:
        reports = [evaluate(trace, p, model, profile) for p in policies]
    return list(zip(policies, reports))


def _objective_value(report: EvalReport, objective: Objective) -> float:
    if objective == Objective.MIN_LATENCY:
        return report.avg_latency_ms
    return report.avg_energy_mj


def optimize(trace: Trace, model: LRModel | None, profile: DeviceProfile,
             qos: QoSSpec, grid: GridSpec,
             objective: Objective = Objective.MIN_LATENCY,
             threads: int = 1) -> OptimizeResult:
    """Exhaustive threshold search in EE-HI mode.

    Returns the feasible point minimizing the objective; ties fall back to
    lower energy, then the lexicographically smaller threshold vector. When
    no grid point is feasible, returns the closest point by total relative
    constraint violation (same tie-break) flagged infeasible.
    """
    evaluated = sweep(trace, model, profile, grid, Mode.EE_HI, threads)
    feasible = [(p, r) for p, r in evaluated if qos.satisfied(r)]
    if feasible:
        best = min(feasible, key=lambda pr: (
            _objective_value(pr[1], objective), pr[1].avg_energy_mj, pr[0].thresholds))
        return OptimizeResult(policy=best[0], report=best[1], feasible=True)
    closest = min(evaluated, key=lambda pr: (
        qos.violation(pr[1]), _objective_value(pr[1], objective),
        pr[1].avg_energy_mj, pr[0].thresholds))
    return OptimizeResult(policy=closest[0], report=closest[1], feasible=False)


def _cost_of(report: EvalReport, axes: ParetoAxes) -> float:
    if axes == ParetoAxes.ACC_VS_LATENCY:
        return report.avg_latency_ms
    return report.avg_energy_mj


def pareto(trace: Trace, model: LRModel | None, profile: DeviceProfile,
           grid: GridSpec, axes: ParetoAxes = ParetoAxes.ACC_VS_LATENCY,
           threads: int = 1) -> list[tuple[Policy, EvalReport]]:
    """Non-dominated grid points (maximize accuracy, minimize cost), sorted
    by cost then accuracy then thresholds. Points with identical objectives
    are mutually non-dominating and are all kept."""
    evaluated = sweep(trace, model, profile, grid, Mode.EE_HI, threads)
    frontier = [
        (p, r) for p, r in evaluated
        if not any(_dominates(r2, r, axes) for _, r2 in evaluated)
    ]
    frontier.sort(key=lambda pr: (_cost_of(pr[1], axes), -pr[1].accuracy, pr[0].thresholds))
    return frontier


def _dominates(a: EvalReport, b: EvalReport, axes: ParetoAxes) -> bool:
    """a dominates b: no worse on both objectives, strictly better on one."""
    ca, cb = _cost_of(a, axes), _cost_of(b, axes)
    if ca > cb or a.accuracy < b.accuracy:
        return False
    return ca < cb or a.accuracy > b.accuracy


# Order in which strategies are evaluated; also the tie-break preference when
# two strategies produce identical ranking keys.
STRATEGY_ORDER = (Mode.ON_DEVICE, Mode.REMOTE, Mode.HI, Mode.EE, Mode.EE_HI)


@dataclass(frozen=True)
class StrategyChoice:
    """Best strategy for one fixed QoS dimension, or infeasible-for-all."""

    fixed: str
    mode: Mode | None
    policy: Policy | None
    report: EvalReport | None

    @property
    def feasible(self) -> bool:
        return self.mode is not None


def _fixed_dimensions(qos: QoSSpec) -> list[tuple[str, QoSSpec]]:
    dims = []
    if qos.accuracy_floor is not None:
        dims.append(("accuracy", QoSSpec(accuracy_floor=qos.accuracy_floor)))
    if qos.latency_cap_ms is not None:
        dims.append(("latency", QoSSpec(latency_cap_ms=qos.latency_cap_ms)))
    if qos.energy_cap_mj is not None:
        dims.append(("energy", QoSSpec(energy_cap_mj=qos.energy_cap_mj)))
    return dims


def _ranking_key(fixed: str, report: EvalReport) -> tuple[float, float]:
    if fixed == "accuracy":
        return (report.avg_latency_ms, report.avg_energy_mj)
    if fixed == "latency":
        return (-report.accuracy, report.avg_energy_mj)
    return (-report.accuracy, report.avg_latency_ms)


def compare_strategies(trace: Trace, model: LRModel, profile: DeviceProfile,
                       qos: QoSSpec, grid: GridSpec = GridSpec(),
                       threads: int = 1) -> list[StrategyChoice]:
    """For each constraint present in the QoS spec, hold that constraint
    fixed and pick the strategy that maximizes the remaining metrics:
    fixed accuracy -> min latency (tie: energy); fixed latency -> max
    accuracy (tie: energy); fixed energy -> max accuracy (tie: latency).

    EE and EE-HI enter with their thresholds optimized per dimension (best
    feasible grid point under that dimension's ranking), other strategies
    with their single evaluation.
    """
    plain = {
        mode: evaluate(trace, Policy(mode=mode), model if mode in (Mode.HI, Mode.EE_HI) else None, profile)
        for mode in (Mode.ON_DEVICE, Mode.REMOTE, Mode.HI)
    }
    gated = {
        Mode.EE: sweep(trace, None, profile, grid, Mode.EE, threads),
        Mode.EE_HI: sweep(trace, model, profile, grid, Mode.EE_HI, threads),
    }

    choices = []
    for fixed, constraint in _fixed_dimensions(qos):
        candidates: list[tuple[Mode, Policy, EvalReport]] = []
        for mode in STRATEGY_ORDER:
            if mode in plain:
                report = plain[mode]
                if constraint.satisfied(report):
                    candidates.append((mode, Policy(mode=mode), report))
            else:
                feasible = [(p, r) for p, r in gated[mode] if constraint.satisfied(r)]
                if feasible:
                    p, r = min(feasible, key=lambda pr: (
                        _ranking_key(fixed, pr[1]), pr[0].thresholds))
                    candidates.append((mode, p, r))
        if not candidates:
            choices.append(StrategyChoice(fixed=fixed, mode=None, policy=None, report=None))
            continue
        # min() is stable, so STRATEGY_ORDER settles exact key ties.
        mode, policy, report = min(candidates, key=lambda c: _ranking_key(fixed, c[2]))
        choices.append(StrategyChoice(fixed=fixed, mode=mode, policy=policy, report=report))
    return choices
