"""
Terrace construction by merging adjacent bistable fronts.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..config import logger
from ..exceptions import (
    BracketViolationError,
    ConfigError,
    MultipleSpeedsError,
    TerraceConstructionError,
    TerraceMismatchError,
)
from ..fronts.front_speed import FrontRecord, FrontSettings, SpeedEstimate, bistable_speed, combined_se
from ..parallel import parallel_map
from ..problem.grid import LatticeDirection
from ..problem.periodic_problem import PeriodicProblem
from ..spectral.steady_states import StateLattice, SteadyState, require_classified
from .merge_policies import MergePolicy, make_merge_policy


@dataclass(frozen=True)
class MergeEvent:
    upper_id: str
    lower_id: str
    removed_id: str
    upper_speed: float
    lower_speed: float
    merged_speed: Optional[float]
    tolerance: float
    still_split: bool = False

    def to_dict(self) -> Dict:
        return {
            'upper_id': self.upper_id,
            'lower_id': self.lower_id,
            'removed_id': self.removed_id,
            'c_upper': self.upper_speed,
            'c_lower': self.lower_speed,
            'c_merged': self.merged_speed,
            'tolerance': self.tolerance,
            'still_split': self.still_split,
        }


@dataclass(frozen=True, eq=False)
class Terrace:
    """
    Platforms pbar = q_0 > q_1 > ... > q_K = 0 joined by K fronts of
    nondecreasing speed.
    """

    direction: Tuple[int, ...]
    platforms: Tuple[SteadyState, ...]
    fronts: Tuple[FrontRecord, ...]
    merges: Tuple[MergeEvent, ...] = ()
    policy: str = 'leftmost'
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def size(self) -> int:
        """K, the number of fronts."""
        return len(self.fronts)

    @property
    def platform_ids(self) -> List[str]:
        return [p.id for p in self.platforms]

    @property
    def speeds(self) -> List[SpeedEstimate]:
        return [f.speed for f in self.fronts]

    @property
    def profiles(self) -> list:
        return [f.profile for f in self.fronts]

    @property
    def unique_certified(self) -> bool:
        return bool(self.flags.get('unique_certified', False))

    def to_dict(self) -> Dict:
        return {
            'e': list(self.direction),
            'platforms': self.platform_ids,
            'speeds': [{'c': s.value, 'se': s.stderr} for s in self.speeds],
            'fronts': [f.to_dict() for f in self.fronts],
            'merges': [m.to_dict() for m in self.merges],
            'policy': self.policy,
            'flags': dict(self.flags),
        }


def _measure_task(args) -> Union[FrontRecord, MultipleSpeedsError]:
    problem, direction, upper, lower, settings, intermediate = args
    try:
        return bistable_speed(problem, direction, upper, lower, settings, intermediate=intermediate)
    except MultipleSpeedsError as exc:
        return exc


class FrontMeasurer:
    """
    Caches front measurements by (upper id, lower id) for one problem and
    direction. Split fronts are cached as their MultipleSpeedsError.
    """

    def __init__(self, problem: PeriodicProblem, direction: LatticeDirection,
                 settings: Optional[FrontSettings] = None, jobs: int = 1):
        self.problem = problem
        self.direction = direction
        self.settings = settings or FrontSettings()
        self.jobs = jobs
        self._cache: Dict[Tuple[str, str], Union[FrontRecord, MultipleSpeedsError]] = {}

    def _task(self, upper: SteadyState, lower: SteadyState, intermediate: Sequence[SteadyState]):
        return (self.problem, self.direction, upper, lower, self.settings, tuple(intermediate))

    def prefetch(self, pairs: Sequence[Tuple[SteadyState, SteadyState, Sequence[SteadyState]]]) -> None:
        """Measure several independent pairs, in parallel when jobs > 1."""
        todo = [p for p in pairs if (p[0].id, p[1].id) not in self._cache]
        results = parallel_map(_measure_task, [self._task(*p) for p in todo], self.jobs)
        for (upper, lower, _), result in zip(todo, results):
            self._cache[(upper.id, lower.id)] = result

    def measure(self, upper: SteadyState, lower: SteadyState,
                intermediate: Sequence[SteadyState] = ()) -> FrontRecord:
        """
        Raises:
            MultipleSpeedsError: If the pair does not connect by a single front
        """
        key = (upper.id, lower.id)
        if key not in self._cache:
            self._cache[key] = _measure_task(self._task(upper, lower, intermediate))
        result = self._cache[key]
        if isinstance(result, MultipleSpeedsError):
            raise result
        return result


def _descent_tolerance(upper: FrontRecord, lower: FrontRecord, floor: float) -> float:
    return max(2.0 * combined_se(upper.speed, lower.speed), floor)


def build_terrace(problem: PeriodicProblem, lattice: StateLattice, direction: LatticeDirection,
                  settings: Optional[FrontSettings] = None,
                  policy: Union[str, MergePolicy] = 'leftmost',
                  measurer: Optional[FrontMeasurer] = None, jobs: int = 1) -> Terrace:
    """
    Build the propagating terrace in one direction.

    Starts from the fronts between adjacent stable states. While some speed
    c_(J-1) exceeds c_J by more than the merge tolerance, the platform
    between them is dropped and the direct front across it is measured; the
    merged speed must lie between the two speeds it replaces.

    Args:
        problem: Equation data
        lattice: Totally ordered stable states
        direction: Lattice direction e
        settings: Front measurement settings
        policy: Which descent to resolve first
        measurer: Shared measurement cache
        jobs: Worker processes for the adjacent-pair measurements

    Returns:
        Terrace with nondecreasing speeds

    Raises:
        ConfigError: If the lattice is not totally ordered
        MarginalStateError: If the lattice holds marginal states
        BracketViolationError: If a merged speed leaves its bracket
        TerraceConstructionError: If a descent cannot be resolved
    """
    if not lattice.totally_ordered:
        raise ConfigError(f"terrace construction needs totally ordered states; intersections {lattice.intersections}")
    require_classified(lattice)
    settings = settings or FrontSettings()
    tol = settings.tolerances
    policy = make_merge_policy(policy) if isinstance(policy, str) else policy
    measurer = measurer or FrontMeasurer(problem, direction, settings, jobs)

    platforms: List[SteadyState] = list(lattice.stable)
    adjacent = list(zip(platforms[:-1], platforms[1:]))
    measurer.prefetch([(upper, lower, ()) for upper, lower in adjacent])
    fronts: List[FrontRecord] = [measurer.measure(upper, lower) for upper, lower in adjacent]
    merges: List[MergeEvent] = []
    still_split = set()

    def descents(include_stuck: bool = False) -> List[int]:
        found = []
        for j in range(1, len(fronts)):
            gap = fronts[j - 1].c - fronts[j].c
            if gap <= _descent_tolerance(fronts[j - 1], fronts[j], tol.merge_floor):
                continue
            if include_stuck or (platforms[j - 1].id, platforms[j + 1].id) not in still_split:
                found.append(j)
        return found

    while True:
        candidates = descents()
        if not candidates:
            break
        j = policy.select(candidates)
        upper, removed, lower = platforms[j - 1], platforms[j], platforms[j + 1]
        slow, fast = fronts[j], fronts[j - 1]
        merge_tol = _descent_tolerance(fast, slow, tol.merge_floor)
        logger.info(
            f"Merging across {removed.id}: c({upper.id}->{removed.id})={fast.c:.5f} > "
            f"c({removed.id}->{lower.id})={slow.c:.5f}"
        )
        try:
            merged = measurer.measure(upper, lower, lattice.between(upper, lower))
        except MultipleSpeedsError as exc:
            logger.warning(f"Front {upper.id} -> {lower.id} is still split: speeds {exc.speeds}")
            still_split.add((upper.id, lower.id))
            merges.append(MergeEvent(upper.id, lower.id, removed.id, fast.c, slow.c, None,
                                     merge_tol, still_split=True))
            continue
        if not (slow.c - merge_tol <= merged.c <= fast.c + merge_tol):
            logger.error(f"Merged speed {merged.c:.5f} outside [{slow.c:.5f}, {fast.c:.5f}]")
            raise BracketViolationError(
                f"merged speed {merged.c:.5f} for {upper.id} -> {lower.id} is outside "
                f"[{slow.c:.5f}, {fast.c:.5f}] +- {merge_tol:.2e}"
            )
        merges.append(MergeEvent(upper.id, lower.id, removed.id, fast.c, slow.c, merged.c, merge_tol))
        fronts[j - 1:j + 1] = [merged]
        del platforms[j]

    remaining = descents(include_stuck=True)
    if remaining:
        raise TerraceConstructionError(
            f"speeds still decrease at platforms {[platforms[j].id for j in remaining]} after merging"
        )

    zero_speed = any(abs(f.c) <= tol.zero_speed_tol for f in fronts)
    if zero_speed:
        logger.warning("A terrace speed is within zero_speed_tol of 0; uniqueness is not certified")
    terrace = Terrace(
        direction=direction.components,
        platforms=tuple(platforms),
        fronts=tuple(fronts),
        merges=tuple(merges),
        policy=policy.name,
        flags={'unique_certified': not zero_speed, 'zero_speed': zero_speed},
    )
    logger.info(
        f"Terrace along {direction.label()}: platforms {terrace.platform_ids}, "
        f"speeds {[round(f.c, 5) for f in fronts]}"
    )
    return terrace


@dataclass(frozen=True)
class MergeOrderReport:
    policies: Tuple[str, ...]
    platforms: Dict[str, List[str]]
    speeds: Dict[str, List[float]]
    max_speed_gap: float
    passed: bool

    def to_dict(self) -> Dict:
        return {
            'policies': list(self.policies),
            'platforms': self.platforms,
            'speeds': self.speeds,
            'max_speed_gap': self.max_speed_gap,
            'passed': self.passed,
        }

    def raise_for_failure(self) -> None:
        if not self.passed:
            raise TerraceMismatchError(f"merge order changes the terrace: {self.platforms}, {self.speeds}")


def merge_order_invariance_check(problem: PeriodicProblem, lattice: StateLattice,
                                 direction: LatticeDirection,
                                 settings: Optional[FrontSettings] = None,
                                 policies: Sequence[str] = ('leftmost', 'rightmost'),
                                 jobs: int = 1, measurer: Optional[FrontMeasurer] = None) -> MergeOrderReport:
    """
    Build the terrace under every policy and compare platforms and speeds.

    Measurements are shared between the runs, so a pair measured by one policy
    is reused by the next.
    """
    settings = settings or FrontSettings()
    tol = settings.tolerances
    measurer = measurer or FrontMeasurer(problem, direction, settings, jobs)
    terraces = {name: build_terrace(problem, lattice, direction, settings, name, measurer) for name in policies}
    reference = terraces[policies[0]]
    passed = True
    worst = 0.0
    for name in policies[1:]:
        other = terraces[name]
        if other.platform_ids != reference.platform_ids:
            passed = False
            continue
        for a, b in zip(reference.speeds, other.speeds):
            gap = abs(a.value - b.value)
            worst = max(worst, gap)
            if gap > max(3.0 * combined_se(a, b), tol.speed_match_floor):
                passed = False
    report = MergeOrderReport(
        policies=tuple(policies),
        platforms={name: t.platform_ids for name, t in terraces.items()},
        speeds={name: [s.value for s in t.speeds] for name, t in terraces.items()},
        max_speed_gap=float(worst),
        passed=passed,
    )
    if not passed:
        logger.error(f"Merge order dependence detected: {report.platforms}")
    return report


def speeds_nondecreasing(speeds: Sequence[SpeedEstimate], floor: float) -> bool:
    return all(
        b.value >= a.value - max(2.0 * combined_se(a, b), floor)
        for a, b in zip(speeds[:-1], speeds[1:])
    )


def _terrace_task(args) -> Terrace:
    problem, lattice, components, settings, policy = args
    return build_terrace(problem, lattice, LatticeDirection(components), settings, policy)


def build_terraces(problem: PeriodicProblem, lattice: StateLattice, directions: Sequence[Tuple[int, ...]],
                   settings: Optional[FrontSettings] = None, policy: str = 'leftmost',
                   jobs: int = 1) -> Dict[Tuple[int, ...], Terrace]:
    """Terraces along several directions, one worker process per direction when jobs > 1."""
    directions = [LatticeDirection(tuple(d)).components for d in directions]
    tasks = [(problem, lattice, components, settings, policy) for components in directions]
    terraces = parallel_map(_terrace_task, tasks, jobs)
    return dict(zip(directions, terraces))
