"""
Terraces read off a Cauchy run, and terrace comparison.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import logger
from ..evolve.integrator import evolve, planar_datum
from ..evolve.observers import LevelSetTracker
from ..exceptions import ConfigError, PlateauDetectionError, TerraceMismatchError, UnknownPlateauError
from ..fronts.front_speed import FrontSettings, SpeedEstimate, combined_se, directional_domain
from ..problem.grid import LatticeDirection
from ..problem.periodic_problem import PeriodicProblem
from ..problem.schema import Tolerances
from ..spectral.steady_states import StateLattice, SteadyState, require_classified

PLATEAU_TOL_FRACTION = 0.01
MIN_WIDTH_FRACTION = 0.05
MIN_WIDTH_PERIODS = 5.0


@dataclass(frozen=True, eq=False)
class ObservedTerrace:
    """Platforms and transition speeds seen in a solution started from pbar 1_{x.e <= 0}."""

    direction: Tuple[int, ...]
    platforms: Tuple[SteadyState, ...]
    transitions: Tuple[SpeedEstimate, ...]
    level_speeds: Tuple[Tuple[float, SpeedEstimate], ...] = ()
    plateau_widths: Dict[str, float] = field(default_factory=dict)
    time: float = 0.0
    flags: Tuple[str, ...] = ()
    discrepancies: Tuple['PlateauDiscrepancy', ...] = ()

    @property
    def size(self) -> int:
        return len(self.transitions)

    @property
    def platform_ids(self) -> List[str]:
        return [p.id for p in self.platforms]

    @property
    def speeds(self) -> List[SpeedEstimate]:
        return list(self.transitions)

    @property
    def profiles(self) -> list:
        return [None] * len(self.transitions)

    def to_dict(self) -> Dict:
        return {
            'e': list(self.direction),
            'platforms': self.platform_ids,
            'speeds': [{'c': s.value, 'se': s.stderr} for s in self.transitions],
            'level_speeds': [{'level': level, 'c': s.value, 'se': s.stderr} for level, s in self.level_speeds],
            'plateau_widths': dict(self.plateau_widths),
            'time': self.time,
            'flags': list(self.flags),
            'plateau_discrepancies': [d.to_dict() for d in self.discrepancies],
        }


@dataclass(frozen=True)
class PlateauDiscrepancy:
    """
    A plateau claimed between transitions of strictly increasing speed,
    with its measured width against (c_ahead - c_behind) t.
    """

    state_id: str
    levels: Tuple[float, float]
    speed_behind: float
    speed_ahead: float
    measured_width: float
    predicted_width: float

    def to_dict(self) -> Dict:
        return {
            'state': self.state_id,
            'levels': list(self.levels),
            'c_behind': self.speed_behind,
            'c_ahead': self.speed_ahead,
            'measured_width': self.measured_width,
            'predicted_width': self.predicted_width,
        }


def plateau_discrepancies(states: Sequence[SteadyState], levels: Sequence[float],
                          groups: Sequence[Sequence[int]], transitions: Sequence[SpeedEstimate],
                          widths: Dict[str, float], time: float) -> List[PlateauDiscrepancy]:
    """
    One record per plateau between consecutive transitions.

    The plateau is claimed because the speed ahead exceeds the speed behind;
    read with the inequality reversed, no plateau would be claimed. Each record
    is logged with the measured width next to the expansion rate.
    """
    found = []
    for g in range(1, len(groups)):
        j = groups[g][0]
        state = states[j]
        behind, ahead = transitions[g - 1].value, transitions[g].value
        record = PlateauDiscrepancy(
            state_id=state.id,
            levels=(float(levels[j - 1]), float(levels[j])),
            speed_behind=float(behind),
            speed_ahead=float(ahead),
            measured_width=float(widths.get(state.id, 0.0)),
            predicted_width=float((ahead - behind) * time),
        )
        logger.warning(
            f"Plateau discrepancy at {state.id}: levels {record.levels[0]:.4g}/{record.levels[1]:.4g} "
            f"move at {behind:.5g} < {ahead:.5g}, claimed on increasing speeds; "
            f"width {record.measured_width:g} measured vs {record.predicted_width:g} predicted"
        )
        found.append(record)
    return found


def _longest_run(mask: np.ndarray) -> int:
    best = current = 0
    for hit in mask:
        current = current + 1 if hit else 0
        best = max(best, current)
    return best


def _group_levels(estimates: Sequence[SpeedEstimate], floor: float) -> List[List[int]]:
    """Split consecutive levels wherever the speed strictly increases."""
    groups = [[0]]
    for k in range(1, len(estimates)):
        a, b = estimates[k - 1], estimates[k]
        if b.value - a.value > max(3.0 * combined_se(a, b), floor):
            groups.append([k])
        else:
            groups[-1].append(k)
    return groups


def observe_terrace_from_cauchy(problem: PeriodicProblem, lattice: StateLattice,
                                direction: LatticeDirection,
                                settings: Optional[FrontSettings] = None,
                                horizon: Optional[float] = None,
                                u0: Optional[np.ndarray] = None) -> ObservedTerrace:
    """
    Run the Cauchy problem and detect the terrace it follows.

    Every level halfway between consecutive stable states is tracked over
    [T/2, T]. Consecutive levels moving at the same speed belong to one
    transition. A stable state between two transitions of strictly increasing
    speed must show an expanding plateau at time T; a plateau narrower than
    the minimum width for levels of equal speed is flagged 'unresolved_pair'.

    Args:
        problem: Equation data
        lattice: Totally ordered stable states
        direction: Lattice direction e
        settings: Resolution and tolerance settings
        horizon: Final time (defaults to the settings horizon)
        u0: Initial field on the directional domain (defaults to pbar 1_{x.e <= offset})

    Returns:
        ObservedTerrace

    Raises:
        PlateauDetectionError: If a plateau is not resolved by the horizon
        UnknownPlateauError: If a flat region matches no lattice state
        MarginalStateError: If the lattice holds marginal states
    """
    require_classified(lattice)
    settings = settings or FrontSettings()
    tol = settings.tolerances
    horizon = horizon or settings.horizon
    states = list(lattice.stable)
    pbar = states[0]
    domain = directional_domain(problem, direction, settings.points_per_period, settings.extent_periods)
    unit = direction.unit
    if u0 is None:
        u0 = planar_datum(domain, pbar.cell_field(), np.zeros_like(pbar.cell_field()), unit,
                          settings.datum_offset)

    levels = [0.5 * (a.mean + b.mean) for a, b in zip(states[:-1], states[1:])]
    since = 0.5 * horizon
    tracker = LevelSetTracker(domain, unit, settings.cadence, start_time=since)
    logger.info(f"Observing the Cauchy terrace along e={direction.label()} up to t={horizon:g}")
    evolve(problem, domain, u0, horizon, [tracker], dt=settings.dt,
           tolerances=tol, solver=settings.linear_solver)

    tracks = [tracker.positions(level, since=since) for level in levels]
    crossed = [bool(np.isfinite(xs).any()) for _, xs in tracks]
    if not any(crossed):
        logger.info("No level is crossed: the solution shows no transition")
        return ObservedTerrace(direction.components, (pbar,), (), time=horizon)
    if not all(crossed):
        missing = [levels[k] for k, hit in enumerate(crossed) if not hit]
        raise PlateauDetectionError(f"levels {missing} are never crossed by t={horizon:g}")

    estimates = [SpeedEstimate.fit(times, xs) for times, xs in tracks]
    groups = _group_levels(estimates, tol.speed_match_floor)
    transitions = [estimates[g[len(g) // 2]] for g in groups]

    final = tracker.latest
    gap = min(a.mean - b.mean for a, b in zip(states[:-1], states[1:]))
    plateau_tol = PLATEAU_TOL_FRACTION * gap
    spread = max(t.value for t in transitions) - min(t.value for t in transitions)
    min_width = max(MIN_WIDTH_FRACTION * spread * horizon, MIN_WIDTH_PERIODS)
    matched = []
    for state in states:
        reference = tracker.bin_averages(domain.grid.tile_cell_field(state.cell_field()).ravel())
        matched.append(np.abs(final - reference) <= plateau_tol)
    widths = {state.id: float(_longest_run(mask)) for state, mask in zip(states, matched)}

    flat = np.abs(np.diff(final)) <= plateau_tol
    unknown = flat & ~np.any(matched, axis=0)[:-1]
    if _longest_run(unknown) >= min_width:
        logger.error("Flat region matching no stable state detected")
        raise UnknownPlateauError(
            f"a plateau of width {_longest_run(unknown)} periods matches no lattice state; "
            f"re-enumerate the steady states"
        )

    boundaries = {groups[g][0] for g in range(1, len(groups))}
    platforms = [pbar]
    flags: List[str] = []
    for k in range(1, len(states) - 1):
        state, width = states[k], widths[states[k].id]
        if k in boundaries:
            if width < min_width:
                logger.error(f"Plateau of {state.id} is {width:g} periods wide, below {min_width:g}")
                raise PlateauDetectionError(
                    f"plateau at {state.id} not resolved by t={horizon:g}; increase the horizon"
                )
            platforms.append(state)
        elif width >= 0.5 * min_width:
            logger.warning(f"Levels around {state.id} move together but a {width:g}-period plateau is present")
            flags.append(f"unresolved_pair:{state.id}")
    platforms.append(states[-1])
    discrepancies = plateau_discrepancies(states, levels, groups, transitions, widths, horizon)
    if any(abs(t.value) <= tol.zero_speed_tol for t in transitions):
        flags.append('zero_speed')

    observed = ObservedTerrace(
        direction=direction.components,
        platforms=tuple(platforms),
        transitions=tuple(transitions),
        level_speeds=tuple(zip(levels, estimates)),
        plateau_widths=widths,
        time=horizon,
        flags=tuple(flags),
        discrepancies=tuple(discrepancies),
    )
    logger.info(
        f"Observed terrace: platforms {observed.platform_ids}, speeds {[round(t.value, 5) for t in transitions]}"
    )
    return observed


@dataclass(frozen=True)
class TerraceMatchReport:
    size_match: bool
    platform_match: bool
    speed_gaps: Tuple[float, ...] = ()
    speed_tolerances: Tuple[float, ...] = ()
    shifts: Tuple[Optional[float], ...] = ()
    profile_distances: Tuple[Optional[float], ...] = ()
    profile_tolerance: float = 0.0

    @property
    def speeds_match(self) -> bool:
        return all(g <= t for g, t in zip(self.speed_gaps, self.speed_tolerances))

    @property
    def profiles_match(self) -> bool:
        return all(d is None or d <= self.profile_tolerance for d in self.profile_distances)

    @property
    def passed(self) -> bool:
        return self.size_match and self.platform_match and self.speeds_match and self.profiles_match

    def to_dict(self) -> Dict:
        return {
            'size_match': self.size_match,
            'platform_match': self.platform_match,
            'speed_gaps': list(self.speed_gaps),
            'speed_tolerances': list(self.speed_tolerances),
            'shifts': list(self.shifts),
            'profile_distances': list(self.profile_distances),
            'passed': self.passed,
        }

    def raise_for_failure(self) -> None:
        if not self.passed:
            raise TerraceMismatchError(f"terraces disagree: {self.to_dict()}")


def compare_terraces(first, second, tolerances: Optional[Tolerances] = None,
                     max_shift: float = 3.0) -> TerraceMatchReport:
    """
    Compare two terraces in the same direction.

    Accepts built or observed terraces. Profiles are compared when both sides
    carry them; the reported shift xi_k is the displacement of the second
    profile relative to the first, U'_k(z) ~ U_k(z - xi_k).

    Returns:
        TerraceMatchReport (call raise_for_failure to turn a mismatch into an error)
    """
    tolerances = tolerances or Tolerances()
    if tuple(first.direction) != tuple(second.direction):
        raise ConfigError(f"cannot compare terraces along {first.direction} and {second.direction}")
    size_match = first.size == second.size
    platform_match = first.platform_ids == second.platform_ids
    gaps, allowed, shifts, distances = [], [], [], []
    if size_match:
        for a, b, pa, pb in zip(first.speeds, second.speeds, first.profiles, second.profiles):
            gaps.append(abs(a.value - b.value))
            allowed.append(max(3.0 * combined_se(a, b), tolerances.speed_match_floor))
            if pa is None or pb is None:
                shifts.append(None)
                distances.append(None)
                continue
            xi, distance = pb.displacement_from(pa, around=round(pb.center - pa.center, 2), max_shift=max_shift)
            shifts.append(xi)
            distances.append(distance)
    report = TerraceMatchReport(
        size_match=size_match,
        platform_match=platform_match,
        speed_gaps=tuple(gaps),
        speed_tolerances=tuple(allowed),
        shifts=tuple(shifts),
        profile_distances=tuple(distances),
        profile_tolerance=tolerances.profile_match_tol,
    )
    if report.passed:
        logger.info(f"Terraces match: shifts {report.shifts}")
    else:
        logger.warning(f"Terraces differ: {report.to_dict()}")
    return report
