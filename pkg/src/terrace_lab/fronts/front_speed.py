"""
Pulsating-front speeds by level-set tracking, and profile extraction.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress

from ..config import logger
from ..evolve.integrator import Trajectory, evolve, planar_datum
from ..evolve.observers import LevelSetTracker, SnapshotRecorder
from ..exceptions import ConfigError, MultipleSpeedsError, SignViolationError, SpeedFitError
from ..problem.discretization import Domain
from ..problem.grid import Grid, LatticeDirection
from ..problem.periodic_problem import PeriodicProblem
from ..problem.reaction import ReflectedReaction
from ..problem.schema import LabConfig, Tolerances
from ..spectral.steady_states import Stability, SteadyState

MIN_FIT_SAMPLES = 4


@dataclass(frozen=True)
class FrontSettings:
    """Resolution and run-length knobs shared by every front measurement."""

    points_per_period: int = 20
    extent_periods: int = 80
    horizon: float = 60.0
    dt: Optional[float] = None
    cadence: int = 10
    datum_offset: float = 0.0
    profile_half_width: float = 10.0
    linear_solver: str = 'direct'
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_config(cls, config: LabConfig) -> 'FrontSettings':
        run = config.run
        return cls(
            points_per_period=config.grid.points_per_period,
            extent_periods=config.grid.extent_periods,
            horizon=run.horizon,
            dt=run.dt,
            cadence=run.cadence,
            datum_offset=run.datum_offset,
            profile_half_width=run.profile_half_width,
            linear_solver=run.linear_solver,
            tolerances=run.tolerances,
        )


@dataclass(frozen=True)
class SpeedEstimate:
    """Least-squares slope of a tracked position, with fit diagnostics."""

    value: float
    stderr: float
    r2: float
    drift: float
    samples: int

    @classmethod
    def fit(cls, times: np.ndarray, positions: np.ndarray) -> 'SpeedEstimate':
        """
        Fit position = c t + b.

        ``drift`` is the slope over the second half of the samples minus the
        slope over the first half; it stays near zero once the front settles.

        Raises:
            SpeedFitError: If fewer than four finite samples remain
        """
        times = np.asarray(times, dtype=float)
        positions = np.asarray(positions, dtype=float)
        keep = np.isfinite(positions)
        times, positions = times[keep], positions[keep]
        if times.size < MIN_FIT_SAMPLES:
            raise SpeedFitError(f"fit window too short: {times.size} usable samples")
        if np.ptp(positions) == 0:
            return cls(0.0, 0.0, 1.0, 0.0, int(times.size))
        result = linregress(times, positions)
        half = times.size // 2
        first = linregress(times[:half], positions[:half]).slope if half >= 2 else result.slope
        second = linregress(times[half:], positions[half:]).slope if times.size - half >= 2 else result.slope
        return cls(
            value=float(result.slope),
            stderr=float(result.stderr),
            r2=float(result.rvalue ** 2),
            drift=float(second - first),
            samples=int(times.size),
        )

    def intercept(self, times: np.ndarray, positions: np.ndarray) -> float:
        keep = np.isfinite(positions)
        return float(np.mean(np.asarray(positions)[keep] - self.value * np.asarray(times)[keep]))

    def to_dict(self) -> Dict:
        return {'c': self.value, 'se': self.stderr, 'r2': self.r2, 'drift': self.drift}


def combined_se(*estimates: SpeedEstimate) -> float:
    return float(np.sqrt(sum(e.stderr ** 2 for e in estimates)))


@dataclass(frozen=True, eq=False)
class FrontProfile:
    """
    U(x, z) sampled on (cell residue, z bin) with z = x.e - c t, so a front
    started from a shifted datum has a displaced profile. ``values`` has one
    row per residue; the z window is centred on ``center``, the intercept of
    the tracked mid-level position.
    """

    z: np.ndarray
    values: np.ndarray
    center: float
    periodicity_defect: float
    monotonicity_defect: float
    resampling_bound: float
    upper_limit_error: float
    lower_limit_error: float

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.interp(z, self.z, self.mean)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'z': self.z,
            'U': self.mean,
            'U_min': self.values.min(axis=0),
            'U_max': self.values.max(axis=0),
        })

    def displacement_from(self, reference, around: float = 0.0, max_shift: float = 3.0,
                          step: float = 0.01) -> Tuple[float, float]:
        """
        Best xi with U(z) ~ reference(z - xi), searched in around +- max_shift.

        Args:
            reference: Callable profile of z
            around: Centre of the search
            max_shift: Search half-width
            step: Search resolution

        Returns:
            Tuple (xi, L-infinity distance on the inner window)
        """
        half_width = 0.5 * (self.z[-1] - self.z[0])
        inner = np.abs(self.z - self.center) <= half_width - max_shift
        count = int(round(max_shift / step))
        best = (float(around), float('inf'))
        for k in range(-count, count + 1):
            xi = around + k * step
            distance = float(np.max(np.abs(self.mean[inner] - reference(self.z[inner] - xi))))
            if distance < best[1]:
                best = (float(xi), distance)
        return best


@dataclass(frozen=True, eq=False)
class FrontRecord:
    direction: Tuple[int, ...]
    upper: SteadyState
    lower: SteadyState
    speed: SpeedEstimate
    fit_window: Tuple[float, float]
    profile: Optional[FrontProfile] = None
    level_speeds: Tuple[Tuple[float, SpeedEstimate], ...] = ()
    flags: Tuple[str, ...] = ()

    @property
    def c(self) -> float:
        return self.speed.value

    def to_dict(self) -> Dict:
        return {
            'e': list(self.direction),
            'q_upper_id': self.upper.id,
            'q_lower_id': self.lower.id,
            'c': self.speed.value,
            'se': self.speed.stderr,
            'r2': self.speed.r2,
            'drift': self.speed.drift,
            'fit_window': list(self.fit_window),
            'flags': list(self.flags),
        }


def directional_domain(problem: PeriodicProblem, direction: LatticeDirection,
                       points_per_period: int, extent_periods: int) -> Domain:
    """
    Domain for a front moving along a lattice direction.

    1D: a segment clamped at both ends. 2D with e = (p, q), p != 0: a strip
    clamped along x1, |p| periods wide along x2, whose x2-wrap shifts x1 by
    q sign(p) periods, so (x1, x2) and (x1 + q sign(p), x2 - |p|) coincide and
    x.e is preserved. For p = 0 the strip is clamped along x2 instead.
    """
    if direction.dimension != problem.dimension:
        raise ConfigError(f"direction {direction.components} does not match dimension {problem.dimension}")
    half = extent_periods // 2
    n = points_per_period
    if problem.dimension == 1:
        return Domain(Grid(1, n, (extent_periods,), origin=(-half,)), clamped_axes=(0,))
    p, q = direction.components
    if p == 0:
        return Domain(Grid(2, n, (1, extent_periods), origin=(0, -half)), clamped_axes=(1,))
    sign = 1 if p > 0 else -1
    return Domain(Grid(2, n, (extent_periods, abs(p)), origin=(-half, 0)),
                  clamped_axes=(0,), twist=q * sign)


def extract_profile(trajectory: Trajectory, c: float, direction: LatticeDirection,
                    limits: Tuple[float, float], center: float = 0.0,
                    half_width: float = 10.0, tolerances: Optional[Tolerances] = None) -> FrontProfile:
    """
    Resample recorded fields at z = x.e - c t on a window around ``center``.

    Args:
        trajectory: Run whose observers include a SnapshotRecorder
        c: Front speed
        direction: Propagation direction
        limits: Cell averages of the upper and lower states
        center: Intercept of the tracked position (window centre)
        half_width: z-window half-width
        tolerances: Numerical thresholds

    Returns:
        FrontProfile with its defects

    Raises:
        ConfigError: If |c| is within zero_speed_tol
        SpeedFitError: If fewer than two snapshots were recorded
    """
    tolerances = tolerances or Tolerances()
    if abs(c) <= tolerances.zero_speed_tol:
        raise ConfigError(f"profile extraction needs a nonzero speed, got c={c:.3e}")
    recorders = [o for o in trajectory.observers if isinstance(o, SnapshotRecorder)]
    if not recorders or len(recorders[0].snapshots) < 2:
        raise SpeedFitError("window too short for profile extraction")
    recorder = recorders[0]
    domain = trajectory.final.domain
    grid = domain.grid
    free = ~domain.fixed_mask()
    s = sum(e * x for e, x in zip(direction.unit, grid.coordinates())).ravel()[free]
    residue = np.ravel_multi_index(
        np.meshgrid(*grid.residues(), indexing='ij'), (grid.points_per_period,) * grid.dimension
    ).ravel()[free]
    n_res = grid.points_per_period ** grid.dimension
    dz = grid.dx
    n_z = int(round(2 * half_width / dz)) + 1
    start = round(center / dz) * dz - half_width
    z_axis = start + dz * np.arange(n_z)

    sums = np.zeros(n_res * n_z)
    counts = np.zeros(n_res * n_z)
    highs = np.full(n_res * n_z, -np.inf)
    lows = np.full(n_res * n_z, np.inf)
    for time, snapshot in zip(recorder.times, recorder.snapshots):
        position = (s - c * time - start) / dz
        inside = (position > -0.5) & (position < n_z - 0.5)
        bins = np.clip(np.rint(position[inside]).astype(int), 0, n_z - 1)
        flat = residue[inside] * n_z + bins
        samples = snapshot[free][inside]
        sums += np.bincount(flat, weights=samples, minlength=sums.size)
        counts += np.bincount(flat, minlength=counts.size)
        np.maximum.at(highs, flat, samples)
        np.minimum.at(lows, flat, samples)

    values = np.full(n_res * n_z, np.nan)
    filled = counts > 0
    values[filled] = sums[filled] / counts[filled]
    values = values.reshape(n_res, n_z)
    for row in values:
        ok = np.isfinite(row)
        if not ok.any():
            raise SpeedFitError("profile window has an empty cell residue")
        row[~ok] = np.interp(z_axis[~ok], z_axis[ok], row[ok])

    mean = values.mean(axis=0)
    upper_mean, lower_mean = limits
    profile = FrontProfile(
        z=z_axis,
        values=values,
        center=float(center),
        # spread of samples sharing a residue and a z bin, across periods and times
        periodicity_defect=float(np.max(highs[filled] - lows[filled])),
        monotonicity_defect=float(max(0.0, np.max(np.diff(values, axis=1)))),
        resampling_bound=float(np.max(np.abs(np.diff(mean)))),
        upper_limit_error=float(abs(mean[0] - upper_mean)),
        lower_limit_error=float(abs(mean[-1] - lower_mean)),
    )
    logger.debug(
        f"Profile defects: periodicity {profile.periodicity_defect:.3e}, "
        f"monotonicity {profile.monotonicity_defect:.3e}"
    )
    return profile


def _level_between(a: SteadyState, b: SteadyState) -> float:
    return 0.5 * (a.mean + b.mean)


def bistable_speed(problem: PeriodicProblem, direction: LatticeDirection,
                   q_upper: SteadyState, q_lower: SteadyState,
                   settings: Optional[FrontSettings] = None,
                   intermediate: Sequence[SteadyState] = (),
                   require_stable: bool = True, extract: bool = True) -> FrontRecord:
    """
    Measure the speed of the front connecting q_upper (behind) to q_lower (ahead).

    The datum is q_upper on {x.e <= offset} and q_lower elsewhere. The mid-level
    crossing is fitted over [T/2, T]. When intermediate states are given, the
    levels halfway to each of them are tracked too and distinct slopes signal
    a split front.

    Args:
        problem: Equation data
        direction: Lattice direction e
        q_upper: Upper state
        q_lower: Lower state, strictly below q_upper
        settings: Resolution and run settings
        intermediate: Stable states strictly between the two
        require_stable: Reject unstable endpoints
        extract: Also extract the profile

    Returns:
        FrontRecord

    Raises:
        ConfigError: On unordered or unstable endpoints
        MultipleSpeedsError: If level sets separate
        SpeedFitError: If R^2 or the standard error fail their thresholds
    """
    settings = settings or FrontSettings()
    tol = settings.tolerances
    if require_stable and not (q_upper.stability == Stability.STABLE and q_lower.stability == Stability.STABLE):
        raise ConfigError(f"front endpoints {q_upper.id}, {q_lower.id} must both be stable")
    if not np.all(q_upper.values > q_lower.values):
        raise ConfigError(f"{q_lower.id} must lie strictly below {q_upper.id}")

    domain = directional_domain(problem, direction, settings.points_per_period, settings.extent_periods)
    unit = direction.unit
    u0 = planar_datum(domain, q_upper.cell_field(), q_lower.cell_field(), unit, settings.datum_offset)
    horizon = settings.horizon
    window = (0.5 * horizon, horizon)

    chain = [q_upper] + sorted(intermediate, key=lambda s: -s.mean) + [q_lower]
    main_level = _level_between(q_upper, q_lower)
    split_levels = [_level_between(a, b) for a, b in zip(chain[:-1], chain[1:])] if intermediate else []

    tracker = LevelSetTracker(domain, unit, settings.cadence, start_time=window[0])
    observers = [tracker]
    if extract:
        observers.append(SnapshotRecorder(settings.cadence * 5, start_time=window[0]))
    logger.info(f"Measuring front {q_upper.id} -> {q_lower.id} along e={direction.label()}")
    trajectory = evolve(problem, domain, u0, horizon, observers, dt=settings.dt,
                        tolerances=tol, solver=settings.linear_solver)

    times, positions = tracker.positions(main_level, since=window[0])
    speed = SpeedEstimate.fit(times, positions)
    flags: List[str] = []

    level_speeds = []
    if split_levels:
        estimates = [SpeedEstimate.fit(*tracker.positions(level, since=window[0])) for level in split_levels]
        level_speeds = list(zip(split_levels, estimates))
        fastest = max(estimates, key=lambda e: e.value)
        slowest = min(estimates, key=lambda e: e.value)
        threshold = max(3.0 * combined_se(fastest, slowest), tol.split_floor)
        if fastest.value - slowest.value > threshold:
            logger.warning(
                f"Front {q_upper.id} -> {q_lower.id} splits: level speeds "
                f"{[round(e.value, 5) for e in estimates]}"
            )
            raise MultipleSpeedsError(
                f"level sets between {q_upper.id} and {q_lower.id} move at distinct speeds",
                speeds=[e.value for e in estimates],
            )

    zero_speed = abs(speed.value) <= tol.zero_speed_tol
    if speed.stderr > tol.speed_se_max:
        raise SpeedFitError(f"speed standard error {speed.stderr:.3e} exceeds {tol.speed_se_max:g}")
    if not zero_speed and speed.r2 < tol.r2_min:
        raise SpeedFitError(f"position regression R^2={speed.r2:.5f} below {tol.r2_min}")

    profile = None
    if zero_speed:
        flags.append('zero_speed')
    elif extract:
        profile = extract_profile(
            trajectory, speed.value, direction, (q_upper.mean, q_lower.mean),
            center=speed.intercept(times, positions),
            half_width=settings.profile_half_width, tolerances=tol,
        )
        if profile.monotonicity_defect > tol.monotone_tol:
            flags.append('profile_not_monotone')
        if max(profile.upper_limit_error, profile.lower_limit_error) > tol.prof_tol:
            flags.append('profile_limits')

    logger.info(f"Front {q_upper.id} -> {q_lower.id}: c={speed.value:.6f} (se {speed.stderr:.1e})")
    return FrontRecord(
        direction=direction.components,
        upper=q_upper,
        lower=q_lower,
        speed=speed,
        fit_window=window,
        profile=profile,
        level_speeds=tuple(level_speeds),
        flags=tuple(flags),
    )


def reflect_state(state: SteadyState, pbar: SteadyState) -> SteadyState:
    """The state pbar - q of the reflected problem (same stability)."""
    return SteadyState(
        values=pbar.values - state.values,
        eigenvalue=state.eigenvalue,
        eigenfunction=state.eigenfunction,
        stability=state.stability,
        residual=state.residual,
        dimension=state.dimension,
        points_per_period=state.points_per_period,
        id=f"{state.id}*",
        flags=state.flags,
    )


@dataclass(frozen=True)
class CounterPropagationReport:
    unstable_id: str
    invading_speed: float
    receding_speed: float
    direct_receding_speed: Optional[float]
    symmetry_defect: Optional[float]
    symmetry_tolerance: Optional[float]

    @property
    def signs_ok(self) -> bool:
        return self.invading_speed > 0 and self.receding_speed < 0

    @property
    def symmetric(self) -> bool:
        return self.symmetry_defect is None or self.symmetry_defect <= self.symmetry_tolerance

    def to_dict(self) -> Dict:
        return {
            'unstable_id': self.unstable_id,
            'c_from_above': self.invading_speed,
            'c_from_below': self.receding_speed,
            'c_from_below_direct': self.direct_receding_speed,
            'symmetry_defect': self.symmetry_defect,
            'signs_ok': self.signs_ok,
            'symmetric': self.symmetric,
        }


def counter_propagation_check(problem: PeriodicProblem, unstable: SteadyState,
                              above: SteadyState, below: SteadyState, pbar: SteadyState,
                              direction: LatticeDirection,
                              settings: Optional[FrontSettings] = None,
                              check_symmetry: bool = True) -> CounterPropagationReport:
    """
    Check that the stable neighbours of an unstable state both invade it.

    The front from ``above`` into ``unstable`` must move forward. The front out
    of ``unstable`` over ``below`` is measured on the reflected problem
    v = pbar - u along -e, where it becomes an invasion; its speed flips sign.
    With ``check_symmetry`` the same front is also measured directly.

    Raises:
        SignViolationError: If a speed has the wrong sign beyond zero_speed_tol
    """
    settings = settings or FrontSettings()
    tol = settings.tolerances
    if unstable.stability != Stability.UNSTABLE:
        raise ConfigError(f"state {unstable.id} is not unstable")
    invading = bistable_speed(problem, direction, above, unstable, settings,
                              require_stable=False, extract=False).c

    reflected = problem.with_reaction(
        ReflectedReaction(problem.reaction, pbar.values, pbar.points_per_period)
    )
    mirrored = bistable_speed(reflected, -direction, reflect_state(below, pbar), reflect_state(unstable, pbar),
                              settings, require_stable=False, extract=False)
    receding = -mirrored.c

    direct, defect, tolerance = None, None, None
    if check_symmetry:
        record = bistable_speed(problem, direction, unstable, below, settings,
                                require_stable=False, extract=False)
        direct = record.c
        defect = abs(direct - receding)
        tolerance = max(0.01 * abs(direct), 3.0 * combined_se(record.speed, mirrored.speed))

    report = CounterPropagationReport(unstable.id, invading, receding, direct, defect, tolerance)
    logger.info(f"Counter-propagation around {unstable.id}: {report.to_dict()}")
    if invading < -tol.zero_speed_tol or receding > tol.zero_speed_tol:
        logger.error(f"Sign violation around {unstable.id}: {invading:.4g}, {receding:.4g}")
        raise SignViolationError(
            f"fronts around unstable state {unstable.id} have speeds {invading:.4g} (must be > 0) "
            f"and {receding:.4g} (must be < 0)"
        )
    return report
