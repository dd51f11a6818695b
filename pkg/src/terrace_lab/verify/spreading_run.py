"""
Compactly supported data in 2D: measured spreading shapes and their
comparison with predicted polygons.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import directed_hausdorff
from skimage import measure

from ..config import SMOOTHING_BIN_DEGREES, logger
from ..evolve.integrator import dt_max, evolve
from ..evolve.observers import CenterProbe, TimedSnapshotRecorder
from ..exceptions import ConfigError, GeometryError, NoInvasionError
from ..problem.discretization import Domain
from ..problem.grid import Grid
from ..problem.periodic_problem import PeriodicProblem
from ..problem.schema import SpreadSettings, Tolerances
from ..spectral.steady_states import StateLattice
from ..wulff.geometry import ShapePolygon

INVASION_TOL = 1e-3
INVASION_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class MeasuredShape:
    """
    Super-level region {u >= mid-level} of one platform pair at time t,
    scaled by 1/t and smoothed to one radius per angular bin.
    """

    time: float
    upper_id: str
    lower_id: str
    angles: np.ndarray
    radii: np.ndarray
    contour: np.ndarray

    @property
    def outline(self) -> np.ndarray:
        return np.column_stack([self.radii * np.cos(self.angles), self.radii * np.sin(self.angles)])

    @property
    def area(self) -> float:
        x, y = self.outline.T
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def radius_at(self, theta: float) -> float:
        return float(np.interp(theta % (2 * np.pi), self.angles, self.radii, period=2 * np.pi))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'angle_degrees': np.degrees(self.angles), 'radius': self.radii})

    def to_dict(self) -> Dict:
        return {'t': self.time, 'q_upper_id': self.upper_id, 'q_lower_id': self.lower_id,
                'area': self.area, 'bins': int(self.angles.size)}


def _smooth_radially(points: np.ndarray, bin_degrees: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean radius per angular bin, empty bins filled periodically."""
    count = int(round(360.0 / bin_degrees))
    theta = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
    radius = np.hypot(points[:, 0], points[:, 1])
    bins = np.minimum((theta / (2 * np.pi) * count).astype(int), count - 1)
    sums = np.bincount(bins, weights=radius, minlength=count)
    counts = np.bincount(bins, minlength=count)
    centers = (np.arange(count) + 0.5) * 2 * np.pi / count
    filled = counts > 0
    radii = np.zeros(count)
    radii[filled] = sums[filled] / counts[filled]
    if not filled.all():
        radii[~filled] = np.interp(centers[~filled], centers[filled], radii[filled], period=2 * np.pi)
    return centers, radii


def _spreading_domain(settings: SpreadSettings, points_per_period: int) -> Domain:
    if settings.extent_periods <= 0:
        raise ConfigError("run.spread.extent_periods must be set for spreading runs")
    extent = int(settings.extent_periods)
    half = extent // 2
    grid = Grid(2, points_per_period, (extent, extent), origin=(-half, -half))
    return Domain(grid, clamped_axes=(0, 1))


def compact_datum(domain: Domain, cell_values: np.ndarray, radius: float) -> np.ndarray:
    """The tiled state on the disk |x| <= radius, 0 elsewhere."""
    grid = domain.grid
    x1, x2 = grid.coordinates()
    inside = np.hypot(x1, x2) <= radius
    return np.where(inside, grid.tile_cell_field(cell_values), 0.0).ravel()


def spreading_run(problem: PeriodicProblem, lattice: StateLattice, points_per_period: int,
                  settings: Optional[SpreadSettings] = None, times: Optional[Sequence[float]] = None,
                  u0: Optional[np.ndarray] = None, dt: Optional[float] = None,
                  tolerances: Optional[Tolerances] = None,
                  linear_solver: str = 'direct') -> List[MeasuredShape]:
    """
    Evolve compactly supported data and extract scaled mid-level regions.

    Args:
        problem: A 2D problem
        lattice: Stable states, pbar first
        points_per_period: Grid resolution
        settings: Datum radius, domain extent and default times
        times: Observation times (default settings.times)
        u0: Initial field; defaults to pbar on the disk of the datum radius
        dt: Step size (default dt_max)
        tolerances: Numerical thresholds
        linear_solver: Linear solver name

    Returns:
        One MeasuredShape per (time, consecutive platform pair), time-major

    Raises:
        ConfigError: Wrong dimension or missing extent
        NoInvasionError: If u(t, 0) does not settle near pbar
        BoundaryContaminationError: If the front reached the margin slab
    """
    if problem.dimension != 2:
        raise ConfigError("spreading runs need a 2D problem")
    settings = settings or SpreadSettings()
    tolerances = tolerances or Tolerances()
    times = sorted(float(t) for t in (times or settings.times))
    if not times or times[0] <= 0:
        raise ConfigError("spreading times must be positive")
    domain = _spreading_domain(settings, points_per_period)
    grid = domain.grid
    pbar = lattice.top
    if u0 is None:
        u0 = compact_datum(domain, pbar.cell_field(), settings.radius)
    u0 = np.asarray(u0, dtype=float).ravel()
    horizon = times[-1]
    if dt is None:
        dt = dt_max(problem, domain, 0.0, float(pbar.values.max()), tolerances)

    center = int(np.ravel_multi_index(tuple(s // 2 for s in grid.shape), grid.shape))
    probe = CenterProbe(center)
    recorder = TimedSnapshotRecorder(times)
    logger.info(f"Spreading run on {grid.shape[0]}x{grid.shape[1]} nodes up to t={horizon:g}")
    evolve(problem, domain, u0, horizon, observers=[probe, recorder], dt=dt,
           tolerances=tolerances, solver=linear_solver)

    target = float(grid.tile_cell_field(pbar.cell_field()).ravel()[center])
    probe_times = np.asarray(probe.times)
    tail = probe_times >= (1.0 - INVASION_FRACTION) * horizon
    gap = float(np.max(np.abs(np.asarray(probe.values)[tail] - target)))
    if gap > INVASION_TOL:
        logger.error(f"No invasion: |u - pbar| = {gap:.3e} at the centre near t={horizon:g}")
        raise NoInvasionError(f"u(t, 0) stays {gap:.3e} away from pbar; enlarge the initial datum")

    axes = [grid.axis_coordinates(a) for a in range(2)]
    shapes = []
    for requested in times:
        time, values = recorder.snapshots[requested]
        field = values.reshape(grid.shape)
        for upper, lower in zip(lattice.stable[:-1], lattice.stable[1:]):
            mid = grid.tile_cell_field(0.5 * (upper.cell_field() + lower.cell_field()))
            contours = measure.find_contours(field - mid, 0.0)
            if not contours:
                raise NoInvasionError(f"no {upper.id}/{lower.id} level set at t={time:g}")
            longest = max(contours, key=len)
            points = np.column_stack([
                axes[0][0] + longest[:, 0] * grid.dx,
                axes[1][0] + longest[:, 1] * grid.dx,
            ]) / time
            angles, radii = _smooth_radially(points, SMOOTHING_BIN_DEGREES)
            shape = MeasuredShape(time, upper.id, lower.id, angles, radii, points)
            logger.info(f"Measured {upper.id}/{lower.id} shape at t={time:g}: area {shape.area:.4f}")
            shapes.append(shape)
    return shapes


@dataclass(frozen=True)
class ShapeMatchReport:
    time: float
    epsilon: float
    inner_ratio: float
    outer_ratio: float
    hausdorff: float
    label: str = 'match'

    @property
    def inner_ok(self) -> bool:
        return self.inner_ratio >= 1.0 - self.epsilon

    @property
    def outer_ok(self) -> bool:
        return self.outer_ratio <= 1.0 + self.epsilon

    @property
    def passed(self) -> bool:
        return self.inner_ok and self.outer_ok

    def to_dict(self) -> Dict:
        return {
            't': self.time,
            'epsilon': self.epsilon,
            'inner_ratio': self.inner_ratio,
            'outer_ratio': self.outer_ratio,
            'hausdorff': self.hausdorff,
            'inner_ok': self.inner_ok,
            'outer_ok': self.outer_ok,
            'passed': self.passed,
            'kind': self.label,
        }

    def raise_for_failure(self) -> None:
        if not self.passed:
            raise GeometryError(
                f"measured shape at t={self.time:g} leaves the {self.epsilon:g} sandwich "
                f"(radial ratios {self.inner_ratio:.4f}..{self.outer_ratio:.4f})"
            )


def _ratios(measured: MeasuredShape, polygon: ShapePolygon) -> np.ndarray:
    predicted = np.array([polygon.radial_distance(theta) for theta in measured.angles])
    with np.errstate(divide='ignore'):
        return np.where(predicted > 0, measured.radii / predicted, np.inf)


def shape_match(measured: MeasuredShape, predicted: ShapePolygon, epsilon: float) -> ShapeMatchReport:
    """
    Two-sided sandwich (1 - eps) W within the measured region within (1 + eps) W.

    Both sets are star-shaped about the origin, so containment is decided by
    radial functions on the measured angular bins.
    """
    ratios = _ratios(measured, predicted)
    if predicted.is_empty or predicted.area() == 0:
        boundary = np.zeros((1, 2))
    else:
        boundary = predicted.boundary_points(0.005)
    outline = measured.outline
    hausdorff = max(directed_hausdorff(outline, boundary)[0], directed_hausdorff(boundary, outline)[0])
    report = ShapeMatchReport(measured.time, float(epsilon), float(ratios.min()), float(ratios.max()),
                              float(hausdorff))
    logger.info(
        f"Shape match at t={measured.time:g}: ratios {report.inner_ratio:.4f}..{report.outer_ratio:.4f}, "
        f"Hausdorff {report.hausdorff:.4f}"
    )
    return report


def shape_bracket(measured: MeasuredShape, lower: ShapePolygon, upper: ShapePolygon,
                  epsilon: float) -> ShapeMatchReport:
    """(1 - eps) lower within the measured region within (1 + eps) upper."""
    inner = _ratios(measured, lower)
    outer = _ratios(measured, upper)
    outline = measured.outline
    boundary = upper.boundary_points(0.005) if upper.area() else np.zeros((1, 2))
    hausdorff = directed_hausdorff(outline, boundary)[0]
    return ShapeMatchReport(measured.time, float(epsilon), float(inner.min()), float(outer.max()),
                            float(hausdorff), label='bracket')
