"""
Spreading-shape construction from terrace speeds: c[p], the positive-speed
shapes of each state and their cumulative convex hulls.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from ..config import logger
from ..exceptions import ConfigError, GeometryError, NumericalDiagnosticError
from ..fronts.front_speed import FrontRecord, combined_se
from ..problem.grid import LatticeDirection
from ..problem.schema import Tolerances
from ..spectral.steady_states import StateLattice, SteadyState
from .geometry import (
    ShapePolygon,
    SpeedField,
    SpeedSample,
    convex_hull,
    freidlin_gartner,
    supporting_hyperplane_test,
    wulff_shape,
)

UNION_SAMPLES = 24
UNION_SLACK = 1e-6


@dataclass(frozen=True)
class UpsilonShape:
    """The shape of a state: W of its uppermost speeds when all are positive, else {0}."""

    shape: ShapePolygon
    status: str

    @property
    def indeterminate(self) -> bool:
        return self.status == 'indeterminate'


def upsilon(field: SpeedField, tolerances: Optional[Tolerances] = None) -> UpsilonShape:
    """
    Args:
        field: Speeds of the uppermost front of the terrace from a state to 0

    Returns:
        UpsilonShape with status 'positive', 'nonpositive' or 'indeterminate'
        (some speed within zero_speed_tol of 0; the shape is then {0})
    """
    tolerances = tolerances or Tolerances()
    zero = tolerances.zero_speed_tol
    speeds = field.speeds()
    if np.all(speeds > zero):
        return UpsilonShape(wulff_shape(field, tolerances.geom_tol), 'positive')
    origin = (0, 0) if field.exact else (0.0, 0.0)
    if np.any(np.abs(speeds) <= zero):
        logger.warning("Speeds within zero_speed_tol of 0: positivity is indeterminate")
        return UpsilonShape(ShapePolygon.point(origin), 'indeterminate')
    return UpsilonShape(ShapePolygon.point(origin), 'nonpositive')


def _halfplanes(shape: ShapePolygon) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit outward normals and offsets of the edges of ``shape``, so that a
    point y belongs to it when normals @ y <= offsets. Points and segments
    get caps along both axes of the segment.
    """
    pts = shape.as_array()
    if len(pts) == 1:
        normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        return normals, normals @ pts[0]
    if len(pts) == 2:
        along = (pts[1] - pts[0]) / np.linalg.norm(pts[1] - pts[0])
        across = np.array([along[1], -along[0]])
        normals = np.array([across, -across, along, -along])
        return normals, np.array([across @ pts[0], -across @ pts[0], along @ pts[1], -along @ pts[0]])
    edges = np.roll(pts, -1, axis=0) - pts
    normals = np.column_stack([edges[:, 1], -edges[:, 0]]) / np.linalg.norm(edges, axis=1)[:, None]
    return normals, np.einsum('ij,ij->i', normals, pts)


def union_slack(point: Sequence[float], previous: ShapePolygon, shape: ShapePolygon) -> Tuple[float, float]:
    """
    Distance-like violation of point in kappa * previous + (1 - kappa) * shape,
    minimised over kappa in [0, 1].

    Solves a small linear program in (a, b, kappa, s): point = a + b with
    a in kappa * previous and b in (1 - kappa) * shape, each edge constraint
    relaxed by s.

    Returns:
        (s, kappa) at the optimum

    Raises:
        GeometryError: If the linear program fails
    """
    na, ha = _halfplanes(previous)
    nb, hb = _halfplanes(shape)
    rows_a = np.hstack([na, np.zeros((len(na), 2)), -ha[:, None], -np.ones((len(na), 1))])
    rows_b = np.hstack([np.zeros((len(nb), 2)), nb, hb[:, None], -np.ones((len(nb), 1))])
    result = linprog(
        c=[0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        A_ub=np.vstack([rows_a, rows_b]),
        b_ub=np.concatenate([np.zeros(len(na)), hb]),
        A_eq=np.hstack([np.eye(2), np.eye(2), np.zeros((2, 2))]),
        b_eq=np.asarray(point, dtype=float),
        bounds=[(None, None)] * 4 + [(0.0, 1.0), (0.0, None)],
        method='highs',
    )
    if not result.success:
        raise GeometryError(f"union membership program failed at {tuple(point)}: {result.message}")
    return float(result.x[5]), float(result.x[4])


def spreading_shape_recursion(upsilons: Sequence[ShapePolygon],
                              tolerances: Optional[Tolerances] = None) -> List[ShapePolygon]:
    """
    Lower spreading shapes for totally ordered states p_0 > ... > p_M.

    The k-th shape is the convex hull of the shapes of p_0..p_k. Every
    boundary sample of that hull must also lie in kappa W_(k-1) + (1 - kappa) Y_k
    for some kappa in [0, 1], with W_(k-1) the previous hull and Y_k the raw
    shape of p_k, read through its edges.

    Raises:
        GeometryError: If a boundary sample lies in none of the combinations
    """
    tolerances = tolerances or Tolerances()
    hulls: List[ShapePolygon] = []
    for k, shape in enumerate(upsilons):
        points = [v for s in upsilons[:k + 1] for v in s.vertices]
        hulls.append(convex_hull(points, tolerances.geom_tol))
        if k == 0:
            continue
        outline = hulls[k].as_array()
        scale = max(1.0, float(np.abs(outline).max()))
        diameter = float(np.ptp(outline, axis=0).max())
        allowed = max(tolerances.geom_tol, UNION_SLACK * scale)
        for sample in hulls[k].boundary_points(max(diameter / UNION_SAMPLES, tolerances.geom_tol)):
            slack, kappa = union_slack(sample, hulls[k - 1], shape)
            if slack > allowed:
                logger.error(f"Hull point {sample.tolist()} of shape {k} is off every combination "
                             f"(closest kappa {kappa:.4g}, violation {slack:.3g})")
                raise GeometryError(
                    f"lower spreading shape {k} is not the union of its convex combinations; "
                    f"is the shape of state {k} convex?"
                )
    return hulls


def _direction_sample(components: Sequence[int], front: FrontRecord) -> SpeedSample:
    direction = LatticeDirection(tuple(components))
    unit = tuple(float(v) for v in direction.unit)
    return SpeedSample(unit, float(front.c), float(front.speed.stderr))


def _front_across(terrace, state: SteadyState, tol: float) -> FrontRecord:
    """The front whose lower platform lies below ``state`` and whose upper platform exceeds it somewhere."""
    for front in terrace.fronts:
        if np.all(front.lower.values <= state.values + tol) and np.any(front.upper.values > state.values + tol):
            return front
    raise ConfigError(f"no front of the terrace along {terrace.direction} crosses state {state.id}")


def c_of_p(terraces: Mapping[Tuple[int, ...], object], state: SteadyState,
           tolerances: Optional[Tolerances] = None) -> SpeedField:
    """
    c[p](e): for each direction, the speed of the terrace front crossing the level p.

    Args:
        terraces: Terrace per direction (components tuple)
        state: Stable lattice state p

    Returns:
        SpeedField of measured speeds

    Raises:
        ConfigError: If some terrace has no front across p
    """
    tolerances = tolerances or Tolerances()
    samples = []
    for components, terrace in terraces.items():
        front = _front_across(terrace, state, tolerances.dedup_tol)
        if abs(front.c) <= tolerances.zero_speed_tol:
            logger.warning(f"c[{state.id}] along {components} is within zero_speed_tol; flagged indeterminate")
        samples.append(_direction_sample(components, front))
    return SpeedField(tuple(samples), 'measured')


def uppermost_speeds(terraces: Mapping[Tuple[int, ...], object]) -> SpeedField:
    """c_1(e), the speed of the first front of each terrace."""
    samples = [_direction_sample(components, terrace.fronts[0]) for components, terrace in terraces.items()]
    return SpeedField(tuple(samples), 'measured')


@dataclass(frozen=True)
class ConsistencyCheck:
    direction: Tuple[int, ...]
    state_id: str
    kind: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict:
        return {
            'e': list(self.direction), 'state': self.state_id, 'kind': self.kind,
            'lhs': self.lhs, 'rhs': self.rhs, 'tolerance': self.tolerance, 'passed': self.passed,
        }


@dataclass(frozen=True)
class SpeedConsistencyReport:
    checks: Tuple[ConsistencyCheck, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[ConsistencyCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict:
        return {'passed': self.passed, 'checks': [c.to_dict() for c in self.checks]}

    def raise_for_failure(self) -> None:
        if not self.passed:
            worst = self.failures[0]
            raise NumericalDiagnosticError(
                f"speed consistency '{worst.kind}' fails at state {worst.state_id} along {worst.direction}: "
                f"{worst.lhs:.5f} vs {worst.rhs:.5f}"
            )


def speed_consistency_check(lattice: StateLattice, terraces_by_state: Mapping[str, Mapping[Tuple[int, ...], object]],
                            tolerances: Optional[Tolerances] = None) -> SpeedConsistencyReport:
    """
    Cross-check c[p_k](e) against the sub-problem terraces.

    ``terraces_by_state[p.id]`` holds the terraces from p down to 0, one per
    direction; the entry of p_0 is the full problem. Checked per direction:
    c[p_k] is nondecreasing in k; below a platform p_k, c[p_(k+1)] equals c_1
    of the p_k terrace; when p_k is not a platform, c[p_(k+1)] equals c[p_k]
    and c_1 of the p_k terrace does not exceed it.
    """
    tolerances = tolerances or Tolerances()
    states = list(lattice.stable)
    full = terraces_by_state[states[0].id]
    checks: List[ConsistencyCheck] = []

    def add(direction, state_id, kind, lhs: FrontRecord, rhs: FrontRecord, relation):
        tol = max(3.0 * combined_se(lhs.speed, rhs.speed), tolerances.speed_match_floor)
        ok = relation(lhs.c, rhs.c, tol)
        checks.append(ConsistencyCheck(tuple(direction), state_id, kind, lhs.c, rhs.c, tol, bool(ok)))

    def at_most(a, b, tol):
        return a <= b + tol

    def equal(a, b, tol):
        return abs(a - b) <= tol

    for direction, terrace in full.items():
        crossing = {s.id: _front_across(terrace, s, tolerances.dedup_tol) for s in states[1:]}
        platform_ids = {p.id for p in terrace.platforms}
        for k in range(1, len(states)):
            state = states[k]
            if k + 1 < len(states):
                add(direction, state.id, 'monotone', crossing[state.id], crossing[states[k + 1].id], at_most)
            sub = terraces_by_state.get(state.id, {}).get(direction)
            if sub is None or not sub.fronts:
                continue
            uppermost = sub.fronts[0]
            if state.id not in platform_ids:
                add(direction, state.id, 'uppermost_below_c_of_p', uppermost, crossing[state.id], at_most)
            if k + 1 < len(states):
                below = crossing[states[k + 1].id]
                if state.id in platform_ids:
                    add(direction, state.id, 'platform_identity', below, uppermost, equal)
                else:
                    add(direction, state.id, 'skipped_identity', below, crossing[state.id], equal)

    report = SpeedConsistencyReport(tuple(checks))
    if not report.passed:
        for failure in report.failures:
            logger.error(f"Consistency failure: {failure.to_dict()}")
    return report


def corner_demo_field() -> SpeedField:
    """
    Unit speed along +-e1 and +-e2, speed 2 along (3/5, 4/5), in exact arithmetic.

    The (3/5, 4/5) half-plane is inactive: the shape is the square [-1, 1]^2.
    """
    one = Fraction(1)
    samples = (
        SpeedSample((one, Fraction(0)), one),
        SpeedSample((Fraction(3, 5), Fraction(4, 5)), Fraction(2)),
        SpeedSample((Fraction(0), one), one),
        SpeedSample((-one, Fraction(0)), one),
        SpeedSample((Fraction(0), -one), one),
    )
    return SpeedField(samples, 'synthetic')


CORNER_DIRECTION = (Fraction(3, 5), Fraction(4, 5))


@dataclass(frozen=True)
class CornerDemoReport:
    shape: ShapePolygon
    support: Fraction
    requested_speed: Fraction
    touches: bool
    corner: Tuple[Fraction, Fraction]
    corner_angle: float
    freidlin_gartner: Fraction

    @property
    def non_smooth(self) -> bool:
        return self.corner_angle < math.pi

    def to_dict(self) -> Dict:
        return {
            'vertices': [[str(x), str(y)] for x, y in self.shape.vertices],
            'direction': [str(c) for c in CORNER_DIRECTION],
            'support': str(self.support),
            'requested_speed': str(self.requested_speed),
            'supporting_hyperplane': self.touches,
            'corner': [str(c) for c in self.corner],
            'corner_angle': self.corner_angle,
            'freidlin_gartner': str(self.freidlin_gartner),
        }


def corner_demo(tolerances: Optional[Tolerances] = None) -> CornerDemoReport:
    """Wulff shape of the corner field, its failed supporting line and its corner at (1, 1)."""
    tolerances = tolerances or Tolerances()
    field_ = corner_demo_field()
    shape = wulff_shape(field_)
    support = shape.support(CORNER_DIRECTION)
    requested = Fraction(2)
    touches = supporting_hyperplane_test(shape, CORNER_DIRECTION, requested, 0.0)
    best = max(range(len(shape.vertices)), key=lambda i: (shape.vertices[i][0] * CORNER_DIRECTION[0]
                                                          + shape.vertices[i][1] * CORNER_DIRECTION[1]))
    angle = shape.vertex_angles()[best]
    if angle >= math.pi - tolerances.angle_tol:
        raise GeometryError("corner field produced a flat vertex")
    value, _ = freidlin_gartner(field_, CORNER_DIRECTION)
    logger.info(f"Corner demo: support {support} < {requested}, angle {angle:.6f} at {shape.vertices[best]}")
    return CornerDemoReport(shape, support, requested, touches, shape.vertices[best], angle, value)
