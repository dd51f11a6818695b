"""
Planar convex geometry on direction-indexed speed fields.

Works in exact rational arithmetic whenever every input is a Fraction, and in
floating point with a tolerance otherwise.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import directed_hausdorff

from ..config import GEOM_TOL, logger
from ..exceptions import ConfigError, GeometryError

Number = Union[float, Fraction]
Point = Tuple[Number, Number]

PROVENANCES = ('measured', 'synthetic')


def _is_exact(values: Iterable) -> bool:
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)


def _cross(o: Point, a: Point, b: Point) -> Number:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _dot(a: Sequence[Number], b: Sequence[Number]) -> Number:
    return a[0] * b[0] + a[1] * b[1]


@dataclass(frozen=True)
class SpeedSample:
    direction: Tuple[Number, Number]
    speed: Number
    se: float = 0.0

    @property
    def angle(self) -> float:
        """Polar angle in degrees, in [0, 360)."""
        return math.degrees(math.atan2(float(self.direction[1]), float(self.direction[0]))) % 360.0


@dataclass(frozen=True)
class SpeedField:
    """
    Sampled speeds c(e) on unit directions of the plane.

    Samples are kept sorted by polar angle.
    """

    samples: Tuple[SpeedSample, ...]
    provenance: str = 'measured'

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        ordered = tuple(sorted(self.samples, key=lambda s: s.angle))
        for sample in ordered:
            norm = math.hypot(float(sample.direction[0]), float(sample.direction[1]))
            if abs(norm - 1.0) > 1e-9:
                raise ConfigError(f"direction {sample.direction} is not a unit vector")
            if not math.isfinite(float(sample.speed)):
                raise ConfigError(f"speed at {sample.angle:.3f} deg is not finite")
        angles = [s.angle for s in ordered]
        if any(b - a < 1e-9 for a, b in zip(angles[:-1], angles[1:])):
            raise ConfigError("speed field directions must be distinct")
        object.__setattr__(self, 'samples', ordered)

    @classmethod
    def from_angles(cls, angles_degrees: Sequence[float], speeds: Sequence[float],
                    se: Optional[Sequence[float]] = None, provenance: str = 'measured') -> 'SpeedField':
        se = se if se is not None else [0.0] * len(speeds)
        samples = []
        for angle, speed, err in zip(angles_degrees, speeds, se):
            theta = math.radians(float(angle))
            samples.append(SpeedSample((math.cos(theta), math.sin(theta)), float(speed), float(err)))
        return cls(tuple(samples), provenance)

    @classmethod
    def constant(cls, value: float, count: int) -> 'SpeedField':
        """c = value on ``count`` equally spaced directions."""
        return cls.from_angles([360.0 * k / count for k in range(count)], [value] * count,
                               provenance='synthetic')

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, provenance: str = 'measured') -> 'SpeedField':
        """Build from a frame with columns angle_degrees, speed and optionally se."""
        missing = {'angle_degrees', 'speed'} - set(frame.columns)
        if missing:
            raise ConfigError(f"speed-field table is missing columns {sorted(missing)}")
        se = frame['se'].tolist() if 'se' in frame.columns else None
        return cls.from_angles(frame['angle_degrees'].tolist(), frame['speed'].tolist(), se, provenance)

    @property
    def exact(self) -> bool:
        return _is_exact(v for s in self.samples for v in (*s.direction, s.speed))

    @property
    def size(self) -> int:
        return len(self.samples)

    def speeds(self) -> np.ndarray:
        return np.array([float(s.speed) for s in self.samples])

    def scaled(self, factor: Number) -> 'SpeedField':
        return SpeedField(
            tuple(SpeedSample(s.direction, s.speed * factor, s.se * abs(float(factor))) for s in self.samples),
            self.provenance,
        )

    def subsample(self, step: int = 2) -> 'SpeedField':
        return SpeedField(self.samples[::step], self.provenance)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'angle_degrees': [s.angle for s in self.samples],
            'speed': [float(s.speed) for s in self.samples],
            'se': [float(s.se) for s in self.samples],
        })

    def max_gap(self) -> float:
        """Largest angular gap between consecutive directions, in radians."""
        angles = sorted(math.radians(s.angle) for s in self.samples)
        gaps = [b - a for a, b in zip(angles[:-1], angles[1:])]
        gaps.append(2 * math.pi - angles[-1] + angles[0])
        return max(gaps)


@dataclass(frozen=True)
class ShapePolygon:
    """
    Convex polygon with counterclockwise vertices, starting from the lowest
    (then leftmost) vertex. No vertices means empty; one vertex is a point.
    """

    vertices: Tuple[Point, ...]

    @classmethod
    def point(cls, at: Point = (0.0, 0.0)) -> 'ShapePolygon':
        return cls((at,))

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    @property
    def exact(self) -> bool:
        return _is_exact(v for p in self.vertices for v in p)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x), float(y)] for x, y in self.vertices]).reshape(-1, 2)

    def support(self, direction: Sequence[Number]) -> Number:
        """max over the shape of x.e."""
        if self.is_empty:
            raise GeometryError("support of an empty shape")
        return max(_dot(v, direction) for v in self.vertices)

    def area(self) -> Number:
        if len(self.vertices) < 3:
            return 0
        total = 0
        for a, b in zip(self.vertices, self.vertices[1:] + self.vertices[:1]):
            total += a[0] * b[1] - a[1] * b[0]
        return total / 2

    @property
    def contains_origin(self) -> bool:
        """True when the origin is strictly interior."""
        if len(self.vertices) < 3:
            return False
        origin = (0, 0)
        edges = zip(self.vertices, self.vertices[1:] + self.vertices[:1])
        return all(_cross(a, b, origin) > 0 for a, b in edges)

    def contains(self, point: Point, tol: float = GEOM_TOL) -> bool:
        if self.is_empty:
            return False
        if len(self.vertices) == 1:
            return math.dist(self.as_array()[0], [float(point[0]), float(point[1])]) <= tol
        edges = zip(self.vertices, self.vertices[1:] + self.vertices[:1])
        for a, b in edges:
            length = math.hypot(float(b[0] - a[0]), float(b[1] - a[1]))
            if float(_cross(a, b, point)) < -tol * length:
                return False
        return True

    def scaled(self, factor: Number) -> 'ShapePolygon':
        if factor == 0:
            return ShapePolygon.point((0, 0))
        if factor < 0:
            raise GeometryError("shapes are only scaled by nonnegative factors")
        return ShapePolygon(tuple((x * factor, y * factor) for x, y in self.vertices))

    def vertex_angles(self) -> List[float]:
        """Interior angle at every vertex, in radians."""
        pts = self.as_array()
        count = len(pts)
        angles = []
        for i in range(count):
            prev_vec = pts[i - 1] - pts[i]
            next_vec = pts[(i + 1) % count] - pts[i]
            cosine = np.dot(prev_vec, next_vec) / (np.linalg.norm(prev_vec) * np.linalg.norm(next_vec))
            angles.append(float(np.arccos(np.clip(cosine, -1.0, 1.0))))
        return angles

    def boundary_points(self, spacing: float = 0.01) -> np.ndarray:
        """Points along the boundary no farther apart than ``spacing``."""
        pts = self.as_array()
        if len(pts) <= 1:
            return pts
        out = []
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            count = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
            t = np.arange(count)[:, None] / count
            out.append(a + t * (b - a))
        return np.vstack(out)

    def boundary_distance(self, point: Sequence[float]) -> float:
        """Euclidean distance from a point to the boundary."""
        pts = self.as_array()
        p = np.asarray(point, dtype=float)
        if len(pts) == 1:
            return float(np.linalg.norm(p - pts[0]))
        best = float('inf')
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            edge = b - a
            t = np.clip(np.dot(p - a, edge) / np.dot(edge, edge), 0.0, 1.0)
            best = min(best, float(np.linalg.norm(p - (a + t * edge))))
        return best

    def radial_distance(self, theta: float) -> float:
        """Distance from the origin to the boundary along angle theta (origin inside)."""
        ray = np.array([math.cos(theta), math.sin(theta)])
        pts = self.as_array()
        best = float('inf')
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            edge = b - a
            denom = ray[0] * edge[1] - ray[1] * edge[0]
            if abs(denom) < 1e-15:
                continue
            r = (a[0] * edge[1] - a[1] * edge[0]) / denom
            s = (a[0] * ray[1] - a[1] * ray[0]) / denom
            if r >= 0 and -1e-12 <= s <= 1 + 1e-12:
                best = min(best, float(r))
        return best if math.isfinite(best) else 0.0

    def to_frame(self) -> pd.DataFrame:
        pts = self.as_array()
        return pd.DataFrame({'x': pts[:, 0], 'y': pts[:, 1]})


def _clean(points: List[Point], tol: float) -> Tuple[Point, ...]:
    """Drop repeated and collinear vertices, then rotate to the canonical start."""
    exact = _is_exact(v for p in points for v in p)

    def same(a, b):
        return a == b if exact else math.dist((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) <= tol

    cleaned: List[Point] = []
    for p in points:
        if not cleaned or not same(cleaned[-1], p):
            cleaned.append(p)
    while len(cleaned) > 1 and same(cleaned[0], cleaned[-1]):
        cleaned.pop()
    changed = True
    while changed and len(cleaned) > 2:
        changed = False
        for i in range(len(cleaned)):
            a, b, c = cleaned[i - 1], cleaned[i], cleaned[(i + 1) % len(cleaned)]
            cross = _cross(a, b, c)
            scale = 1.0 if exact else max(1.0, math.dist((float(a[0]), float(a[1])), (float(c[0]), float(c[1]))))
            if (cross == 0) if exact else abs(float(cross)) <= tol * scale:
                del cleaned[i]
                changed = True
                break
    if not cleaned:
        return ()
    start = min(range(len(cleaned)), key=lambda i: (cleaned[i][1], cleaned[i][0]))
    return tuple(cleaned[start:] + cleaned[:start])


def convex_hull(points: Iterable[Point], tol: float = GEOM_TOL) -> ShapePolygon:
    """Monotone-chain convex hull, counterclockwise, collinear points removed."""
    pts = sorted(set((p[0], p[1]) for p in points))
    if len(pts) <= 2:
        return ShapePolygon(_clean(pts, tol))
    lower: List[Point] = []
    for p in pts:
        while len(lower) > 1 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Point] = []
    for p in reversed(pts):
        while len(upper) > 1 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return ShapePolygon(_clean(lower[:-1] + upper[:-1], tol))


def _clip(polygon: List[Point], normal: Sequence[Number], offset: Number) -> List[Point]:
    """Sutherland-Hodgman clip of a convex polygon by {x.normal <= offset}."""
    out: List[Point] = []
    count = len(polygon)
    for i in range(count):
        p, q = polygon[i], polygon[(i + 1) % count]
        dp = _dot(p, normal) - offset
        dq = _dot(q, normal) - offset
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            t = dp / (dp - dq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def wulff_shape(field: SpeedField, tol: float = GEOM_TOL) -> ShapePolygon:
    """
    Intersection of the half-planes {x.e <= c(e)} over the sampled directions.

    With finitely many directions this is an outer approximation of the
    shape of the underlying continuous field.

    Args:
        field: Speed field with at least three directions surrounding the origin
        tol: Floating-point tolerance (unused in exact mode)

    Returns:
        ShapePolygon (empty when the half-planes do not intersect)

    Raises:
        GeometryError: If the directions leave the intersection unbounded
    """
    if field.size < 3:
        raise GeometryError(f"a Wulff shape needs at least 3 directions, got {field.size}")
    gap = field.max_gap()
    if gap >= math.pi - 1e-12:
        raise GeometryError(f"directions leave an angular gap of {math.degrees(gap):.2f} deg; shape unbounded")
    largest = max(abs(float(s.speed)) for s in field.samples)
    bound = math.ceil(largest / math.cos(gap / 2)) + 1
    exact = field.exact
    b = Fraction(bound) if exact else float(bound)
    polygon: List[Point] = [(-b, -b), (b, -b), (b, b), (-b, b)]
    for sample in field.samples:
        polygon = _clip(polygon, sample.direction, sample.speed)
        if not polygon:
            logger.warning("Wulff half-planes have an empty intersection")
            return ShapePolygon(())
    return ShapePolygon(_clean(polygon, tol))


def freidlin_gartner(field: SpeedField, direction: Sequence[Number]) -> Tuple[Number, Tuple[Number, Number]]:
    """
    w(e) = min over sampled e' with e'.e > 0 of c(e') / (e'.e).

    Returns:
        Tuple (w(e), the minimizing direction)

    Raises:
        GeometryError: If no sampled direction has e'.e > 0
    """
    best = None
    for sample in field.samples:
        projection = _dot(sample.direction, direction)
        if projection <= 0:
            continue
        value = sample.speed / projection
        if best is None or value < best[0]:
            best = (value, sample.direction)
    if best is None:
        raise GeometryError(f"no sampled direction has a positive component along {tuple(direction)}")
    return best


def supporting_hyperplane_test(shape: ShapePolygon, direction: Sequence[Number], level: Number,
                               tol: float = GEOM_TOL) -> bool:
    """True iff the line {x.e = level} touches the shape: max x.e >= level - tol."""
    if shape.is_empty:
        raise GeometryError("supporting hyperplane test on an empty shape")
    return shape.support(direction) >= level - tol


def minkowski_sum(first: ShapePolygon, second: ShapePolygon, tol: float = GEOM_TOL) -> ShapePolygon:
    if first.is_empty or second.is_empty:
        return ShapePolygon(())
    return convex_hull(
        ((a[0] + b[0], a[1] + b[1]) for a in first.vertices for b in second.vertices), tol
    )


def polygons_equal(first: ShapePolygon, second: ShapePolygon, tol: float = GEOM_TOL) -> bool:
    """Vertex-for-vertex equality of canonical polygons."""
    if len(first.vertices) != len(second.vertices):
        return False
    if first.exact and second.exact:
        return first.vertices == second.vertices
    return bool(np.all(np.abs(first.as_array() - second.as_array()) <= tol))


def hausdorff_distance(first: ShapePolygon, second: ShapePolygon, spacing: float = 0.005) -> float:
    """Symmetric Hausdorff distance between densely sampled boundaries."""
    a = first.boundary_points(spacing)
    b = second.boundary_points(spacing)
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


@dataclass(frozen=True)
class RefinementReport:
    coarse_directions: int
    fine_directions: int
    hausdorff: float

    def to_dict(self) -> Dict:
        return {'coarse_directions': self.coarse_directions, 'fine_directions': self.fine_directions,
                'hausdorff': self.hausdorff}


def wulff_refinement_study(field: SpeedField, tol: float = GEOM_TOL) -> RefinementReport:
    """Compare the shape of a field with the shape of every other direction of it."""
    coarse = field.subsample(2)
    distance = hausdorff_distance(wulff_shape(field, tol), wulff_shape(coarse, tol))
    logger.info(f"Wulff refinement {coarse.size} -> {field.size} directions: Hausdorff {distance:.3e}")
    return RefinementReport(coarse.size, field.size, distance)
