"""
Uniform grids commensurate with the unit period, and lattice directions.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigError

Number = Union[float, Fraction]


@dataclass(frozen=True)
class Grid:
    """
    Node-centred grid covering an integer number of periods per axis.

    Node i along axis a sits at origin[a] + i * dx. Because the origin is an
    integer, node i always has cell residue i mod points_per_period.
    """

    dimension: int
    points_per_period: int
    extent_periods: Tuple[int, ...]
    origin: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if int(self.points_per_period) != self.points_per_period or self.points_per_period < 2:
            raise ConfigError(
                f"points_per_period must be an integer >= 2, got {self.points_per_period}"
            )
        if len(self.extent_periods) != self.dimension:
            raise ConfigError(
                f"extent_periods needs {self.dimension} entries, got {len(self.extent_periods)}"
            )
        if any(int(e) != e or e < 1 for e in self.extent_periods):
            raise ConfigError(f"extent_periods must be positive integers, got {self.extent_periods}")
        if not self.origin:
            object.__setattr__(self, 'origin', (0,) * self.dimension)
        if len(self.origin) != self.dimension:
            raise ConfigError("origin must have one integer per axis")

    @classmethod
    def cell(cls, dimension: int, points_per_period: int) -> 'Grid':
        """One periodic cell."""
        return cls(dimension, points_per_period, (1,) * dimension)

    @property
    def dx(self) -> float:
        return 1.0 / self.points_per_period

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.points_per_period * e for e in self.extent_periods)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.dx * np.arange(self.shape[axis])

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Node coordinates as arrays of the grid shape (ij indexing)."""
        axes = [self.axis_coordinates(a) for a in range(self.dimension)]
        return tuple(np.meshgrid(*axes, indexing='ij'))

    def residues(self) -> Tuple[np.ndarray, ...]:
        """Per-axis cell residue index of every node, as index vectors."""
        return tuple(np.arange(self.shape[a]) % self.points_per_period for a in range(self.dimension))

    def tile_cell_field(self, cell_values: np.ndarray) -> np.ndarray:
        """Extend a field given on one cell to every node by periodicity."""
        cell_values = np.asarray(cell_values, dtype=float)
        expected = (self.points_per_period,) * self.dimension
        if cell_values.shape != expected:
            cell_values = cell_values.reshape(expected)
        return cell_values[np.ix_(*self.residues())]

    def cell_averages(self, values: np.ndarray) -> np.ndarray:
        """Average a 1D field over each period."""
        if self.dimension != 1:
            raise ConfigError("cell_averages is defined for 1D grids")
        return np.asarray(values).reshape(self.extent_periods[0], self.points_per_period).mean(axis=1)


@dataclass(frozen=True)
class LatticeDirection:
    """
    A direction given by integer components, so that the hyperplanes orthogonal
    to it are invariant under a lattice vector.
    """

    components: Tuple[int, ...]

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        if any(c != v for c, v in zip(comps, self.components)):
            raise ConfigError(f"direction components must be integers, got {self.components}")
        if len(comps) not in (1, 2) or all(c == 0 for c in comps):
            raise ConfigError(f"invalid direction {self.components}")
        g = math.gcd(*comps) if len(comps) == 2 else abs(comps[0])
        object.__setattr__(self, 'components', tuple(c // g for c in comps))

    @classmethod
    def parse(cls, text: str) -> 'LatticeDirection':
        """Parse '1', '-1', '1,0' or '3,4'."""
        try:
            return cls(tuple(int(part) for part in text.replace(' ', '').split(',')))
        except ValueError as exc:
            raise ConfigError(f"cannot parse direction '{text}'") from exc

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.components))

    @property
    def unit(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float) / self.norm

    @property
    def exact_unit(self) -> Optional[Tuple[Fraction, ...]]:
        """Unit vector in rationals when the norm is an integer (e.g. (3,4))."""
        squared = sum(c * c for c in self.components)
        root = math.isqrt(squared)
        if root * root != squared:
            return None
        return tuple(Fraction(c, root) for c in self.components)

    def __neg__(self) -> 'LatticeDirection':
        return LatticeDirection(tuple(-c for c in self.components))

    def label(self) -> str:
        return ','.join(str(c) for c in self.components)


def unit_vector(direction: Sequence[Number]) -> np.ndarray:
    vec = np.asarray([float(c) for c in direction])
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ConfigError("zero direction")
    return vec / norm
