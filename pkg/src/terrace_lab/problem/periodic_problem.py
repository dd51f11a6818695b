"""
Equation data: a cell-periodic diagonal diffusion matrix and a reaction term.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from ..config import PROBE_POINTS_PER_PERIOD, logger
from ..exceptions import ConfigError
from .grid import Grid
from .reaction import ReactionTerm


@dataclass(frozen=True)
class DiffusionMode:
    amplitude: float
    wavevector: Tuple[int, ...]


@dataclass(frozen=True)
class DiffusionEntry:
    """One diagonal entry a(x) = constant + sum amplitude * cos(2 pi m.x)."""

    constant: float
    modes: Tuple[DiffusionMode, ...] = field(default_factory=tuple)

    def evaluate(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        out = np.full(np.shape(coords[0]), float(self.constant))
        for mode in self.modes:
            phase = sum(m * x for m, x in zip(mode.wavevector, coords))
            out = out + mode.amplitude * np.cos(2.0 * np.pi * phase)
        return out

    @property
    def is_constant(self) -> bool:
        return all(mode.amplitude == 0 for mode in self.modes)


@dataclass(frozen=True)
class DiffusionSpec:
    """Diagonal, symmetric diffusion matrix A(x)."""

    entries: Tuple[DiffusionEntry, ...]

    @classmethod
    def identity(cls, dimension: int) -> 'DiffusionSpec':
        return cls(tuple(DiffusionEntry(1.0) for _ in range(dimension)))

    @property
    def is_constant(self) -> bool:
        return all(entry.is_constant for entry in self.entries)

    def coefficient(self, axis: int, coords: Sequence[np.ndarray]) -> np.ndarray:
        return self.entries[axis].evaluate(coords)


@dataclass(frozen=True)
class PeriodicProblem:
    """
    d_t u = div(A(x) grad u) + f(x, u), with period 1 along every axis.

    Construction validates the dimension and certifies ellipticity on a probe
    grid; the certified bounds are kept as ``ellipticity``.
    """

    dimension: int
    diffusion: DiffusionSpec
    reaction: ReactionTerm
    probe_points: int = PROBE_POINTS_PER_PERIOD
    ellipticity: Tuple[float, float] = field(init=False, default=(0.0, 0.0))

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.diffusion.entries) != self.dimension:
            raise ConfigError(
                f"diffusion has {len(self.diffusion.entries)} entries for dimension {self.dimension}"
            )
        c1, c2 = self.ellipticity_bounds(self.probe_points)
        if c1 <= 0:
            raise ConfigError(f"diffusion is not elliptic: min eigenvalue {c1:.6g} on the probe grid")
        object.__setattr__(self, 'ellipticity', (c1, c2))
        logger.debug(f"Problem accepted: dimension={self.dimension}, C1={c1:.6g}, C2={c2:.6g}")

    def ellipticity_bounds(self, points_per_period: int) -> Tuple[float, float]:
        """Extreme eigenvalues of A(x) over one cell of the given resolution."""
        coords = Grid.cell(self.dimension, points_per_period).coordinates()
        values = [self.diffusion.coefficient(a, coords) for a in range(self.dimension)]
        return float(min(v.min() for v in values)), float(max(v.max() for v in values))

    @property
    def is_homogeneous(self) -> bool:
        return self.diffusion.is_constant and self.reaction.is_homogeneous

    def with_reaction(self, reaction: ReactionTerm) -> 'PeriodicProblem':
        return PeriodicProblem(self.dimension, self.diffusion, reaction, self.probe_points)


def sample_reaction(problem: PeriodicProblem, x, u: float) -> Tuple[float, float]:
    """
    Evaluate f(x, u) and its analytic u-derivative at one point.

    Args:
        problem: Equation data
        x: Point (scalar in 1D, pair in 2D)
        u: Value of the unknown

    Returns:
        Tuple (f, d_u f)
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size != problem.dimension:
        raise ConfigError(f"point {x} does not match dimension {problem.dimension}")
    return problem.reaction.evaluate(point, u)


def reaction_lipschitz(problem: PeriodicProblem, points_per_period: int,
                       lower: float, upper: float) -> float:
    """Lipschitz constant of f in u over one cell and u in [lower, upper]."""
    cell = Grid.cell(problem.dimension, points_per_period)
    return problem.reaction.sample(cell).lipschitz(lower, upper)


