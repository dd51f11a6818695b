"""
Reaction terms f(x, u): polynomials in u with trigonometric x-modulation.

A reaction term is sampled once on a grid, producing a SampledReaction that
evaluates f and its exact u-derivative on whole fields.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from ..exceptions import ConfigError
from .grid import Grid


def _as_float(value) -> float:
    """Accept numbers and rational strings such as '1/2'."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"invalid rational coefficient '{value}'") from exc
    return float(value)


class SampledReaction(ABC):
    """f(x, u) restricted to the nodes of one grid, acting on flattened fields."""

    @abstractmethod
    def value(self, u: np.ndarray) -> np.ndarray:
        """f(x_i, u_i) at every node."""
        pass

    @abstractmethod
    def derivative(self, u: np.ndarray) -> np.ndarray:
        """Exact partial derivative in u at every node."""
        pass

    def lipschitz(self, lower: float, upper: float, samples: int = 129) -> float:
        """Max of |d_u f| over the nodes and u in [lower, upper]."""
        size = self.size
        best = 0.0
        for level in np.linspace(lower, upper, samples):
            best = max(best, float(np.max(np.abs(self.derivative(np.full(size, level))))))
        return best

    @property
    @abstractmethod
    def size(self) -> int:
        pass


class PolynomialSampledReaction(SampledReaction):

    def __init__(self, base: Polynomial, terms: List[Tuple[np.ndarray, Polynomial]], size: int):
        self._base = base
        self._base_deriv = base.deriv()
        self._terms = [(w, g, g.deriv()) for w, g in terms]
        self._size = size

    @property
    def size(self) -> int:
        return self._size

    def value(self, u: np.ndarray) -> np.ndarray:
        out = self._base(u)
        for weights, g, _ in self._terms:
            out = out + weights * g(u)
        return out

    def derivative(self, u: np.ndarray) -> np.ndarray:
        out = self._base_deriv(u)
        for weights, _, g_deriv in self._terms:
            out = out + weights * g_deriv(u)
        return out


class ReflectedSampledReaction(SampledReaction):
    """g(x, v) = f(x, pbar(x)) - f(x, pbar(x) - v)."""

    def __init__(self, base: SampledReaction, pbar: np.ndarray):
        self._base = base
        self._pbar = pbar
        self._anchor = base.value(pbar)

    @property
    def size(self) -> int:
        return self._base.size

    def value(self, v: np.ndarray) -> np.ndarray:
        return self._anchor - self._base.value(self._pbar - v)

    def derivative(self, v: np.ndarray) -> np.ndarray:
        return self._base.derivative(self._pbar - v)


class ReactionTerm(ABC):
    """Abstract reaction term f(x, u), periodic in x with period 1."""

    @abstractmethod
    def sample(self, grid: Grid) -> SampledReaction:
        pass

    @abstractmethod
    def evaluate(self, x: Sequence[float], u: float) -> Tuple[float, float]:
        """Return f(x, u) and d_u f(x, u) at a single point."""
        pass

    @property
    @abstractmethod
    def is_homogeneous(self) -> bool:
        pass


@dataclass(frozen=True)
class ModulationTerm:
    """amplitude * cos(2 pi m.x) * g(u)."""

    amplitude: float
    wavevector: Tuple[int, ...]
    coefficients: Tuple[float, ...]

    @cached_property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def weights(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        phase = sum(m * x for m, x in zip(self.wavevector, coords))
        return self.amplitude * np.cos(2.0 * np.pi * phase)


@dataclass(frozen=True)
class ReactionSpec(ReactionTerm):
    """
    Base polynomial in u plus a finite Fourier sum of modulation terms.

    Coefficients are stored in ascending order of powers of u.
    """

    base_coefficients: Tuple[float, ...]
    modulation: Tuple[ModulationTerm, ...] = field(default_factory=tuple)
    label: str = 'polynomial'

    @classmethod
    def from_roots(cls, roots: Sequence, scale=1.0, modulation=(), label='roots') -> 'ReactionSpec':
        """-scale * prod(u - r)."""
        roots = [_as_float(r) for r in roots]
        base = -_as_float(scale) * Polynomial.fromroots(roots)
        return cls(tuple(float(c) for c in base.coef), tuple(modulation), label)

    @classmethod
    def cubic(cls, a, scale=1.0, modulation=()) -> 'ReactionSpec':
        """scale * u(1-u)(u-a)."""
        return cls.from_roots([0.0, a, 1.0], scale, modulation, label=f'cubic(a={_as_float(a):g})')

    @classmethod
    def quintic(cls, roots: Sequence, scale=1.0, modulation=()) -> 'ReactionSpec':
        """-scale * u(u-a1)(u-a2)(u-a3)(u-1)."""
        if len(roots) != 3:
            raise ConfigError(f"quintic needs three interior roots, got {list(roots)}")
        interior = [_as_float(r) for r in roots]
        label = 'quintic(' + ','.join(f'{r:g}' for r in interior) + ')'
        return cls.from_roots([0.0] + interior + [1.0], scale, modulation, label=label)

    @classmethod
    def from_coefficients(cls, coefficients: Sequence, modulation=()) -> 'ReactionSpec':
        return cls(tuple(_as_float(c) for c in coefficients), tuple(modulation), 'polynomial')

    @cached_property
    def base(self) -> Polynomial:
        return Polynomial(self.base_coefficients)

    @property
    def is_homogeneous(self) -> bool:
        return all(term.amplitude == 0 for term in self.modulation)

    def sample(self, grid: Grid) -> SampledReaction:
        cell = Grid.cell(grid.dimension, grid.points_per_period)
        coords = cell.coordinates()
        terms = []
        for term in self.modulation:
            if len(term.wavevector) != grid.dimension:
                raise ConfigError(
                    f"modulation wavevector {term.wavevector} does not match dimension {grid.dimension}"
                )
            weights = grid.tile_cell_field(term.weights(coords)).ravel()
            terms.append((weights, term.polynomial))
        return PolynomialSampledReaction(self.base, terms, grid.size)

    def evaluate(self, x: Sequence[float], u: float) -> Tuple[float, float]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        value = float(self.base(u))
        deriv = float(self.base.deriv()(u))
        for term in self.modulation:
            w = float(term.weights(x))
            value += w * float(term.polynomial(u))
            deriv += w * float(term.polynomial.deriv()(u))
        return value, deriv

    def integral(self, lower: float, upper: float) -> float:
        """Integral of the base polynomial in u (homogeneous problems only)."""
        antideriv = self.base.integ()
        return float(antideriv(upper) - antideriv(lower))


class ReflectedReaction(ReactionTerm):
    """
    Reaction of the reflected unknown v = pbar - u.

    Steady states map as q -> pbar - q with the same principal eigenpair, and
    a front of speed c in direction e maps to one of speed -c in direction -e.
    """

    def __init__(self, base: ReactionTerm, pbar_cell: np.ndarray, points_per_period: int):
        self.base = base
        self.pbar_cell = np.asarray(pbar_cell, dtype=float)
        self.points_per_period = points_per_period

    @property
    def is_homogeneous(self) -> bool:
        return self.base.is_homogeneous and np.ptp(self.pbar_cell) == 0

    def sample(self, grid: Grid) -> SampledReaction:
        if grid.points_per_period != self.points_per_period:
            raise ConfigError("reflected reaction sampled at a different resolution than its state")
        pbar = grid.tile_cell_field(self.pbar_cell).ravel()
        return ReflectedSampledReaction(self.base.sample(grid), pbar)

    def _pbar_at(self, x: Sequence[float]) -> float:
        idx = tuple(int(round(xi * self.points_per_period)) % self.points_per_period
                    for xi in np.atleast_1d(x))
        return float(self.pbar_cell.reshape((self.points_per_period,) * len(idx))[idx])

    def evaluate(self, x: Sequence[float], v: float) -> Tuple[float, float]:
        pbar = self._pbar_at(x)
        anchor, _ = self.base.evaluate(x, pbar)
        value, deriv = self.base.evaluate(x, pbar - v)
        return anchor - value, deriv
