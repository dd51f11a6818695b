"""
Computational domains and the second-order flux-form discretization of div(A grad u).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import ConfigError
from .grid import Grid
from .periodic_problem import PeriodicProblem


@dataclass(frozen=True)
class Domain:
    """
    A grid plus boundary policy.

    Axes listed in ``clamped_axes`` hold the initial values fixed on a layer of
    nodes at both ends (clamp-to-limit-states); all other axes are periodic.
    In 2D with one clamped axis, ``twist`` shifts the clamped-axis index by
    ``twist`` periods when the periodic axis wraps, which realises strips
    invariant under the lattice vector orthogonal to a rational direction.
    """

    grid: Grid
    clamped_axes: Tuple[int, ...] = ()
    twist: int = 0

    def __post_init__(self):
        if any(a not in range(self.grid.dimension) for a in self.clamped_axes):
            raise ConfigError(f"clamped axes {self.clamped_axes} out of range")
        if self.twist and (self.grid.dimension != 2 or len(self.clamped_axes) != 1):
            raise ConfigError("twist requires a 2D strip with exactly one clamped axis")

    @classmethod
    def periodic_cell(cls, dimension: int, points_per_period: int) -> 'Domain':
        return cls(Grid.cell(dimension, points_per_period))

    @property
    def is_periodic(self) -> bool:
        return not self.clamped_axes

    @property
    def fixed_layer(self) -> int:
        """Number of clamped nodes at each end of a clamped axis."""
        return max(1, abs(self.twist) * self.grid.points_per_period)

    def _end_mask(self, width: int) -> np.ndarray:
        mask = np.zeros(self.grid.shape, dtype=bool)
        for axis in self.clamped_axes:
            index = [slice(None)] * self.grid.dimension
            index[axis] = slice(0, width)
            mask[tuple(index)] = True
            index[axis] = slice(self.grid.shape[axis] - width, None)
            mask[tuple(index)] = True
        return mask

    def fixed_mask(self) -> np.ndarray:
        """Flattened mask of clamped nodes."""
        return self._end_mask(self.fixed_layer).ravel()

    def margin_mask(self, margin_periods: int) -> np.ndarray:
        """Free nodes within margin_periods of a clamped layer."""
        width = self.fixed_layer + margin_periods * self.grid.points_per_period
        return (self._end_mask(width) & ~self._end_mask(self.fixed_layer)).ravel()


def _forward_links(domain: Domain, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Node pairs (i, i + e_axis), including wrapped pairs on periodic axes."""
    shape = domain.grid.shape
    index = np.arange(domain.grid.size).reshape(shape)
    inner = [slice(None)] * len(shape)
    inner[axis] = slice(0, shape[axis] - 1)
    ahead = [slice(None)] * len(shape)
    ahead[axis] = slice(1, None)
    sources = [index[tuple(inner)].ravel()]
    targets = [index[tuple(ahead)].ravel()]
    if axis not in domain.clamped_axes:
        last = [slice(None)] * len(shape)
        last[axis] = shape[axis] - 1
        first = [slice(None)] * len(shape)
        first[axis] = 0
        src = index[tuple(last)]
        dst = index[tuple(first)]
        if domain.twist:
            # src/dst are 1D along the single clamped axis
            shift = domain.twist * domain.grid.points_per_period
            length = src.shape[0]
            positions = np.arange(length)
            valid = (positions + shift >= 0) & (positions + shift < length)
            src = src[valid]
            dst = dst[positions[valid] + shift]
        sources.append(np.ravel(src))
        targets.append(np.ravel(dst))
    return np.concatenate(sources), np.concatenate(targets)


def _half_point_coefficient(problem: PeriodicProblem, grid: Grid, axis: int) -> np.ndarray:
    """A_axis,axis at x + dx/2 e_axis for every node, tiled from one cell."""
    cell = Grid.cell(grid.dimension, grid.points_per_period)
    coords = list(cell.coordinates())
    coords[axis] = coords[axis] + 0.5 * grid.dx
    return grid.tile_cell_field(problem.diffusion.coefficient(axis, coords)).ravel()


def assemble_diffusion(problem: PeriodicProblem, domain: Domain) -> sp.csr_matrix:
    """
    Assemble the symmetric matrix of div(A grad .) on the domain.

    Every link between neighbouring nodes contributes a(x_half)/dx^2 to the
    off-diagonals and subtracts it from both diagonals, so the matrix is
    symmetric, negative semidefinite and has zero row sums.

    Args:
        problem: Equation data
        domain: Grid and boundary policy

    Returns:
        CSR matrix acting on flattened fields
    """
    grid = domain.grid
    if grid.dimension != problem.dimension:
        raise ConfigError(f"grid dimension {grid.dimension} differs from problem dimension {problem.dimension}")
    rows, cols, data = [], [], []
    inv_dx2 = 1.0 / grid.dx ** 2
    for axis in range(grid.dimension):
        src, dst = _forward_links(domain, axis)
        weight = _half_point_coefficient(problem, grid, axis)[src] * inv_dx2
        rows.extend([src, dst, src, dst])
        cols.extend([dst, src, src, dst])
        data.extend([weight, weight, -weight, -weight])
    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return matrix.tocsr()
