"""
IMEX time stepping: implicit diffusion, explicit reaction.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from ..config import logger
from ..exceptions import (
    BoundaryContaminationError,
    ConfigError,
    ConvergenceError,
    InvariantRegionError,
)
from ..problem.discretization import Domain, assemble_diffusion
from ..problem.periodic_problem import PeriodicProblem, reaction_lipschitz
from ..problem.schema import Tolerances


@dataclass(frozen=True, eq=False)
class Field:
    """Values on every node of a domain (flattened), at a time."""

    domain: Domain
    values: np.ndarray
    time: float = 0.0

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.domain.grid.shape)


class LinearSolverStrategy(ABC):
    """Abstract base class for the linear solve of the implicit diffusion step."""

    @abstractmethod
    def prepare(self, matrix: sp.spmatrix) -> None:
        pass

    @abstractmethod
    def solve(self, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        pass


class DirectSolver(LinearSolverStrategy):
    """Sparse LU factorization, computed once per step size."""

    def prepare(self, matrix: sp.spmatrix) -> None:
        self._lu = splu(matrix.tocsc())

    def solve(self, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)


class ConjugateGradientSolver(LinearSolverStrategy):
    """Conjugate gradient warm-started from the previous field."""

    def __init__(self, rtol: float = 1e-12):
        self.rtol = rtol

    def prepare(self, matrix: sp.spmatrix) -> None:
        self._matrix = matrix.tocsr()

    def solve(self, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        solution, info = cg(self._matrix, rhs, x0=guess, rtol=self.rtol, atol=0.0)
        if info != 0:
            raise ConvergenceError(f"conjugate gradient failed with info={info}")
        return solution


LINEAR_SOLVERS: Dict[str, type] = {
    'direct': DirectSolver,
    'cg': ConjugateGradientSolver,
}


def make_linear_solver(name: str) -> LinearSolverStrategy:
    if name not in LINEAR_SOLVERS:
        raise ConfigError(f"Linear solver '{name}' not supported. Available: {list(LINEAR_SOLVERS)}")
    return LINEAR_SOLVERS[name]()


def dt_max(problem: PeriodicProblem, domain: Domain, lower: float, upper: float,
           tolerances: Optional[Tolerances] = None) -> float:
    """min(cfl_safety * dx^2 / C2, reaction_limit / Lip(f)) on [lower, upper]."""
    tolerances = tolerances or Tolerances()
    grid = domain.grid
    c2 = problem.ellipticity_bounds(grid.points_per_period)[1]
    diffusive = tolerances.cfl_safety * grid.dx ** 2 / c2
    lipschitz = reaction_lipschitz(problem, grid.points_per_period, lower, upper)
    if lipschitz <= 0:
        return diffusive
    return min(diffusive, tolerances.reaction_limit / lipschitz)


class ImexStepper:
    """
    One step: (I - dt P L P) u_new = u + dt P f(u) + dt P L (I - P) u_anchor.

    P masks the free nodes; clamped nodes keep their anchor values and the
    system matrix stays symmetric positive definite.
    """

    def __init__(self, problem: PeriodicProblem, domain: Domain, dt: float, solver: str = 'direct'):
        if dt <= 0:
            raise ConfigError(f"time step must be positive, got {dt}")
        self.problem = problem
        self.domain = domain
        self.dt = dt
        self.laplacian = assemble_diffusion(problem, domain)
        self.free = ~domain.fixed_mask()
        self._free_float = self.free.astype(float)
        mask = sp.diags(self._free_float)
        operator = mask @ self.laplacian @ mask
        system = sp.identity(domain.grid.size, format='csr') - dt * operator
        self.solver = make_linear_solver(solver)
        self.solver.prepare(system)
        self.reaction = problem.reaction.sample(domain.grid)

    def boundary_term(self, anchor: np.ndarray) -> np.ndarray:
        if self.free.all():
            return np.zeros_like(anchor)
        clamped = np.where(self.free, 0.0, anchor)
        return self.dt * self._free_float * (self.laplacian @ clamped)

    def step(self, u: np.ndarray, boundary: Optional[np.ndarray] = None) -> np.ndarray:
        rhs = u + self.dt * self._free_float * self.reaction.value(u)
        if boundary is not None:
            rhs = rhs + boundary
        return self.solver.solve(rhs, u)


@dataclass
class Trajectory:
    final: Field
    dt: float
    steps: int
    observers: Tuple = field(default_factory=tuple)


def step(problem: PeriodicProblem, current: Field, dt: float, solver: str = 'direct') -> Field:
    """
    Advance a field by one IMEX step.

    Args:
        problem: Equation data
        current: Field to advance; its clamped nodes stay fixed
        dt: Time step

    Returns:
        Field at time current.time + dt
    """
    stepper = ImexStepper(problem, current.domain, dt, solver)
    values = stepper.step(current.values, stepper.boundary_term(current.values))
    if not np.all(np.isfinite(values)):
        raise InvariantRegionError(f"non-finite values after step at t={current.time + dt:g}")
    return Field(current.domain, values, current.time + dt)


def _check_invariant_region(values: np.ndarray, lower: float, upper: float, eps: float, time: float):
    if not np.all(np.isfinite(values)):
        logger.error(f"Non-finite values at t={time:g}")
        raise InvariantRegionError(f"non-finite values at t={time:g}")
    low, high = float(values.min()), float(values.max())
    if low < lower - eps or high > upper + eps:
        logger.error(f"Left invariant region at t={time:g}: [{low:.3e}, {high:.3e}]")
        raise InvariantRegionError(
            f"solution left [{lower:g}, {upper:g}] by more than {eps:g} at t={time:g}"
        )


def check_boundary(domain: Domain, initial: np.ndarray, values: np.ndarray, tolerances: Tolerances):
    """Raise if the solution moved within boundary_margin periods of a clamped layer."""
    if domain.is_periodic:
        return
    slab = domain.margin_mask(tolerances.boundary_margin)
    if not slab.any():
        return
    drift = float(np.max(np.abs(values[slab] - initial[slab])))
    if drift > tolerances.contamination_tol:
        logger.error(f"Boundary contamination: drift {drift:.3e} in the margin slab")
        raise BoundaryContaminationError(
            f"solution changed by {drift:.3e} within {tolerances.boundary_margin} periods of a clamped boundary"
        )


def evolve(problem: PeriodicProblem, domain: Domain, u0: np.ndarray, horizon: float,
           observers: Sequence = (), dt: Optional[float] = None,
           tolerances: Optional[Tolerances] = None, solver: str = 'direct') -> Trajectory:
    """
    Integrate from u0 up to the horizon with a fixed step.

    Args:
        problem: Equation data
        domain: Grid and boundary policy
        u0: Initial field (flattened)
        horizon: Final time
        observers: Observers invoked every ``cadence`` steps and at the end
        dt: Step size (defaults to dt_max on the range of u0)
        tolerances: Numerical thresholds
        solver: Linear solver name

    Returns:
        Trajectory holding the final field and the observers

    Raises:
        InvariantRegionError: On NaN or overshoot beyond eps_overshoot
        BoundaryContaminationError: If the margin slab moved
    """
    tolerances = tolerances or Tolerances()
    u0 = np.asarray(u0, dtype=float).ravel()
    if u0.size != domain.grid.size:
        raise ConfigError(f"initial field has {u0.size} values for {domain.grid.size} nodes")
    lower, upper = float(u0.min()), float(u0.max())
    if dt is None:
        dt = dt_max(problem, domain, lower, upper, tolerances)
    steps = max(1, int(np.ceil(horizon / dt - 1e-9)))
    dt = horizon / steps
    stepper = ImexStepper(problem, domain, dt, solver)
    boundary = stepper.boundary_term(u0)
    logger.debug(f"Evolving {domain.grid.size} nodes for {steps} steps of dt={dt:.4g}")

    start = Field(domain, u0.copy(), 0.0)
    for observer in observers:
        observer.start(start)
    u = u0.copy()
    for k in range(1, steps + 1):
        u = stepper.step(u, boundary)
        time = k * dt
        _check_invariant_region(u, lower, upper, tolerances.eps_overshoot, time)
        for observer in observers:
            if k % observer.cadence == 0 or k == steps:
                observer.observe(time, u)
    check_boundary(domain, u0, u, tolerances)
    for observer in observers:
        observer.finish()
    return Trajectory(Field(domain, u, steps * dt), dt, steps, tuple(observers))


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    tolerance: float
    steps: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_dict(self) -> Dict:
        return {'max_violation': self.max_violation, 'tolerance': self.tolerance,
                'steps': self.steps, 'passed': self.passed}


def comparison_check(problem: PeriodicProblem, domain: Domain, u0: np.ndarray, v0: np.ndarray,
                     horizon: float, dt: Optional[float] = None,
                     tolerances: Optional[Tolerances] = None) -> ComparisonReport:
    """
    Evolve two ordered data side by side and report max over time of max(u - v, 0).

    Report only; never raises on a violation.
    """
    tolerances = tolerances or Tolerances()
    u = np.asarray(u0, dtype=float).ravel().copy()
    v = np.asarray(v0, dtype=float).ravel().copy()
    if np.any(u > v):
        raise ConfigError("comparison_check needs u0 <= v0 pointwise")
    lower = float(min(u.min(), v.min()))
    upper = float(max(u.max(), v.max()))
    if dt is None:
        dt = dt_max(problem, domain, lower, upper, tolerances)
    steps = max(1, int(np.ceil(horizon / dt - 1e-9)))
    stepper = ImexStepper(problem, domain, horizon / steps)
    bu, bv = stepper.boundary_term(u), stepper.boundary_term(v)
    worst = 0.0
    for _ in range(steps):
        u = stepper.step(u, bu)
        v = stepper.step(v, bv)
        worst = max(worst, float(np.max(u - v)))
    return ComparisonReport(max(worst, 0.0), tolerances.comparison_tol, steps)


def planar_datum(domain: Domain, upper_cell: np.ndarray, lower_cell: np.ndarray,
                 direction: np.ndarray, offset: float = 0.0) -> np.ndarray:
    """upper on {x.e <= offset}, lower elsewhere, both tiled from cell values."""
    grid = domain.grid
    s = sum(c * x for c, x in zip(direction, grid.coordinates()))
    upper = grid.tile_cell_field(upper_cell)
    lower = grid.tile_cell_field(lower_cell)
    return np.where(s <= offset + 1e-12, upper, lower).ravel()
