"""
Periodic steady states, principal eigenpairs and the stable-state lattice.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from ..config import EIGEN_RESIDUAL_TOL, NEWTON_MAX_ITERS, POWER_MAX_ITERS, logger
from ..exceptions import ConvergenceError, LatticeError, MarginalStateError, NumericalDiagnosticError
from ..parallel import parallel_map
from ..problem.discretization import Domain, assemble_diffusion
from ..problem.periodic_problem import PeriodicProblem
from ..problem.schema import Tolerances

GUESS_MARGIN = 0.25


class Stability(str, Enum):
    STABLE = 'stable'
    UNSTABLE = 'unstable'
    MARGINAL = 'marginal'


@dataclass(frozen=True, eq=False)
class SteadyState:
    """A periodic steady state sampled on one cell, with its principal eigenpair."""

    values: np.ndarray
    eigenvalue: float
    eigenfunction: np.ndarray
    stability: Stability
    residual: float
    dimension: int
    points_per_period: int
    id: str = ''
    flags: Tuple[str, ...] = ()

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def is_stable(self) -> bool:
        return self.stability == Stability.STABLE

    def cell_field(self) -> np.ndarray:
        return self.values.reshape((self.points_per_period,) * self.dimension)

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'lambda': self.eigenvalue,
            'stability': self.stability.value,
            'residual': self.residual,
            'mean': self.mean,
            'min': float(self.values.min()),
            'max': float(self.values.max()),
            'flags': list(self.flags),
        }


def _infer_resolution(problem: PeriodicProblem, values: np.ndarray) -> int:
    n = int(round(values.size ** (1.0 / problem.dimension)))
    if n ** problem.dimension != values.size:
        raise NumericalDiagnosticError(f"field of size {values.size} is not a {problem.dimension}D cell")
    return n


def _cell_system(problem: PeriodicProblem, points_per_period: int):
    domain = Domain.periodic_cell(problem.dimension, points_per_period)
    return assemble_diffusion(problem, domain), problem.reaction.sample(domain.grid)


def classify_stability(eigenvalue: float, tol_marginal: float) -> Stability:
    """Sign of the principal eigenvalue with a dead-band of half-width tol_marginal."""
    if eigenvalue < -tol_marginal:
        return Stability.STABLE
    if eigenvalue > tol_marginal:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def principal_eigenpair(problem: PeriodicProblem, values: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Largest eigenvalue of div(A grad .) + d_u f(x, p) on the periodic cell.

    Uses shifted inverse power iteration with shift max(d_u f) + 1, which lies
    strictly above the spectrum, so the iteration converges to the principal
    eigenpair whatever the sign of the eigenvalue.

    Args:
        problem: Equation data
        values: Field p on one cell (flattened or cell-shaped)

    Returns:
        Tuple (eigenvalue, eigenfunction normalized to max 1)

    Raises:
        ConvergenceError: If the eigen-residual stays above tolerance
        NumericalDiagnosticError: If the eigenfunction is not positive
    """
    values = np.asarray(values, dtype=float).ravel()
    n = _infer_resolution(problem, values)
    laplacian, reaction = _cell_system(problem, n)
    potential = reaction.derivative(values)
    operator = (laplacian + sp.diags(potential)).tocsr()
    shift = float(potential.max()) + 1.0
    lu = splu((shift * sp.identity(values.size, format='csc') - operator).tocsc())

    phi = np.ones(values.size)
    eigenvalue = float('nan')
    residual = float('inf')
    for _ in range(POWER_MAX_ITERS):
        phi = lu.solve(phi)
        phi /= np.max(np.abs(phi))
        applied = operator @ phi
        eigenvalue = float(phi @ applied / (phi @ phi))
        residual = float(np.max(np.abs(applied - eigenvalue * phi)))
        if residual <= 1e-12:
            break
    if residual > EIGEN_RESIDUAL_TOL:
        raise ConvergenceError(f"power iteration stalled with eigen-residual {residual:.3e}")
    if phi.min() <= 0:
        raise NumericalDiagnosticError("principal eigenfunction changes sign; refine the grid")
    return eigenvalue, phi / phi.max()


def find_steady_state(problem: PeriodicProblem, guess: np.ndarray,
                      tolerances: Optional[Tolerances] = None,
                      max_iters: int = NEWTON_MAX_ITERS) -> SteadyState:
    """
    Damped Newton solve of div(A grad p) + f(x, p) = 0 on the periodic cell.

    Args:
        problem: Equation data
        guess: Initial field on one cell
        tolerances: Residual and marginal thresholds
        max_iters: Newton iteration cap

    Returns:
        SteadyState with its eigenpair and stability attached

    Raises:
        ConvergenceError: If Newton fails to reach steady_tol
    """
    tolerances = tolerances or Tolerances()
    guess = np.asarray(guess, dtype=float).ravel()
    n = _infer_resolution(problem, guess)
    laplacian, reaction = _cell_system(problem, n)

    def residual_of(u):
        return laplacian @ u + reaction.value(u)

    u = guess.copy()
    res_vec = residual_of(u)
    res = float(np.max(np.abs(res_vec)))
    for iteration in range(max_iters):
        if res <= tolerances.steady_tol:
            break
        jacobian = (laplacian + sp.diags(reaction.derivative(u))).tocsc()
        delta = spsolve(jacobian, -res_vec)
        if not np.all(np.isfinite(delta)):
            raise ConvergenceError(f"Newton step is not finite at iteration {iteration}")
        step = 1.0
        while step >= 1.0 / 1024:
            trial = u + step * delta
            trial_vec = residual_of(trial)
            trial_res = float(np.max(np.abs(trial_vec)))
            if trial_res < res:
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"Newton line search failed at residual {res:.3e}")
        u, res_vec, res = trial, trial_vec, trial_res
    if res > tolerances.steady_tol:
        raise ConvergenceError(f"Newton did not converge: residual {res:.3e} after {max_iters} iterations")

    flags = []
    if u.min() < guess.min() - GUESS_MARGIN or u.max() > guess.max() + GUESS_MARGIN:
        flags.append('outside_guess_range')
        logger.warning(f"Steady state converged outside the guess range [{guess.min():.3g}, {guess.max():.3g}]")

    eigenvalue, phi = principal_eigenpair(problem, u)
    return SteadyState(
        values=u,
        eigenvalue=eigenvalue,
        eigenfunction=phi,
        stability=classify_stability(eigenvalue, tolerances.tol_marginal),
        residual=res,
        dimension=problem.dimension,
        points_per_period=n,
        flags=tuple(flags),
    )


@dataclass(frozen=True, eq=False)
class StateLattice:
    """
    Stable states between 0 and pbar in descending order (p0 = pbar, pM = 0),
    plus the unstable and marginal states met on the way.
    """

    stable: Tuple[SteadyState, ...]
    unstable: Tuple[SteadyState, ...] = ()
    marginal: Tuple[SteadyState, ...] = ()
    intersections: Tuple[Tuple[str, str], ...] = ()
    skipped_probes: Tuple[float, ...] = ()

    @property
    def totally_ordered(self) -> bool:
        return not self.intersections

    @property
    def top(self) -> SteadyState:
        return self.stable[0]

    @property
    def bottom(self) -> SteadyState:
        return self.stable[-1]

    @property
    def size(self) -> int:
        """M, the number of stable states minus one."""
        return len(self.stable) - 1

    def by_id(self, state_id: str) -> SteadyState:
        for state in self.stable + self.unstable + self.marginal:
            if state.id == state_id:
                return state
        raise LatticeError(f"no state with id '{state_id}'")

    def index(self, state: SteadyState) -> int:
        for i, candidate in enumerate(self.stable):
            if candidate.id == state.id:
                return i
        raise LatticeError(f"state '{state.id}' is not a stable lattice state")

    def between(self, upper: SteadyState, lower: SteadyState) -> List[SteadyState]:
        """Stable states strictly between two lattice states."""
        return list(self.stable[self.index(upper) + 1:self.index(lower)])

    def below(self, state: SteadyState) -> 'StateLattice':
        """The lattice of the sub-problem connecting ``state`` to 0."""
        start = self.index(state)
        kept = {s.id for s in self.stable[start:]}
        return StateLattice(
            stable=self.stable[start:],
            unstable=tuple(u for u in self.unstable if u.mean < state.mean),
            marginal=self.marginal,
            intersections=tuple(p for p in self.intersections if p[0] in kept and p[1] in kept),
        )

    def to_dict(self) -> Dict:
        return {
            'stable': [s.to_dict() for s in self.stable],
            'unstable': [s.to_dict() for s in self.unstable],
            'marginal': [s.to_dict() for s in self.marginal],
            'totally_ordered': self.totally_ordered,
            'intersections': [list(p) for p in self.intersections],
            'skipped_probes': list(self.skipped_probes),
        }


def require_classified(lattice: StateLattice) -> None:
    """
    Stop downstream terrace work while some state is marginal.

    Raises:
        MarginalStateError: If the lattice holds marginal states
    """
    if lattice.marginal:
        ids = [state.id for state in lattice.marginal]
        eigenvalues = [float(state.eigenvalue) for state in lattice.marginal]
        logger.error(f"Marginal states {ids} (principal eigenvalues {eigenvalues}) block terrace construction")
        raise MarginalStateError(
            f"states {ids} are neither stable nor unstable within tol_marginal; "
            f"refine the grid or adjust the tolerance"
        )


def relax_constant_probe(problem: PeriodicProblem, points_per_period: int, level: float,
                         horizon: float, tolerances: Tolerances,
                         lipschitz_range: Tuple[float, float]) -> Optional[np.ndarray]:
    """
    Evolve a constant field on the periodic cell until it stops moving.

    The diffusion step is implicit, so only the reaction limits dt.
    Returns None when the horizon is reached first.
    """
    laplacian, reaction = _cell_system(problem, points_per_period)
    lipschitz = reaction.lipschitz(*lipschitz_range)
    dt = tolerances.reaction_limit / max(lipschitz, 1e-12)
    size = laplacian.shape[0]
    lu = splu((sp.identity(size, format='csc') - dt * laplacian).tocsc())
    u = np.full(size, float(level))
    steps = int(np.ceil(horizon / dt))
    for _ in range(steps):
        updated = lu.solve(u + dt * reaction.value(u))
        if np.max(np.abs(updated - u)) <= tolerances.relax_tol * dt:
            return updated
        u = updated
    return None


def _probe_task(args) -> Tuple[float, Optional[SteadyState]]:
    problem, points_per_period, level, horizon, tolerances, lip_range = args
    relaxed = relax_constant_probe(problem, points_per_period, level, horizon, tolerances, lip_range)
    if relaxed is None:
        logger.warning(f"Probe {level:g} did not settle within horizon {horizon:g}; skipped")
        return level, None
    try:
        return level, find_steady_state(problem, relaxed, tolerances)
    except ConvergenceError as exc:
        logger.warning(f"Probe {level:g} could not be polished: {exc}; skipped")
        return level, None


def _strictly_above(upper: SteadyState, lower: SteadyState) -> bool:
    return bool(np.all(upper.values > lower.values))


def _deduplicate(states: Sequence[SteadyState], tol: float) -> List[SteadyState]:
    unique: List[SteadyState] = []
    for state in sorted(states, key=lambda s: -s.mean):
        if all(np.max(np.abs(state.values - kept.values)) >= tol for kept in unique):
            unique.append(state)
    return unique


def enumerate_stable_states(problem: PeriodicProblem, probe_levels: Sequence[float],
                            points_per_period: int, tolerances: Optional[Tolerances] = None,
                            relaxation_horizon: float = 2000.0, jobs: int = 1) -> StateLattice:
    """
    Relax constant probes, polish with Newton, deduplicate and classify.

    Args:
        problem: Equation data
        probe_levels: Constant initial levels (0 is always added)
        points_per_period: Cell resolution
        tolerances: Numerical thresholds
        relaxation_horizon: Time budget per probe
        jobs: Worker processes for the probes

    Returns:
        StateLattice with ids p0 (pbar) ... pM (0), u0.. for unstable states

    Raises:
        LatticeError: If no stable state is found or 0 is not among them
    """
    tolerances = tolerances or Tolerances()
    levels = sorted(set([0.0] + [float(v) for v in probe_levels]))
    span = max(levels) - min(levels)
    lip_range = (min(levels) - 0.1 * span, max(levels) + 0.1 * span)
    tasks = [(problem, points_per_period, level, relaxation_horizon, tolerances, lip_range) for level in levels]
    results = parallel_map(_probe_task, tasks, jobs)

    skipped = tuple(level for level, state in results if state is None)
    found = _deduplicate([state for _, state in results if state is not None], tolerances.dedup_tol)
    stable = [s for s in found if s.stability == Stability.STABLE]
    if not stable:
        logger.error("No stable steady state found")
        raise LatticeError("no stable steady state found among the probes")
    zero = [s for s in stable if np.max(np.abs(s.values)) < tolerances.dedup_tol]
    if not zero:
        logger.error("The zero state is not among the stable states")
        raise LatticeError("0 is not a stable steady state")

    top = stable[0]
    in_range = [s for s in found if np.all(s.values >= -tolerances.dedup_tol)
                and np.all(s.values <= top.values + tolerances.dedup_tol)]
    if len(in_range) < len(found):
        logger.warning(f"Discarded {len(found) - len(in_range)} states outside [0, pbar]")

    def labelled(states, prefix):
        return [replace(s, id=f"{prefix}{i}") for i, s in enumerate(states)]

    stable = labelled([s for s in in_range if s.stability == Stability.STABLE], 'p')
    unstable = labelled([s for s in in_range if s.stability == Stability.UNSTABLE], 'u')
    marginal = labelled([s for s in in_range if s.stability == Stability.MARGINAL], 'm')
    intersections = tuple(
        (a.id, b.id)
        for i, a in enumerate(stable) for b in stable[i + 1:]
        if not _strictly_above(a, b)
    )
    if intersections:
        logger.warning(f"Stable states are not totally ordered: {intersections}")
    if marginal:
        logger.warning(f"Marginal states found: {[m.id for m in marginal]}")
    logger.info(
        f"Lattice: stable {[f'{s.id}~{s.mean:.4g}' for s in stable]}, "
        f"unstable {[f'{s.id}~{s.mean:.4g}' for s in unstable]}"
    )
    return StateLattice(
        stable=tuple(stable),
        unstable=tuple(unstable),
        marginal=tuple(marginal),
        intersections=intersections,
        skipped_probes=skipped,
    )
