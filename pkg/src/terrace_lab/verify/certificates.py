"""
Residual certificates for the sub- and supersolutions behind the spreading
results: the exponentially decaying perturbation of a stable state, and the
glued perturbed-profile supersolution of a terrace.

Residuals are evaluated analytically in time and with the same discrete
operator the integrator uses in space; ``disc_err = c_disc (dx^2 + dt)``
budgets the gap to the continuous problem.
"""

from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import logger
from ..evolve.integrator import dt_max
from ..exceptions import CertificateError, ConfigError
from ..fronts.shooting import shoot_bistable_profile
from ..problem.discretization import Domain, assemble_diffusion
from ..problem.grid import Grid
from ..problem.periodic_problem import PeriodicProblem
from ..problem.reaction import ReactionSpec
from ..problem.schema import CertificateSettings, Tolerances
from ..spectral.steady_states import SteadyState

DELTA_START = 0.1
CUTOFF_HALF_WIDTH = 2.0
EVALUATION_MARGIN = 30
PIECE_SEPARATION = 40


def _bump(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    positive = s > 0
    out[positive] = np.exp(-1.0 / s[positive])
    return out


def cutoff(z: np.ndarray) -> np.ndarray:
    """Smooth nondecreasing chi with chi = 0 on z <= -1 and chi = 1 on z >= 1."""
    a, b = _bump((1.0 + np.asarray(z)) / 2.0), _bump((1.0 - np.asarray(z)) / 2.0)
    return a / (a + b)


def cutoff_derivative(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    sa, sb = (1.0 + z) / 2.0, (1.0 - z) / 2.0
    a, b = _bump(sa), _bump(sb)
    da = np.where(sa > 0, a / np.maximum(sa, 1e-300) ** 2, 0.0)
    db = np.where(sb > 0, b / np.maximum(sb, 1e-300) ** 2, 0.0)
    return 0.5 * (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class PerturbationParams:
    """Amplitude eta, decay rate sigma and neighbourhood size delta."""

    eta: float
    sigma: float
    delta: float

    def __post_init__(self):
        if not 0 <= self.eta <= self.delta:
            raise ConfigError(f"need 0 <= eta <= delta, got eta={self.eta}, delta={self.delta}")
        if not 0 <= self.sigma <= self.delta:
            raise ConfigError(f"need 0 <= sigma <= delta, got sigma={self.sigma}, delta={self.delta}")

    @classmethod
    def for_delta(cls, delta: float) -> 'PerturbationParams':
        return cls(eta=delta / 2.0, sigma=delta / 4.0, delta=delta)

    @staticmethod
    def chi(z: np.ndarray) -> np.ndarray:
        return cutoff(z)

    def to_dict(self) -> Dict:
        return {'eta': self.eta, 'sigma': self.sigma, 'delta': self.delta}


@dataclass(frozen=True)
class BranchResult:
    """Margins of one side of the certificate: 'super' for p + w, 'sub' for p - w."""

    name: str
    extreme_residual: float
    margin: float
    margins: Tuple[float, ...]
    location: Tuple[float, Tuple[float, ...]]

    def to_dict(self, times: Sequence[float]) -> Dict:
        key = 'min_residual' if self.name == 'super' else 'max_residual'
        return {
            key: self.extreme_residual,
            'margin': self.margin,
            'margins': [{'t': t, 'margin': m} for t, m in zip(times, self.margins)],
            'location': {'t': self.location[0], 'x': list(self.location[1])},
        }


@dataclass(frozen=True)
class PerturbationReport:
    state_id: str
    params: PerturbationParams
    branches: Tuple[BranchResult, ...]
    times: Tuple[float, ...]
    disc_err: float
    attempts: Tuple[Tuple[float, float], ...] = ()
    strict: bool = False

    def branch(self, name: str) -> BranchResult:
        for result in self.branches:
            if result.name == name:
                return result
        raise KeyError(name)

    @property
    def worst(self) -> BranchResult:
        return min(self.branches, key=lambda b: b.margin)

    @property
    def margin(self) -> float:
        return self.worst.margin

    @property
    def margins(self) -> Tuple[float, ...]:
        return tuple(min(values) for values in zip(*(b.margins for b in self.branches)))

    @property
    def min_residual(self) -> float:
        return self.branch('super').extreme_residual

    @property
    def max_residual(self) -> float:
        return self.branch('sub').extreme_residual

    @property
    def passed(self) -> bool:
        # a delta sweep only accepts a strictly positive margin
        if self.strict:
            return self.margin > 0
        return self.margin >= -self.disc_err

    def to_dict(self) -> Dict:
        worst = self.worst
        return {
            'certificate': 'perturbation',
            'state': self.state_id,
            'params': self.params.to_dict(),
            'min_residual': self.min_residual,
            'max_residual': self.max_residual,
            'margin': self.margin,
            'margins': [{'t': t, 'margin': m} for t, m in zip(self.times, self.margins)],
            'branches': {b.name: b.to_dict(self.times) for b in self.branches},
            'location': {'branch': worst.name, 't': worst.location[0], 'x': list(worst.location[1])},
            'disc_err': self.disc_err,
            'attempts': [{'delta': d, 'margin': m} for d, m in self.attempts],
            'passed': self.passed,
        }

    def raise_for_failure(self) -> None:
        if not self.passed:
            worst = self.worst
            raise CertificateError(
                f"perturbation of {self.state_id} fails on the {worst.name} side: margin {self.margin:.3e} "
                f"at t={worst.location[0]:g}, x={worst.location[1]}"
            )


def _branch(name: str, sign: float, problem_terms, p: np.ndarray, phi: np.ndarray,
            params: PerturbationParams, times: Sequence[float], coords) -> BranchResult:
    """
    sign = +1 checks residual(p + w) >= delta eta e^(-sigma t);
    sign = -1 checks residual(p - w) <= -delta eta e^(-sigma t).
    """
    laplacian, reaction = problem_terms
    worst, location, margins = np.inf, (0.0, ()), []
    extreme = np.inf if sign > 0 else -np.inf
    for t in times:
        decay = params.eta * np.exp(-params.sigma * t)
        w = sign * decay * phi
        u = p + w
        residual = -params.sigma * w - laplacian @ u - reaction.value(u)
        considered = np.abs(w) <= params.delta
        excess = sign * residual[considered] - params.delta * decay
        margins.append(float(excess.min()))
        extreme = min(extreme, float(residual.min())) if sign > 0 else max(extreme, float(residual.max()))
        if excess.min() < worst:
            worst = float(excess.min())
            node = int(np.flatnonzero(considered)[np.argmin(excess)])
            location = (float(t), tuple(float(c[node]) for c in coords))
    return BranchResult(name, extreme, worst, tuple(margins), location)


def _evaluate_perturbation(problem: PeriodicProblem, state: SteadyState, params: PerturbationParams,
                           times: Sequence[float], tolerances: Tolerances) -> PerturbationReport:
    domain = Domain.periodic_cell(problem.dimension, state.points_per_period)
    terms = (assemble_diffusion(problem, domain), problem.reaction.sample(domain.grid))
    coords = [c.ravel() for c in domain.grid.coordinates()]
    p, phi = state.values, state.eigenfunction
    disc_err = tolerances.c_disc * (domain.grid.dx ** 2
                                    + dt_max(problem, domain, float(p.min()) - params.delta,
                                             float(p.max()) + params.delta, tolerances))
    branches = tuple(_branch(name, sign, terms, p, phi, params, times, coords)
                     for name, sign in (('super', 1.0), ('sub', -1.0)))
    return PerturbationReport(state.id, params, branches, tuple(float(t) for t in times), float(disc_err))



def perturbation_residual(problem: PeriodicProblem, state: SteadyState,
                          params: Optional[PerturbationParams] = None,
                          times: Optional[Sequence[float]] = None,
                          tolerances: Optional[Tolerances] = None) -> PerturbationReport:
    """
    Certify that p + eta phi exp(-sigma t) is a strict supersolution and
    p - eta phi exp(-sigma t) a strict subsolution near p.

    With N[u] = dt u - div(A grad u) - f(x, u), checks N[u] >= delta eta exp(-sigma t)
    on the upper branch and N[u] <= -delta eta exp(-sigma t) on the lower one, on
    the cell grid wherever |u - p| <= delta. The margin is the worse of the two.

    Without explicit params, delta sweeps 0.1, 0.05, ... down to delta_min with
    eta = delta/2, sigma = delta/4, and the largest delta with a positive margin
    is kept.

    Args:
        problem: Equation data
        state: A stable steady state with its principal eigenpair
        params: Fixed (eta, sigma, delta); None runs the sweep
        times: Evaluation times
        tolerances: Numerical thresholds (c_disc, delta_min)

    Returns:
        PerturbationReport; the sweep records every attempted delta
    """
    tolerances = tolerances or Tolerances()
    times = tuple(times if times is not None else CertificateSettings().times)
    if not state.is_stable:
        raise ConfigError(f"state {state.id} is not stable; no decaying perturbation exists")
    if params is not None:
        return _evaluate_perturbation(problem, state, params, times, tolerances)

    attempts = []
    last = None
    delta = DELTA_START
    while delta >= tolerances.delta_min * (1 - 1e-12):
        report = _evaluate_perturbation(problem, state, PerturbationParams.for_delta(delta), times, tolerances)
        attempts.append((delta, report.margin))
        last = report
        if report.margin > 0:
            logger.info(f"Perturbation certificate for {state.id}: delta={delta:g}, margin {report.margin:.3e}")
            return replace(report, attempts=tuple(attempts), strict=True)
        delta /= 2.0
    logger.warning(f"No admissible delta for {state.id} down to {tolerances.delta_min:g}")
    return replace(last, attempts=tuple(attempts), strict=True)


ProfileFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class _Piece:
    """One perturbed front U(x, z) + eta psi(x, z) moving at speed c + eps."""

    speed: float
    shift: float
    eta: float
    value: ProfileFunction
    slope: ProfileFunction
    phi_upper: np.ndarray
    phi_lower: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    def evaluate(self, s: np.ndarray, residue: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Values and time derivatives at positions s = x.e."""
        z = s - self.speed * t - self.shift
        zeta = z / CUTOFF_HALF_WIDTH
        chi = cutoff(zeta)
        psi = (1.0 - chi) * self.phi_upper[residue] + chi * self.phi_lower[residue]
        dpsi = -self.speed / CUTOFF_HALF_WIDTH * cutoff_derivative(zeta) * (
            self.phi_lower[residue] - self.phi_upper[residue])
        values = self.value(residue, z) + self.eta * psi
        rates = -self.speed * self.slope(residue, z) + self.eta * dpsi
        return values, rates


@dataclass(frozen=True)
class SwitchCheck:
    time: float
    index: int
    position: float
    value: float
    ordered: bool
    bracketed: bool

    @property
    def passed(self) -> bool:
        return self.ordered and self.bracketed

    def to_dict(self) -> Dict:
        return {'t': self.time, 'switch': self.index, 'position': self.position, 'value': self.value,
                'ordered': self.ordered, 'bracketed': self.bracketed}


@dataclass(frozen=True)
class GluedReport:
    epsilon: float
    eta: float
    min_residual: float
    location: Tuple[float, float]
    margins: Tuple[Tuple[float, float], ...]
    disc_err: float
    switches: Tuple[SwitchCheck, ...] = ()
    profile_source: str = 'shooting'

    @property
    def passed(self) -> bool:
        return self.min_residual >= -self.disc_err and all(s.passed for s in self.switches)

    def to_dict(self) -> Dict:
        return {
            'certificate': 'glued',
            'epsilon': self.epsilon,
            'eta': self.eta,
            'min_residual': self.min_residual,
            'location': {'t': self.location[0], 'x': self.location[1]},
            'margins': [{'t': t, 'min_residual': m} for t, m in self.margins],
            'disc_err': self.disc_err,
            'switches': [s.to_dict() for s in self.switches],
            'profile_source': self.profile_source,
            'passed': self.passed,
        }

    def raise_for_failure(self) -> None:
        if self.min_residual < -self.disc_err:
            raise CertificateError(
                f"glued supersolution residual {self.min_residual:.3e} below -{self.disc_err:.1e} "
                f"at t={self.location[0]:g}, x={self.location[1]:.3f}; profile quality insufficient"
            )
        broken = [s for s in self.switches if not s.passed]
        if broken:
            raise CertificateError(
                f"min-glue switch {broken[0].index} at t={broken[0].time:g} is not between platforms"
            )


def _shooting_source(problem: PeriodicProblem, front):
    profile = shoot_bistable_profile(problem.reaction, front.upper.mean, front.lower.mean,
                                     diffusivity=problem.ellipticity[0])
    return (lambda residue, z: profile(z)), (lambda residue, z: profile.derivative(z))


def _measured_source(front):
    profile = front.profile
    if profile is None:
        raise CertificateError(f"front {front.upper.id}->{front.lower.id} has no extracted profile")
    slopes = np.gradient(profile.values, profile.z, axis=1)

    def value(residue, z):
        out = np.empty_like(z)
        for r in np.unique(residue):
            mask = residue == r
            out[mask] = np.interp(z[mask] + profile.center, profile.z, profile.values[r])
        return out

    def slope(residue, z):
        out = np.empty_like(z)
        for r in np.unique(residue):
            mask = residue == r
            out[mask] = np.interp(z[mask] + profile.center, profile.z, slopes[r], left=0.0, right=0.0)
        return out

    return value, slope


def glued_supersolution_residual(problem: PeriodicProblem, terrace, epsilon: Optional[float] = None,
                                 eta: Optional[float] = None, times: Optional[Sequence[float]] = None,
                                 tolerances: Optional[Tolerances] = None) -> GluedReport:
    """
    Residual of the min-glued perturbed terrace profiles.

    Piece k is U_k(x, x.e - (c_k + eps_k) t) + eta_k psi_k with psi_k blending
    the eigenfunctions of the two platforms through the cutoff, and with
    increasing eps_k = eps (1 + k/K), eta_k = eta (k + 1). Neighbouring pieces
    are glued by a minimum on the region between the middles of consecutive
    plateaus. Homogeneous problems use shooting profiles, others the profiles
    extracted from the front runs.

    Args:
        problem: A 1D problem
        terrace: Terrace (or observed terrace with profiles) with nonzero speeds
        epsilon: Speed increment (default certificate settings)
        eta: Amplitude (default certificate settings)
        times: Evaluation times
        tolerances: Numerical thresholds

    Returns:
        GluedReport with the minimum residual, its location and switch checks
    """
    defaults = CertificateSettings()
    tolerances = tolerances or Tolerances()
    epsilon = defaults.epsilon if epsilon is None else float(epsilon)
    eta = defaults.eta if eta is None else float(eta)
    times = tuple(times if times is not None else defaults.times)
    if problem.dimension != 1:
        raise ConfigError("the glued certificate is evaluated in 1D")
    fronts = list(terrace.fronts)
    if not fronts:
        raise ConfigError("terrace has no fronts")
    if any(abs(f.c) <= tolerances.zero_speed_tol for f in fronts):
        raise ConfigError("the glued certificate needs nonzero front speeds")
    direction = int(np.sign(terrace.direction[0]))
    platforms = terrace.platforms
    n = platforms[0].points_per_period
    homogeneous = problem.is_homogeneous and isinstance(problem.reaction, ReactionSpec)
    count = len(fronts)

    pieces = []
    for k, front in enumerate(fronts):
        value, slope = _shooting_source(problem, front) if homogeneous else _measured_source(front)
        pieces.append(_Piece(
            speed=front.c + epsilon * (1.0 + k / count),
            shift=float(PIECE_SEPARATION * k),
            eta=eta * (k + 1),
            value=value,
            slope=slope,
            phi_upper=platforms[k].eigenfunction,
            phi_lower=platforms[k + 1].eigenfunction,
            upper=platforms[k].values,
            lower=platforms[k + 1].values,
        ))

    horizon = max(times)
    low = min(min(0.0, p.speed * horizon) + p.shift for p in pieces) - EVALUATION_MARGIN
    high = max(max(0.0, p.speed * horizon) + p.shift for p in pieces) + EVALUATION_MARGIN
    if direction < 0:
        low, high = -high, -low
    start = int(np.floor(low))
    grid = Grid(1, n, (int(np.ceil(high)) - start,), origin=(start,))
    domain = Domain(grid, clamped_axes=(0,))
    laplacian = assemble_diffusion(problem, domain)
    reaction = problem.reaction.sample(grid)
    x = grid.axis_coordinates(0)
    s = direction * x
    residue = np.arange(grid.size) % n
    interior = ~domain.fixed_mask()
    top = float(max(p.values.max() for p in platforms))
    disc_err = tolerances.c_disc * (grid.dx ** 2 + dt_max(problem, domain, 0.0, top + eta * count, tolerances))

    worst, location, margins, switches = np.inf, (0.0, 0.0), [], []
    for t in times:
        evaluated = [piece.evaluate(s, residue, t) for piece in pieces]
        positions = [piece.speed * t + piece.shift for piece in pieces]
        middles = [0.5 * (a + b) for a, b in zip(positions[:-1], positions[1:])]
        region = np.searchsorted(np.asarray(middles), s, side='right')
        composite, rates = evaluated[0][0].copy(), evaluated[0][1].copy()
        for j in range(1, count):
            inside = region == j
            left, right = evaluated[j - 1], evaluated[j]
            use_right = inside & (right[0] < left[0])
            use_left = inside & ~use_right
            composite[use_left], rates[use_left] = left[0][use_left], left[1][use_left]
            composite[use_right], rates[use_right] = right[0][use_right], right[1][use_right]

            # the previous region must end on piece j - 1 and this one must switch to piece j
            node = int(np.argmin(np.abs(s - middles[j - 1])))
            ordered = bool(left[0][node] <= right[0][node] + 1e-12)
            if j >= 2:
                ordered = ordered and bool(left[0][node] <= evaluated[j - 2][0][node] + 1e-12)
            crossing = np.flatnonzero(inside & (right[0] < left[0]))
            if crossing.size:
                c_node = int(crossing[0])
                v = float(left[0][c_node])
                bracketed = bool(pieces[j].lower[residue[c_node]] < v < pieces[j - 1].upper[residue[c_node]])
                switches.append(SwitchCheck(float(t), j, float(s[c_node]), v, ordered, bracketed))
            else:
                switches.append(SwitchCheck(float(t), j, float('nan'), float('nan'), ordered, False))

        residual = rates - laplacian @ composite - reaction.value(composite)
        masked = np.where(interior, residual, np.inf)
        node = int(np.argmin(masked))
        margins.append((float(t), float(masked[node])))
        if masked[node] < worst:
            worst = float(masked[node])
            location = (float(t), float(x[node]))

    report = GluedReport(epsilon, eta, worst, location, tuple(margins), float(disc_err), tuple(switches),
                         'shooting' if homogeneous else 'measured')
    logger.info(
        f"Glued supersolution over {count} front(s): min residual {worst:.3e} "
        f"(budget {disc_err:.1e}), {sum(not sw.passed for sw in switches)} switch issue(s)"
    )
    return report
