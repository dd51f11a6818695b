"""
Travelling-profile shooting for homogeneous problems: d U'' + c U' + f(U) = 0.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..config import logger
from ..exceptions import ConvergenceError
from ..problem.reaction import ReactionSpec

SEED_OFFSET = 1e-6


@dataclass(frozen=True, eq=False)
class ShootingProfile:
    """Profile U(z) with U(0) at the mid-level, decreasing from upper to lower."""

    speed: float
    z: np.ndarray
    values: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.interp(z, self.z, self.values)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        return np.interp(z, self.z, np.gradient(self.values, self.z))


def _unstable_rate(speed: float, slope: float, diffusivity: float) -> float:
    return (-speed + np.sqrt(speed ** 2 - 4.0 * diffusivity * slope)) / (2.0 * diffusivity)


def _shoot(reaction: ReactionSpec, upper: float, lower: float, speed: float,
           diffusivity: float, z_max: float, dense: bool = False):
    """
    Integrate from the unstable manifold of the upper state.

    Returns +1 when U turns back before reaching lower (speed too large),
    -1 when U passes below lower (speed too small), and the solution.
    """
    f = reaction.base
    slope = float(f.deriv()(upper))
    offset = SEED_OFFSET * (upper - lower)
    y0 = [upper - offset, -offset * _unstable_rate(speed, slope, diffusivity)]

    def rhs(z, y):
        return [y[1], (-speed * y[1] - f(y[0])) / diffusivity]

    def turned(z, y):
        return y[1]
    turned.terminal = True
    turned.direction = 1

    def undershot(z, y):
        return y[0] - lower
    undershot.terminal = True
    undershot.direction = -1

    sol = solve_ivp(rhs, (0.0, z_max), y0, events=[turned, undershot],
                    rtol=1e-10, atol=1e-12, dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return (1 if sol.y[0, -1] > 0.5 * (upper + lower) else -1), sol


def shoot_bistable_profile(reaction: ReactionSpec, upper: float, lower: float,
                           diffusivity: float = 1.0, z_max: float = 400.0,
                           iterations: int = 80) -> ShootingProfile:
    """
    Find the speed and profile of the front from upper to lower by bisection.

    Args:
        reaction: Homogeneous reaction
        upper: Upper constant state (stable)
        lower: Lower constant state
        diffusivity: e.A e for constant diffusion
        z_max: Integration length
        iterations: Bisection steps

    Returns:
        ShootingProfile centred at the mid-level

    Raises:
        ConvergenceError: If the speed cannot be bracketed
    """
    if not reaction.is_homogeneous:
        raise ConvergenceError("profile shooting needs an x-independent reaction")
    levels = np.linspace(lower, upper, 201)
    lipschitz = float(np.max(np.abs(reaction.base.deriv()(levels))))
    bound = 2.0 * np.sqrt(diffusivity * lipschitz) + 1.0
    lo, hi = -bound, bound
    if _shoot(reaction, upper, lower, lo, diffusivity, z_max)[0] != -1 or \
            _shoot(reaction, upper, lower, hi, diffusivity, z_max)[0] != 1:
        raise ConvergenceError(f"could not bracket the front speed in [{lo:g}, {hi:g}]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _shoot(reaction, upper, lower, mid, diffusivity, z_max)[0] > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13:
            break
    _, sol = _shoot(reaction, upper, lower, hi, diffusivity, z_max, dense=True)
    z = np.arange(0.0, sol.t[-1], 0.01)
    values = sol.sol(z)[0]
    # truncate at the closest approach to the lower state
    stop = int(np.argmin(values)) + 1
    z, values = z[:stop], values[:stop]
    mid_level = 0.5 * (upper + lower)
    crossing = float(np.interp(-mid_level, -values, z))
    speed = 0.5 * (lo + hi)
    logger.info(f"Shooting speed {speed:.8f} for front {upper:g} -> {lower:g}")
    return ShootingProfile(speed=speed, z=z - crossing, values=values)
