"""
Steady states, principal eigenpairs and stability classification.
"""

from .steady_states import (
    Stability,
    StateLattice,
    SteadyState,
    classify_stability,
    enumerate_stable_states,
    find_steady_state,
    principal_eigenpair,
    require_classified,
)

__all__ = [
    'Stability',
    'StateLattice',
    'SteadyState',
    'classify_stability',
    'enumerate_stable_states',
    'find_steady_state',
    'principal_eigenpair',
    'require_classified',
]
