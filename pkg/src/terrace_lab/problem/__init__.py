"""
Equation data, grids, discretization and config loading.
"""

from .grid import Grid, LatticeDirection
from .reaction import ModulationTerm, ReactionSpec, ReactionTerm, ReflectedReaction
from .periodic_problem import (
    DiffusionEntry,
    DiffusionMode,
    DiffusionSpec,
    PeriodicProblem,
    reaction_lipschitz,
    sample_reaction,
)
from .discretization import Domain, assemble_diffusion
from .schema import LabConfig, RunSettings, Tolerances, load_config, load_problem

__all__ = [
    'Grid',
    'LatticeDirection',
    'ModulationTerm',
    'ReactionSpec',
    'ReactionTerm',
    'ReflectedReaction',
    'DiffusionEntry',
    'DiffusionMode',
    'DiffusionSpec',
    'PeriodicProblem',
    'reaction_lipschitz',
    'sample_reaction',
    'Domain',
    'assemble_diffusion',
    'LabConfig',
    'RunSettings',
    'Tolerances',
    'load_config',
    'load_problem',
]
