"""
Terrace Lab

Numerical laboratory for spatially periodic multistable reaction-diffusion
equations: stable periodic states, pulsating fronts, propagating terraces and
the Wulff shapes that govern spreading from compactly supported data.
"""

__version__ = "1.0.0"
__description__ = "Fronts, terraces and spreading shapes of periodic multistable reaction-diffusion equations"

from .problem import *
from .spectral import *
from .evolve import *
from .fronts import *
from .terrace import *
from .wulff import *
from .verify import *

__all__ = [
    'problem',
    'spectral',
    'evolve',
    'fronts',
    'terrace',
    'wulff',
    'verify',
    'visualization',
    'reporting',
]
