"""
End-to-end validation: spreading shapes from compactly supported data and
residual certificates.
"""

from .certificates import (
    GluedReport,
    PerturbationParams,
    BranchResult,
    PerturbationReport,
    SwitchCheck,
    cutoff,
    cutoff_derivative,
    glued_supersolution_residual,
    perturbation_residual,
)
from .spreading_run import (
    MeasuredShape,
    ShapeMatchReport,
    compact_datum,
    shape_bracket,
    shape_match,
    spreading_run,
)

__all__ = [
    'GluedReport',
    'PerturbationParams',
    'BranchResult',
    'PerturbationReport',
    'SwitchCheck',
    'cutoff',
    'cutoff_derivative',
    'glued_supersolution_residual',
    'perturbation_residual',
    'MeasuredShape',
    'ShapeMatchReport',
    'compact_datum',
    'shape_bracket',
    'shape_match',
    'spreading_run',
]
