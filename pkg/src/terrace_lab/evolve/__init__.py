"""
Time integration of the parabolic equation and run observers.
"""

from .integrator import (
    ComparisonReport,
    ConjugateGradientSolver,
    DirectSolver,
    Field,
    ImexStepper,
    LinearSolverStrategy,
    Trajectory,
    comparison_check,
    dt_max,
    evolve,
    planar_datum,
    step,
)
from .observers import (
    CenterProbe,
    LevelSetTracker,
    Observer,
    SnapshotRecorder,
    SnapshotWriter,
    TimedSnapshotRecorder,
)

__all__ = [
    'ComparisonReport',
    'ConjugateGradientSolver',
    'DirectSolver',
    'Field',
    'ImexStepper',
    'LinearSolverStrategy',
    'Trajectory',
    'comparison_check',
    'dt_max',
    'evolve',
    'planar_datum',
    'step',
    'CenterProbe',
    'LevelSetTracker',
    'Observer',
    'SnapshotRecorder',
    'SnapshotWriter',
    'TimedSnapshotRecorder',
]
