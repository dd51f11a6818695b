"""
Propagating terraces: construction by merging, observation and comparison.
"""

from .builder import (
    FrontMeasurer,
    MergeEvent,
    MergeOrderReport,
    Terrace,
    build_terrace,
    build_terraces,
    merge_order_invariance_check,
    speeds_nondecreasing,
)
from .merge_policies import MERGE_POLICIES, LeftmostFirst, MergePolicy, RightmostFirst, make_merge_policy
from .observer import (
    ObservedTerrace,
    PlateauDiscrepancy,
    TerraceMatchReport,
    compare_terraces,
    observe_terrace_from_cauchy,
    plateau_discrepancies,
)

__all__ = [
    'FrontMeasurer',
    'MergeEvent',
    'MergeOrderReport',
    'Terrace',
    'build_terrace',
    'build_terraces',
    'merge_order_invariance_check',
    'speeds_nondecreasing',
    'MERGE_POLICIES',
    'LeftmostFirst',
    'MergePolicy',
    'RightmostFirst',
    'make_merge_policy',
    'ObservedTerrace',
    'PlateauDiscrepancy',
    'TerraceMatchReport',
    'compare_terraces',
    'observe_terrace_from_cauchy',
    'plateau_discrepancies',
]
