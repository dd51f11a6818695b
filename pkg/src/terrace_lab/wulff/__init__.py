"""
Wulff shapes, Freidlin-Gartner speeds and spreading-shape construction.
"""

from .geometry import (
    RefinementReport,
    ShapePolygon,
    SpeedField,
    SpeedSample,
    convex_hull,
    freidlin_gartner,
    hausdorff_distance,
    minkowski_sum,
    polygons_equal,
    supporting_hyperplane_test,
    wulff_refinement_study,
    wulff_shape,
)
from .spreading import (
    CornerDemoReport,
    SpeedConsistencyReport,
    UpsilonShape,
    c_of_p,
    corner_demo,
    corner_demo_field,
    speed_consistency_check,
    spreading_shape_recursion,
    upsilon,
    uppermost_speeds,
)

__all__ = [
    'RefinementReport',
    'ShapePolygon',
    'SpeedField',
    'SpeedSample',
    'convex_hull',
    'freidlin_gartner',
    'hausdorff_distance',
    'minkowski_sum',
    'polygons_equal',
    'supporting_hyperplane_test',
    'wulff_refinement_study',
    'wulff_shape',
    'CornerDemoReport',
    'SpeedConsistencyReport',
    'UpsilonShape',
    'c_of_p',
    'corner_demo',
    'corner_demo_field',
    'speed_consistency_check',
    'spreading_shape_recursion',
    'upsilon',
    'uppermost_speeds',
]
