"""
Pulsating-front speeds, profiles and the homogeneous shooting reference.
"""

from .front_speed import (
    CounterPropagationReport,
    FrontProfile,
    FrontRecord,
    FrontSettings,
    SpeedEstimate,
    bistable_speed,
    combined_se,
    counter_propagation_check,
    directional_domain,
    extract_profile,
    reflect_state,
)
from .shooting import ShootingProfile, shoot_bistable_profile

__all__ = [
    'CounterPropagationReport',
    'FrontProfile',
    'FrontRecord',
    'FrontSettings',
    'SpeedEstimate',
    'bistable_speed',
    'combined_se',
    'counter_propagation_check',
    'directional_domain',
    'extract_profile',
    'reflect_state',
    'ShootingProfile',
    'shoot_bistable_profile',
]
