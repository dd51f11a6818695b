"""
Configuration settings for the terrace_lab package.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

# Logging configuration
LOG_LEVEL = os.getenv('TERRACE_LAB_LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Artifact paths
OUTPUT_DIR = os.getenv('TERRACE_LAB_OUTPUT_DIR', os.path.join(os.getcwd(), 'results'))

# Numerical defaults (every value can be overridden under run.tolerances)
STEADY_TOL = 1e-10
TOL_MARGINAL = 1e-4
DEDUP_TOL = 1e-5
ZERO_SPEED_TOL = 5e-3
EPS_OVERSHOOT = 1e-8
COMPARISON_TOL = 1e-10
GEOM_TOL = 1e-9
ANGLE_TOL = 1e-6
R2_MIN = 0.999
MONOTONE_TOL = 5e-3
PROF_TOL = 1e-2
PROFILE_MATCH_TOL = 5e-2
SPEED_SE_MAX = 1e-2
MERGE_FLOOR = 5e-3
SPLIT_FLOOR = 1e-2
SPEED_MATCH_FLOOR = 5e-3
BOUNDARY_MARGIN = 5
CONTAMINATION_TOL = 1e-3
CFL_SAFETY = 1.0
REACTION_LIMIT = 0.5
C_DISC = 1.0
DELTA_MIN = 1e-3
RELAX_TOL = 1e-7
NEWTON_MAX_ITERS = 50
POWER_MAX_ITERS = 500
EIGEN_RESIDUAL_TOL = 1e-8

# Spreading shapes are smoothed over angular bins of this width
SMOOTHING_BIN_DEGREES = 5.0

# Probe grid used to certify ellipticity when no grid is configured
PROBE_POINTS_PER_PERIOD = 64

# Visualization settings
PLOT_STYLE = 'bmh'
FIGURE_SIZE = (8, 8)
SVG_HASH_SALT = 'terrace-lab'


def get_logger(name: str) -> logging.Logger:
    """Get configured logger instance."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter(LOG_FORMAT)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.setLevel(LOG_LEVEL)
    return logger


def set_log_level(level: str) -> None:
    """Override the package log level (used by the CLI)."""
    logger.setLevel(level.upper())


# Global logger
logger = get_logger('terrace_lab')
