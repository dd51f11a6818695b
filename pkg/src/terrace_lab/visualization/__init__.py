"""
Visualization module.
"""

from .plotter import Plotter

__all__ = ['Plotter']
