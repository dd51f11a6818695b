"""
Figure emission using a Strategy pattern, one strategy per figure kind.

Figures are always written as SVG with a fixed hash salt and no date, so a
rerun with the same inputs produces identical files.
"""

from typing import Dict, Optional, Sequence, Tuple

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from ..config import FIGURE_SIZE, PLOT_STYLE, SVG_HASH_SALT, logger  # noqa: E402
from ..exceptions import ConfigError  # noqa: E402


def _closed(frame: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    x, y = frame['x'].to_numpy(), frame['y'].to_numpy()
    return np.append(x, x[:1]), np.append(y, y[:1])


class PlotStrategy:
    """Base class for plotting strategies."""

    def plot(self, data: pd.DataFrame, **kwargs) -> plt.Figure:
        """Create plot."""
        pass


class PolygonStrategy(PlotStrategy):
    """A convex polygon (columns x, y), optionally with a supporting line."""

    def plot(self, data: pd.DataFrame, **kwargs) -> plt.Figure:
        title = kwargs.get('title', 'Wulff shape')
        figsize = kwargs.get('figsize', FIGURE_SIZE)
        line = kwargs.get('line')

        fig, ax = plt.subplots(figsize=figsize)
        x, y = _closed(data)
        ax.fill(x, y, alpha=0.25, color=sns.color_palette()[0])
        ax.plot(x, y, marker='o', color=sns.color_palette()[0])
        if line is not None:
            normal, level = np.asarray(line[0], dtype=float), float(line[1])
            tangent = np.array([-normal[1], normal[0]])
            foot = level * normal / np.dot(normal, normal)
            span = 2.0 * max(np.abs(x).max(), np.abs(y).max(), abs(level))
            ends = np.array([foot - span * tangent, foot + span * tangent])
            ax.plot(ends[:, 0], ends[:, 1], linestyle='--', color=sns.color_palette()[3],
                    label=f'x.e = {level:g}')
            ax.legend()
        ax.set_aspect('equal')
        ax.set_title(title)
        ax.set_xlabel('x1')
        ax.set_ylabel('x2')
        plt.tight_layout()
        return fig


class OverlayStrategy(PlotStrategy):
    """Measured outlines (one frame per entry) over predicted polygons."""

    def plot(self, data: pd.DataFrame, **kwargs) -> plt.Figure:
        title = kwargs.get('title', 'Spreading shapes')
        figsize = kwargs.get('figsize', FIGURE_SIZE)
        predicted: Dict[str, pd.DataFrame] = kwargs.get('predicted', {})
        palette = sns.color_palette(n_colors=max(2, len(predicted) + data['label'].nunique()))

        fig, ax = plt.subplots(figsize=figsize)
        k = 0
        for label, frame in predicted.items():
            x, y = _closed(frame)
            ax.plot(x, y, linestyle='--', color=palette[k], label=f'predicted {label}')
            k += 1
        for label, frame in data.groupby('label', sort=True):
            x, y = _closed(frame)
            ax.plot(x, y, color=palette[k], label=f'measured {label}')
            k += 1
        ax.set_aspect('equal')
        ax.set_title(title)
        ax.set_xlabel('x1 / t')
        ax.set_ylabel('x2 / t')
        ax.legend()
        plt.tight_layout()
        return fig


class ProfileStrategy(PlotStrategy):
    """Front profile U(z) with the band spanned by the cell residues."""

    def plot(self, data: pd.DataFrame, **kwargs) -> plt.Figure:
        title = kwargs.get('title', 'Front profile')
        figsize = kwargs.get('figsize', (8, 5))
        oracle: Optional[pd.DataFrame] = kwargs.get('oracle')

        fig, ax = plt.subplots(figsize=figsize)
        ax.plot(data['z'], data['U'], label='U')
        if 'U_min' in data and 'U_max' in data:
            ax.fill_between(data['z'], data['U_min'], data['U_max'], alpha=0.3, label='residue band')
        if oracle is not None:
            ax.plot(oracle['z'], oracle['U'], linestyle='--', label='shooting')
        ax.set_title(title)
        ax.set_xlabel('z = x.e - c t')
        ax.set_ylabel('u')
        ax.legend()
        plt.tight_layout()
        return fig


class SpeedFieldStrategy(PlotStrategy):
    """Speeds against direction angle, with error bars when available."""

    def plot(self, data: pd.DataFrame, **kwargs) -> plt.Figure:
        title = kwargs.get('title', 'Directional speeds')
        figsize = kwargs.get('figsize', (8, 5))

        fig, ax = plt.subplots(figsize=figsize)
        errors = data['se'] if 'se' in data else None
        ax.errorbar(data['angle_degrees'], data['speed'], yerr=errors, fmt='o-', capsize=2)
        ax.set_title(title)
        ax.set_xlabel('angle (degrees)')
        ax.set_ylabel('c(e)')
        plt.tight_layout()
        return fig


class Plotter:
    """
    Unified interface over the plotting strategies.
    """

    def __init__(self):
        self.strategies = {
            'polygon': PolygonStrategy(),
            'overlay': OverlayStrategy(),
            'profile': ProfileStrategy(),
            'speeds': SpeedFieldStrategy(),
        }
        plt.style.use(PLOT_STYLE)
        plt.rcParams['svg.hashsalt'] = SVG_HASH_SALT

    def create_plot(self, plot_type: str, data: pd.DataFrame, **kwargs) -> plt.Figure:
        """
        Create a plot using the named strategy.

        Raises:
            ConfigError: If the plot type is not supported
        """
        if plot_type not in self.strategies:
            available = list(self.strategies.keys())
            raise ConfigError(f"Plot type '{plot_type}' not supported. Available: {available}")
        fig = self.strategies[plot_type].plot(data, **kwargs)
        logger.debug(f"Created {plot_type} plot")
        return fig

    def save_plot(self, fig: plt.Figure, filename: str) -> str:
        """Save as SVG without timestamps and close the figure."""
        fig.savefig(filename, format='svg', metadata={'Date': None})
        plt.close(fig)
        logger.info(f"Saved plot to {filename}")
        return filename

    def polygon_plot(self, data: pd.DataFrame, title: str = 'Wulff shape',
                     line: Optional[Tuple[Sequence[float], float]] = None) -> plt.Figure:
        return self.create_plot('polygon', data, title=title, line=line)

    def overlay_plot(self, measured: pd.DataFrame, predicted: Dict[str, pd.DataFrame],
                     title: str = 'Spreading shapes') -> plt.Figure:
        return self.create_plot('overlay', measured, predicted=predicted, title=title)

    def profile_plot(self, data: pd.DataFrame, oracle: Optional[pd.DataFrame] = None,
                     title: str = 'Front profile') -> plt.Figure:
        return self.create_plot('profile', data, oracle=oracle, title=title)

    def speed_plot(self, data: pd.DataFrame, title: str = 'Directional speeds') -> plt.Figure:
        return self.create_plot('speeds', data, title=title)
