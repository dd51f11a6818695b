"""
Observers attached to a time integration: level-set tracking, snapshots, probes.
"""

import os
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import logger
from ..problem.discretization import Domain


class Observer(ABC):
    """Abstract observer, called every ``cadence`` steps."""

    def __init__(self, cadence: int = 1):
        self.cadence = max(1, int(cadence))

    def start(self, initial) -> None:
        """Called once with the initial Field."""
        pass

    @abstractmethod
    def observe(self, time: float, values: np.ndarray) -> None:
        pass

    def finish(self) -> None:
        pass


class LevelSetTracker(Observer):
    """
    Records averages of u over unit-width bins of s = x.e.

    For grids aligned with the period these bins are exactly the cells, so the
    recorded profile is the cell-averaged profile; crossings of any level can
    be located afterwards.
    """

    def __init__(self, domain: Domain, direction: np.ndarray, cadence: int = 1,
                 bin_width: float = 1.0, start_time: float = 0.0):
        super().__init__(cadence)
        grid = domain.grid
        s = sum(c * x for c, x in zip(direction, grid.coordinates())).ravel()
        # free nodes only, clamped layers would bias partial end bins
        self._mask = ~domain.fixed_mask()
        s = s[self._mask]
        base = np.floor(s.min() / bin_width) * bin_width
        self._bins = np.floor((s - base) / bin_width + 1e-9).astype(int)
        self._counts = np.bincount(self._bins)
        valid = self._counts > 0
        self._valid = valid
        self.centers = (np.bincount(self._bins, weights=s)[valid] / self._counts[valid])
        self.start_time = start_time
        self.times: List[float] = []
        self.averages: List[np.ndarray] = []

    def bin_averages(self, values: np.ndarray) -> np.ndarray:
        sums = np.bincount(self._bins, weights=values[self._mask], minlength=self._counts.size)
        return sums[self._valid] / self._counts[self._valid]

    def start(self, initial) -> None:
        if self.start_time <= 0:
            self.observe(0.0, initial.values)

    def observe(self, time: float, values: np.ndarray) -> None:
        if time < self.start_time:
            return
        self.times.append(time)
        self.averages.append(self.bin_averages(values))

    def crossing(self, averages: np.ndarray, level: float) -> float:
        """First position, scanning from low s, where the profile drops below level."""
        above = averages >= level
        drops = np.nonzero(above[:-1] & ~above[1:])[0]
        if drops.size == 0:
            return float('nan')
        k = drops[0]
        a0, a1 = averages[k], averages[k + 1]
        return float(self.centers[k] + (a0 - level) / (a0 - a1) * (self.centers[k + 1] - self.centers[k]))

    def positions(self, level: float, since: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """Times and level-crossing positions recorded at or after ``since``."""
        times = np.asarray(self.times)
        keep = times >= since
        xs = np.array([self.crossing(avg, level) for avg, k in zip(self.averages, keep) if k])
        return times[keep], xs

    @property
    def latest(self) -> np.ndarray:
        return self.averages[-1]


class SnapshotRecorder(Observer):
    """Keeps copies of the field from ``start_time`` on."""

    def __init__(self, cadence: int = 1, start_time: float = 0.0):
        super().__init__(cadence)
        self.start_time = start_time
        self.times: List[float] = []
        self.snapshots: List[np.ndarray] = []

    def observe(self, time: float, values: np.ndarray) -> None:
        if time >= self.start_time:
            self.times.append(time)
            self.snapshots.append(values.copy())


class TimedSnapshotRecorder(Observer):
    """Keeps the first field at or after each requested time (cadence 1)."""

    def __init__(self, times: Sequence[float]):
        super().__init__(1)
        self.pending = sorted(float(t) for t in times)
        self.snapshots: Dict[float, Tuple[float, np.ndarray]] = {}

    def observe(self, time: float, values: np.ndarray) -> None:
        while self.pending and time >= self.pending[0] - 1e-9:
            self.snapshots[self.pending.pop(0)] = (time, values.copy())


class CenterProbe(Observer):
    """Records u at one node."""

    def __init__(self, node: int, cadence: int = 1):
        super().__init__(cadence)
        self.node = node
        self.times: List[float] = []
        self.values: List[float] = []

    def start(self, initial) -> None:
        self.observe(0.0, initial.values)

    def observe(self, time: float, values: np.ndarray) -> None:
        self.times.append(time)
        self.values.append(float(values[self.node]))


class SnapshotWriter(Observer):
    """
    Writes each observed field to CSV and a trajectory manifest at the end.

    1D snapshots have columns x,u; 2D snapshots are row-major grids whose
    header holds the x2 coordinates and whose first column holds x1.
    """

    def __init__(self, writer, domain: Domain, cadence: int = 100, prefix: str = 'snapshot'):
        super().__init__(cadence)
        self.writer = writer
        self.domain = domain
        self.prefix = prefix
        self.entries: List[dict] = []

    def start(self, initial) -> None:
        self.observe(0.0, initial.values)

    def _frame(self, values: np.ndarray) -> pd.DataFrame:
        grid = self.domain.grid
        if grid.dimension == 1:
            return pd.DataFrame({'x': grid.axis_coordinates(0), 'u': values})
        frame = pd.DataFrame(values.reshape(grid.shape),
                             columns=[f'{x:.6f}' for x in grid.axis_coordinates(1)])
        frame.insert(0, 'x1', grid.axis_coordinates(0))
        return frame

    def observe(self, time: float, values: np.ndarray) -> None:
        name = f'{self.prefix}_{len(self.entries):05d}.csv'
        path = self.writer.write_csv(self._frame(values), name)
        self.entries.append({'time': time, 'path': os.path.basename(path)})

    def finish(self) -> Optional[str]:
        path = self.writer.write_json({'snapshots': self.entries}, f'{self.prefix}_manifest.json')
        logger.info(f"Wrote {len(self.entries)} snapshots")
        return path
