"""
Artifact writing: JSON reports, CSV tables and the run manifest.

JSON is written with sorted keys and CSV with a fixed float format, so a
rerun with the same config and version reproduces the files byte for byte.
The manifest's wall time is the only field that changes between reruns.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, List, Optional

import numpy as np
import pandas as pd

from ..config import OUTPUT_DIR, logger
from ..exceptions import ConfigError
from ..wulff.geometry import SpeedField

FLOAT_FORMAT = '%.12g'


def _to_builtin(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Fraction):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def config_hash(config_text: str) -> str:
    return hashlib.sha256(config_text.encode('utf-8')).hexdigest()


class ArtifactWriter:
    """
    Writes artifacts under one output directory and remembers what it wrote.
    """

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or OUTPUT_DIR
        os.makedirs(self.output_dir, exist_ok=True)
        self.outputs: List[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _record(self, name: str) -> str:
        path = self.path(name)
        if name not in self.outputs:
            self.outputs.append(name)
        logger.info(f"Wrote {path}")
        return path

    def write_json(self, payload: Any, name: str) -> str:
        """Write a JSON document with sorted keys."""
        text = json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin)
        with open(self.path(name), 'w', encoding='utf-8') as handle:
            handle.write(text + '\n')
        return self._record(name)

    def write_csv(self, frame: pd.DataFrame, name: str) -> str:
        """Write a table without index and with a fixed float format."""
        frame.to_csv(self.path(name), index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return self._record(name)

    def write_figure(self, plotter, fig, name: str) -> str:
        plotter.save_plot(fig, self.path(name))
        return self._record(name)


def read_speed_field_csv(path: str) -> SpeedField:
    """
    Load a speed field from CSV with columns angle_degrees, speed and optional
    se. An optional provenance column (measured or synthetic) labels the field;
    its first value is used.

    Raises:
        ConfigError: If the file is missing or lacks the required columns
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"speed field file not found: {path}") from exc
    missing = {'angle_degrees', 'speed'} - set(frame.columns)
    if missing:
        raise ConfigError(f"speed field file {path} lacks columns {sorted(missing)}")
    logger.info(f"Loaded {len(frame)} directional speeds from {path}")
    provenance = str(frame['provenance'].iloc[0]) if 'provenance' in frame.columns and len(frame) else 'measured'
    return SpeedField.from_frame(frame, provenance=provenance)


@dataclass
class RunManifest:
    config_hash: str
    command: str
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    version: str = ''

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, writer: ArtifactWriter) -> str:
        self.outputs = sorted(set(self.outputs) | set(writer.outputs))
        return writer.write_json(self.to_dict(), 'manifest.json')
