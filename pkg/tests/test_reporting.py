"""
Tests for artifact writing and speed-field files.
"""

import json
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from src.terrace_lab.exceptions import ConfigError
from src.terrace_lab.reporting import ArtifactWriter, RunManifest, config_hash, read_speed_field_csv


class TestArtifactWriter:
    """Test cases for deterministic JSON and CSV output."""

    def setup_method(self):
        self.payload = {'b': np.float64(0.5), 'a': [np.int64(2), Fraction(7, 5)], 'ok': np.bool_(True)}

    def test_json_keys_sorted_and_numpy_converted(self, tmp_path):
        writer = ArtifactWriter(str(tmp_path))

        path = writer.write_json(self.payload, 'report.json')

        text = open(path, encoding='utf-8').read()
        assert text.index('"a"') < text.index('"b"') < text.index('"ok"')
        assert json.loads(text) == {'a': [2, '7/5'], 'b': 0.5, 'ok': True}
        assert writer.outputs == ['report.json']

    def test_csv_float_format(self, tmp_path):
        writer = ArtifactWriter(str(tmp_path))

        path = writer.write_csv(pd.DataFrame({'x': [1 / 3], 'u': [0.1]}), 'table.csv')

        assert open(path, encoding='utf-8').read() == 'x,u\n0.333333333333,0.1\n'

    def test_manifest_collects_outputs(self, tmp_path):
        writer = ArtifactWriter(str(tmp_path))
        writer.write_json({}, 'b.json')
        writer.write_json({}, 'a.json')

        RunManifest(config_hash(''), 'terrace-lab states').write(writer)

        manifest = json.loads((tmp_path / 'manifest.json').read_text())
        assert manifest['outputs'] == ['a.json', 'b.json']
        assert manifest['config_hash'] == config_hash('')
        assert len(manifest['config_hash']) == 64


class TestReadSpeedField:
    """Test cases for loading speed fields from CSV."""

    def test_defaults_to_measured(self, tmp_path):
        path = tmp_path / 'field.csv'
        pd.DataFrame({'angle_degrees': [0, 120, 240], 'speed': [1.0, 2.0, 3.0], 'se': [0.1, 0.1, 0.1]}).to_csv(
            path, index=False)

        field = read_speed_field_csv(str(path))

        assert field.provenance == 'measured'
        assert field.size == 3
        np.testing.assert_allclose(field.speeds(), [1.0, 2.0, 3.0])

    def test_provenance_column(self, tmp_path):
        path = tmp_path / 'field.csv'
        pd.DataFrame({'angle_degrees': [0, 120, 240], 'speed': [1.0] * 3,
                      'provenance': ['synthetic'] * 3}).to_csv(path, index=False)

        assert read_speed_field_csv(str(path)).provenance == 'synthetic'

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            read_speed_field_csv(str(tmp_path / 'absent.csv'))

    def test_missing_columns(self, tmp_path):
        path = tmp_path / 'field.csv'
        pd.DataFrame({'angle': [0, 120, 240], 'speed': [1.0] * 3}).to_csv(path, index=False)

        with pytest.raises(ConfigError, match="angle_degrees"):
            read_speed_field_csv(str(path))
