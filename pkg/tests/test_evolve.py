"""
Tests for the IMEX integrator, comparison principle and observers.
"""

import json
import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.terrace_lab.evolve import (
    CenterProbe,
    Field,
    LevelSetTracker,
    SnapshotRecorder,
    SnapshotWriter,
    TimedSnapshotRecorder,
    comparison_check,
    dt_max,
    evolve,
    planar_datum,
    step,
)
from src.terrace_lab.exceptions import BoundaryContaminationError, ConfigError, InvariantRegionError
from src.terrace_lab.problem import DiffusionSpec, Domain, Grid, PeriodicProblem, ReactionSpec
from src.terrace_lab.reporting import ArtifactWriter
from tests.configs import cubic_problem, modulated_cubic_problem


class TestStep:
    """Test cases for single steps and dt bounds."""

    def setup_method(self):
        self.problem = cubic_problem()
        self.domain = Domain(Grid(1, 10, (4,)))

    def test_constant_states_are_fixed_points(self):
        for level in (0.0, 1.0):
            current = Field(self.domain, np.full(self.domain.grid.size, level))

            advanced = step(self.problem, current, 0.01)

            np.testing.assert_allclose(advanced.values, level, atol=1e-14)
            assert advanced.time == pytest.approx(0.01)

    def test_dt_max_is_diffusive_on_fine_grids(self):
        dt = dt_max(self.problem, self.domain, 0.0, 1.0)

        assert dt == pytest.approx(self.domain.grid.dx ** 2, rel=1e-2)

    def test_cg_agrees_with_direct(self):
        u = np.random.default_rng(3).random(self.domain.grid.size)
        current = Field(self.domain, u)

        direct = step(self.problem, current, 0.005, 'direct')
        cg = step(self.problem, current, 0.005, 'cg')

        np.testing.assert_allclose(direct.values, cg.values, atol=1e-9)


class TestEvolve:
    """Test cases for full integrations."""

    def setup_method(self):
        self.problem = cubic_problem()
        self.domain = Domain(Grid(1, 10, (40,), origin=(-20,)), clamped_axes=(0,))
        self.u0 = planar_datum(self.domain, np.ones(10), np.zeros(10), np.array([1.0]))

    def test_planar_datum(self):
        x = self.domain.grid.axis_coordinates(0)

        np.testing.assert_array_equal(self.u0, np.where(x <= 0, 1.0, 0.0))

    def test_stays_in_invariant_region(self):
        trajectory = evolve(self.problem, self.domain, self.u0, 5.0)

        assert trajectory.final.time == pytest.approx(5.0)
        assert trajectory.final.values.min() >= -1e-8
        assert trajectory.final.values.max() <= 1 + 1e-8

    def test_observers_receive_the_final_step(self):
        probe = CenterProbe(self.domain.grid.size // 2, cadence=7)
        recorder = SnapshotRecorder(cadence=5, start_time=1.0)
        timed = TimedSnapshotRecorder([0.5, 2.0])

        trajectory = evolve(self.problem, self.domain, self.u0, 2.0, [probe, recorder, timed])

        assert probe.times[0] == 0.0
        assert probe.times[-1] == pytest.approx(trajectory.final.time)
        assert min(recorder.times) >= 1.0
        assert set(timed.snapshots) == {0.5, 2.0}
        actual, values = timed.snapshots[0.5]
        assert actual >= 0.5 - 1e-9
        assert values.shape == self.u0.shape

    def test_level_set_tracker_moves_forward(self):
        tracker = LevelSetTracker(self.domain, np.array([1.0]), cadence=10)

        evolve(self.problem, self.domain, self.u0, 10.0, [tracker])

        times, positions = tracker.positions(0.5, since=5.0)
        assert times.size > 2
        assert np.all(np.diff(positions) >= -1e-9)

    def test_overshoot_is_fatal(self):
        # a stiff reaction with one explicit unit step jumps past the data range
        stiff = PeriodicProblem(1, DiffusionSpec.identity(1), ReactionSpec.cubic(0.3, 50.0))

        with pytest.raises(InvariantRegionError):
            evolve(stiff, self.domain, self.u0 * 0.9 + 0.05, 1.0, dt=1.0)

    def test_boundary_contamination(self):
        small = Domain(Grid(1, 10, (12,), origin=(-6,)), clamped_axes=(0,))
        u0 = planar_datum(small, np.ones(10), np.zeros(10), np.array([1.0]))

        with pytest.raises(BoundaryContaminationError):
            evolve(self.problem, small, u0, 5.0)

    def test_wrong_size(self):
        with pytest.raises(ConfigError):
            evolve(self.problem, self.domain, np.zeros(3), 1.0)


class TestComparison:
    """Test cases for the discrete comparison principle."""

    def setup_method(self):
        self.problem = modulated_cubic_problem(0.2)
        self.domain = Domain(Grid(1, 8, (4,)))

    @given(st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=50, deadline=None)
    def test_ordered_data_stay_ordered(self, seed):
        rng = np.random.default_rng(seed)
        u0 = rng.random(self.domain.grid.size)
        v0 = np.minimum(1.0, u0 + rng.random(self.domain.grid.size) * 0.3)

        report = comparison_check(self.problem, self.domain, u0, v0, 1.0)

        assert report.passed
        assert report.max_violation <= 1e-10

    def test_unordered_data_rejected(self):
        with pytest.raises(ConfigError):
            comparison_check(self.problem, self.domain, np.ones(32), np.zeros(32), 1.0)

    def test_shift_equivariance(self):
        # a whole-period shift of the datum shifts the solution on a periodic domain
        u0 = np.random.default_rng(1).random(self.domain.grid.size)
        u0[:2] = 0.0, 1.0

        a = evolve(self.problem, self.domain, u0, 1.0).final.values
        b = evolve(self.problem, self.domain, np.roll(u0, 8), 1.0).final.values

        np.testing.assert_allclose(np.roll(a, 8), b, atol=1e-12)


class TestSnapshotWriter:
    """Test cases for snapshot artifacts."""

    def test_writes_snapshots_and_manifest(self, tmp_path):
        writer = ArtifactWriter(str(tmp_path))
        domain = Domain(Grid(1, 10, (40,), origin=(-20,)), clamped_axes=(0,))
        u0 = planar_datum(domain, np.ones(10), np.zeros(10), np.array([1.0]))
        snapshots = SnapshotWriter(writer, domain, cadence=50)

        evolve(cubic_problem(), domain, u0, 1.0, [snapshots], dt=0.01)

        with open(os.path.join(tmp_path, 'snapshot_manifest.json')) as handle:
            manifest = json.load(handle)
        assert len(manifest['snapshots']) == 3
        frame = pd.read_csv(os.path.join(tmp_path, manifest['snapshots'][0]['path']))
        assert list(frame.columns) == ['x', 'u']
        assert len(frame) == domain.grid.size
