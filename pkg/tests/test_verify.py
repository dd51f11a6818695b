"""
Tests for spreading-shape runs, shape comparison and residual certificates.
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from src.terrace_lab.exceptions import CertificateError, ConfigError, GeometryError
from src.terrace_lab.fronts import shoot_bistable_profile
from src.terrace_lab.problem import Domain, Grid, ReactionSpec, load_config
from src.terrace_lab.problem.schema import SpreadSettings
from src.terrace_lab.spectral import enumerate_stable_states
from src.terrace_lab.verify import (
    MeasuredShape,
    PerturbationParams,
    compact_datum,
    cutoff,
    cutoff_derivative,
    glued_supersolution_residual,
    perturbation_residual,
    shape_bracket,
    shape_match,
    spreading_run,
)
from src.terrace_lab.wulff import ShapePolygon, SpeedField, wulff_shape
from tests.configs import CUBIC_2D, CUBIC_SPEED, cubic_problem


def _circle(radius: float, bins: int = 72) -> MeasuredShape:
    angles = (np.arange(bins) + 0.5) * 2 * np.pi / bins
    radii = np.full(bins, radius)
    contour = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return MeasuredShape(10.0, 'p0', 'p1', angles, radii, contour)


class TestCutoff:
    """Test cases for the smooth blending function."""

    def test_limits(self):
        z = np.array([-5.0, -1.0, 0.0, 1.0, 5.0])

        np.testing.assert_allclose(cutoff(z), [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_nondecreasing_and_smooth(self):
        z = np.linspace(-1.5, 1.5, 3001)
        values = cutoff(z)

        assert np.all(np.diff(values) >= -1e-15)
        numeric = np.gradient(values, z)
        np.testing.assert_allclose(cutoff_derivative(z), numeric, atol=1e-3)
        assert cutoff_derivative(np.array([-1.0, 1.0])).max() == 0.0


class TestPerturbationCertificate:
    """Test cases for the decaying perturbation of stable states."""

    def setup_method(self):
        self.problem = cubic_problem()
        self.lattice = enumerate_stable_states(self.problem, [0.3, 0.5], 20, relaxation_horizon=400.0)

    def test_sweep_passes_for_every_stable_state(self):
        for state in self.lattice.stable:
            report = perturbation_residual(self.problem, state)

            assert report.passed
            assert report.margin > 0
            assert report.branch('super').margin > 0
            assert report.branch('sub').margin > 0
            assert report.min_residual > 0 > report.max_residual
            assert report.attempts[0][0] == pytest.approx(0.1)
            report.raise_for_failure()

    def test_report_serializes(self):
        report = perturbation_residual(self.problem, self.lattice.bottom)

        payload = report.to_dict()

        assert payload['certificate'] == 'perturbation'
        assert payload['state'] == 'p1'
        assert len(payload['margins']) == len(report.times)
        assert set(payload['branches']) == {'super', 'sub'}
        assert payload['margin'] == min(b['margin'] for b in payload['branches'].values())
        assert 'max_residual' in payload['branches']['sub']

    def test_fixed_params(self):
        params = PerturbationParams.for_delta(0.05)

        report = perturbation_residual(self.problem, self.lattice.top, params, times=(0.0, 1.0))

        assert report.params == params
        assert report.times == (0.0, 1.0)
        assert not report.strict

    def test_subsolution_side_fails_alone(self):
        # near u = 1 the cubic bends down, so p - w loses first
        params = PerturbationParams(eta=0.5, sigma=0.0, delta=0.5)

        report = perturbation_residual(self.problem, self.lattice.top, params, times=(0.0,))

        assert report.branch('super').margin == pytest.approx(0.65, abs=1e-6)
        assert report.branch('sub').margin == pytest.approx(-0.2, abs=1e-6)
        assert report.max_residual == pytest.approx(-0.05, abs=1e-6)
        assert not report.passed
        assert report.to_dict()['location']['branch'] == 'sub'
        with pytest.raises(CertificateError, match="sub side"):
            report.raise_for_failure()

    def test_supersolution_side_fails_alone(self):
        params = PerturbationParams(eta=0.25, sigma=0.0, delta=0.25)

        report = perturbation_residual(self.problem, self.lattice.bottom, params, times=(0.0,))

        assert report.branch('super').margin < 0 < report.branch('sub').margin
        assert report.worst.name == 'super'

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            PerturbationParams(eta=0.2, sigma=0.01, delta=0.1)

    def test_unstable_state_rejected(self):
        with pytest.raises(ConfigError):
            perturbation_residual(self.problem, self.lattice.unstable[0])


class TestGluedCertificate:
    """Test cases for the glued supersolution on a single front."""

    def setup_method(self):
        self.problem = cubic_problem()
        lattice = enumerate_stable_states(self.problem, [0.5], 50, relaxation_horizon=400.0)
        speed = shoot_bistable_profile(ReactionSpec.cubic(0.3), 1.0, 0.0).speed
        front = SimpleNamespace(c=speed, upper=lattice.top, lower=lattice.bottom)
        self.terrace = SimpleNamespace(direction=(1,), platforms=(lattice.top, lattice.bottom), fronts=(front,))

    def test_perturbed_front_is_a_supersolution(self):
        report = glued_supersolution_residual(self.problem, self.terrace, epsilon=0.05, eta=1e-3)

        assert report.min_residual >= -1e-3
        assert report.profile_source == 'shooting'
        assert report.switches == ()

    def test_unperturbed_front_has_small_residual(self):
        report = glued_supersolution_residual(self.problem, self.terrace, epsilon=0.0, eta=0.0)

        assert abs(report.min_residual) < 5e-3

    def test_two_dimensional_problem_rejected(self):
        with pytest.raises(ConfigError):
            glued_supersolution_residual(cubic_problem(dimension=2), self.terrace)

    def test_zero_speed_rejected(self):
        front = SimpleNamespace(c=0.0, upper=self.terrace.platforms[0], lower=self.terrace.platforms[1])
        stalled = SimpleNamespace(direction=(1,), platforms=self.terrace.platforms, fronts=(front,))

        with pytest.raises(ConfigError):
            glued_supersolution_residual(self.problem, stalled)


class TestShapeComparison:
    """Test cases for the sandwich and bracket checks."""

    def setup_method(self):
        self.disk = wulff_shape(SpeedField.constant(1.0, 64))

    def test_matching_circle(self):
        report = shape_match(_circle(1.0, bins=720), self.disk, 0.05)

        assert report.passed
        assert report.inner_ratio == pytest.approx(1.0, abs=2e-3)
        assert report.hausdorff < 0.01
        report.raise_for_failure()

    def test_small_circle_fails_inner_bound(self):
        report = shape_match(_circle(0.8), self.disk, 0.05)

        assert not report.inner_ok
        assert report.outer_ok
        with pytest.raises(GeometryError):
            report.raise_for_failure()

    def test_bracket_with_trivial_lower_bound(self):
        report = shape_bracket(_circle(1.0), ShapePolygon.point(), self.disk.scaled(1.1), 0.05)

        assert report.passed
        assert math.isinf(report.inner_ratio)
        assert report.to_dict()['kind'] == 'bracket'

    def test_measured_area(self):
        assert _circle(1.0).area == pytest.approx(math.pi, rel=1e-2)


class TestSpreadingRun:
    """Test cases for compactly supported data."""

    def test_compact_datum(self):
        domain = Domain(Grid(2, 4, (10, 10), origin=(-5, -5)), clamped_axes=(0, 1))

        datum = compact_datum(domain, np.ones((4, 4)), 2.0)

        assert datum.max() == 1.0
        assert datum.sum() * domain.grid.dx ** 2 == pytest.approx(math.pi * 4, rel=0.1)

    def test_one_dimensional_problem_rejected(self):
        with pytest.raises(ConfigError):
            spreading_run(cubic_problem(), None, 5)

    def test_extent_is_required(self):
        with pytest.raises(ConfigError, match="extent_periods"):
            spreading_run(cubic_problem(dimension=2), None, 5, SpreadSettings())

    def test_times_must_be_positive(self):
        with pytest.raises(ConfigError):
            spreading_run(cubic_problem(dimension=2), None, 5, SpreadSettings(extent_periods=10), times=[0.0])

    @pytest.mark.slow
    def test_reduced_spreading_matches_the_disk(self):
        config = load_config(CUBIC_2D)
        run = config.run
        lattice = enumerate_stable_states(config.problem, run.probe_levels, 5,
                                          relaxation_horizon=run.relaxation_horizon)

        shapes = spreading_run(config.problem, lattice, 5, run.spread, dt=run.dt, linear_solver=run.linear_solver)

        assert len(shapes) == 1
        predicted = wulff_shape(SpeedField.constant(CUBIC_SPEED, 64))
        report = shape_match(shapes[0], predicted, run.spread.epsilon)
        assert report.passed
        assert np.mean(shapes[0].radii) == pytest.approx(0.283, rel=0.1)
