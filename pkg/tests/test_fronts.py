"""
Tests for front speeds, profiles and the shooting reference.
"""

from dataclasses import replace

import numpy as np
import pytest

from src.terrace_lab.exceptions import ConfigError, SpeedFitError
from src.terrace_lab.fronts import (
    FrontSettings,
    SpeedEstimate,
    bistable_speed,
    counter_propagation_check,
    directional_domain,
    reflect_state,
    shoot_bistable_profile,
)
from src.terrace_lab.problem import LatticeDirection, ReactionSpec
from src.terrace_lab.spectral import enumerate_stable_states
from tests.configs import CUBIC_SPEED, cubic_problem, modulated_cubic_problem

EAST = LatticeDirection((1,))


class TestShooting:
    """Test cases for the homogeneous profile ODE."""

    def test_cubic_speed(self):
        profile = shoot_bistable_profile(ReactionSpec.cubic(0.3), 1.0, 0.0)

        assert profile.speed == pytest.approx(CUBIC_SPEED, abs=1e-3)

    def test_profile_is_centred_and_decreasing(self):
        profile = shoot_bistable_profile(ReactionSpec.cubic(0.3), 1.0, 0.0)

        assert profile(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-3)
        assert np.all(np.diff(profile.values) <= 1e-12)
        assert profile.derivative(np.array([0.0]))[0] < 0

    def test_balanced_cubic_has_zero_speed(self):
        profile = shoot_bistable_profile(ReactionSpec.cubic(0.5), 1.0, 0.0)

        assert abs(profile.speed) < 1e-4

    def test_diffusivity_scales_speed(self):
        profile = shoot_bistable_profile(ReactionSpec.cubic(0.3), 1.0, 0.0, diffusivity=4.0)

        assert profile.speed == pytest.approx(2 * CUBIC_SPEED, abs=2e-3)


class TestSpeedEstimate:
    """Test cases for the position regression."""

    def test_linear_positions(self):
        times = np.linspace(10.0, 20.0, 11)

        estimate = SpeedEstimate.fit(times, 0.25 * times + 3.0)

        assert estimate.value == pytest.approx(0.25)
        assert estimate.r2 == pytest.approx(1.0)
        assert abs(estimate.drift) < 1e-10
        assert estimate.intercept(times, 0.25 * times + 3.0) == pytest.approx(3.0)

    def test_pinned_positions(self):
        estimate = SpeedEstimate.fit(np.arange(6.0), np.full(6, 2.0))

        assert estimate.value == 0.0
        assert estimate.stderr == 0.0

    def test_nan_samples_dropped(self):
        positions = np.array([np.nan, np.nan, 1.0, 2.0, np.nan])

        with pytest.raises(SpeedFitError):
            SpeedEstimate.fit(np.arange(5.0), positions)


class TestDirectionalDomain:
    """Test cases for front domains."""

    def test_one_dimensional_segment(self):
        domain = directional_domain(cubic_problem(), EAST, 10, 20)

        assert domain.grid.shape == (200,)
        assert domain.grid.axis_coordinates(0)[0] == -10.0

    def test_rational_direction_strip(self):
        problem = cubic_problem(dimension=2)

        domain = directional_domain(problem, LatticeDirection((2, -1)), 4, 10)

        assert domain.grid.shape == (40, 8)
        assert domain.twist == -1

    def test_vertical_direction(self):
        domain = directional_domain(cubic_problem(dimension=2), LatticeDirection((0, 1)), 4, 10)

        assert domain.grid.shape == (4, 40)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            directional_domain(cubic_problem(), LatticeDirection((1, 0)), 4, 10)


class TestBistableSpeed:
    """Test cases for measured pulsating fronts."""

    def setup_method(self):
        self.problem = cubic_problem()
        self.lattice = enumerate_stable_states(self.problem, [0.3, 0.5], 20, relaxation_horizon=400.0)
        self.settings = FrontSettings(points_per_period=20, extent_periods=80, horizon=40.0)

    def test_cubic_speed_matches_shooting(self):
        record = bistable_speed(self.problem, EAST, self.lattice.top, self.lattice.bottom, self.settings)

        assert record.c == pytest.approx(CUBIC_SPEED, rel=0.03)
        assert record.fit_window == (20.0, 40.0)
        assert record.profile is not None
        assert record.profile.monotonicity_defect <= self.settings.tolerances.monotone_tol
        assert record.to_dict()['q_upper_id'] == 'p0'

    def test_profile_matches_shooting_up_to_shift(self):
        record = bistable_speed(self.problem, EAST, self.lattice.top, self.lattice.bottom, self.settings)
        oracle = shoot_bistable_profile(ReactionSpec.cubic(0.3), 1.0, 0.0)

        _, distance = record.profile.displacement_from(oracle, around=record.profile.center)

        assert distance < 0.02

    def test_backward_direction_has_same_speed(self):
        forward = bistable_speed(self.problem, EAST, self.lattice.top, self.lattice.bottom,
                                 self.settings, extract=False)
        backward = bistable_speed(self.problem, -EAST, self.lattice.top, self.lattice.bottom,
                                  self.settings, extract=False)

        assert backward.c == pytest.approx(forward.c, rel=1e-4)

    def test_unordered_endpoints_rejected(self):
        with pytest.raises(ConfigError):
            bistable_speed(self.problem, EAST, self.lattice.bottom, self.lattice.top, self.settings)

    def test_unstable_endpoint_rejected(self):
        with pytest.raises(ConfigError):
            bistable_speed(self.problem, EAST, self.lattice.top, self.lattice.unstable[0], self.settings)

    def test_balanced_front_is_flagged(self):
        problem = cubic_problem(a=0.5)
        lattice = enumerate_stable_states(problem, [0.8], 20, relaxation_horizon=400.0)

        record = bistable_speed(problem, EAST, lattice.top, lattice.bottom, self.settings)

        assert abs(record.c) <= 5e-3
        assert 'zero_speed' in record.flags
        assert record.profile is None

    @pytest.mark.slow
    def test_fine_grid_speed(self):
        settings = FrontSettings(points_per_period=50, extent_periods=80, horizon=60.0)

        record = bistable_speed(self.problem, EAST, self.lattice.top, self.lattice.bottom, settings)

        assert record.c == pytest.approx(CUBIC_SPEED, rel=0.02)


class TestSpeedInvariance:
    """Test cases for speeds that must not depend on how the run is set up."""

    def test_shifted_datum_gives_same_speed(self):
        problem = modulated_cubic_problem()
        lattice = enumerate_stable_states(problem, [0.3, 0.5], 10, relaxation_horizon=400.0)
        settings = FrontSettings(points_per_period=10, extent_periods=80, horizon=40.0)

        base = bistable_speed(problem, EAST, lattice.top, lattice.bottom, settings, extract=False)
        shifted = bistable_speed(problem, EAST, lattice.top, lattice.bottom,
                                 replace(settings, datum_offset=3.0), extract=False)

        assert shifted.c == pytest.approx(base.c, rel=1e-4)
        assert shifted.speed.r2 >= settings.tolerances.r2_min

    @pytest.mark.slow
    def test_speed_converges_at_second_order(self):
        problem = cubic_problem()
        speeds = []
        for n in (8, 16, 32):
            lattice = enumerate_stable_states(problem, [0.5], n, relaxation_horizon=400.0)
            settings = FrontSettings(points_per_period=n, extent_periods=60, horizon=30.0)
            speeds.append(bistable_speed(problem, EAST, lattice.top, lattice.bottom, settings, extract=False).c)

        order = np.log2(abs(speeds[0] - speeds[1]) / abs(speeds[1] - speeds[2]))

        assert 1.4 < order < 2.6
        assert speeds[2] == pytest.approx(CUBIC_SPEED, rel=0.02)

    @pytest.mark.slow
    def test_homogeneous_plane_speeds_agree_across_directions(self):
        problem = cubic_problem(dimension=2)
        lattice = enumerate_stable_states(problem, [0.5], 5, relaxation_horizon=400.0)
        settings = FrontSettings(points_per_period=5, extent_periods=60, horizon=24.0)

        speeds = {
            components: bistable_speed(problem, LatticeDirection(components), lattice.top, lattice.bottom,
                                       settings, extract=False).c
            for components in [(1, 0), (0, 1), (3, 4)]
        }

        assert directional_domain(problem, LatticeDirection((3, 4)), 5, 60).twist == 4
        assert speeds[(0, 1)] == pytest.approx(speeds[(1, 0)], rel=1e-3)
        assert speeds[(3, 4)] == pytest.approx(speeds[(1, 0)], rel=0.05)
        assert speeds[(1, 0)] == pytest.approx(CUBIC_SPEED, rel=0.05)


class TestCounterPropagation:
    """Test cases for fronts around an unstable state."""

    def setup_method(self):
        self.problem = cubic_problem()
        self.lattice = enumerate_stable_states(self.problem, [0.3, 0.5], 10, relaxation_horizon=400.0)

    def test_reflected_state(self):
        middle = self.lattice.unstable[0]

        mirrored = reflect_state(middle, self.lattice.top)

        np.testing.assert_allclose(mirrored.values, 0.7, atol=1e-8)
        assert mirrored.id == 'u0*'

    def test_stable_state_rejected(self):
        with pytest.raises(ConfigError):
            counter_propagation_check(self.problem, self.lattice.top, self.lattice.top,
                                      self.lattice.bottom, self.lattice.top, EAST)

    @pytest.mark.slow
    def test_both_neighbours_invade(self):
        settings = FrontSettings(points_per_period=10, extent_periods=200, horizon=40.0)

        report = counter_propagation_check(self.problem, self.lattice.unstable[0], self.lattice.top,
                                           self.lattice.bottom, self.lattice.top, EAST, settings)

        assert report.signs_ok
        assert report.invading_speed > 0
        assert report.receding_speed < 0
