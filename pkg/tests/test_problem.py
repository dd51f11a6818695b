"""
Tests for the problem module: config parsing, grids, reactions and the
discrete diffusion operator.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.terrace_lab.exceptions import ConfigError
from src.terrace_lab.problem import (
    DiffusionEntry,
    DiffusionMode,
    DiffusionSpec,
    Domain,
    Grid,
    LatticeDirection,
    PeriodicProblem,
    ReactionSpec,
    assemble_diffusion,
    load_config,
    load_problem,
    sample_reaction,
)
from src.terrace_lab.problem.schema import direction_list
from tests.configs import CUBIC_1D, CUBIC_2D, cubic_problem, modulated_cubic_problem


class TestLoadConfig:
    """Test cases for experiment file parsing."""

    def test_cubic_config(self):
        config = load_config(CUBIC_1D)

        assert config.problem.dimension == 1
        assert config.grid.points_per_period == 20
        assert config.run.horizon == 40.0
        assert config.direction == (1,)
        assert config.problem.is_homogeneous

    def test_nested_sections(self):
        config = load_config(CUBIC_2D)

        assert config.run.linear_solver == 'cg'
        assert config.run.dt == pytest.approx(0.04)
        assert config.run.spread.extent_periods == 64
        assert config.run.spread.times == (60.0,)
        assert config.direction == (1, 0)
        assert len(direction_list(config.run)) == 8

    def test_default_direction_fan(self):
        config = load_config(CUBIC_1D)

        fan = direction_list(config.run)

        assert len(fan) == 16
        assert len(set(fan)) == 16

    def test_unknown_key_names_dotted_path(self):
        text = CUBIC_1D.replace('  horizon: 40', '  horizon: 40\n  tolerances:\n    steady_tolerance: 1e-9')

        with pytest.raises(ConfigError, match=r"run\.tolerances\.steady_tolerance"):
            load_config(text)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="extra"):
            load_config(CUBIC_1D + "extra: 1\n")

    def test_tolerance_override(self):
        text = CUBIC_1D + "  tolerances:\n    zero_speed_tol: 0.01\n"

        config = load_config(text)

        assert config.run.tolerances.zero_speed_tol == 0.01
        assert config.run.tolerances.steady_tol == 1e-10

    def test_fractional_integer_rejected(self):
        text = CUBIC_1D.replace('points_per_period: 20', 'points_per_period: 20.5')

        with pytest.raises(ConfigError, match=r"grid\.points_per_period"):
            load_config(text)

    def test_integral_float_accepted(self):
        config = load_config(CUBIC_1D.replace('points_per_period: 20', 'points_per_period: 20.0'))

        assert config.grid.points_per_period == 20
        assert isinstance(config.grid.points_per_period, int)

    def test_nested_fractional_integer_names_path(self):
        with pytest.raises(ConfigError, match=r"run\.spread\.extent_periods"):
            load_config(CUBIC_2D.replace('extent_periods: 64', 'extent_periods: 64.5'))

    def test_bad_dimension(self):
        with pytest.raises(ConfigError):
            load_config(CUBIC_1D.replace('dimension: 1', 'dimension: 3'))

    def test_bad_solver(self):
        with pytest.raises(ConfigError, match="linear_solver"):
            load_config(CUBIC_1D + "  linear_solver: gmres\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError):
            load_config("problem: [unclosed")

    def test_non_elliptic_diffusion(self):
        text = CUBIC_1D.replace(
            '  reaction:',
            '  diffusion:\n    - constant: 0.5\n      modes:\n        - amplitude: 0.6\n          wavevector: [1]\n'
            '  reaction:',
        )

        with pytest.raises(ConfigError, match="elliptic"):
            load_problem(text)

    def test_quintic_needs_three_roots(self):
        text = CUBIC_1D.replace('kind: cubic', 'kind: quintic\n    roots: [0.5]').replace('    a: 0.3\n', '')

        with pytest.raises(ConfigError, match="three interior roots"):
            load_config(text)


class TestGrid:
    """Test cases for grids and lattice directions."""

    def test_residues_follow_integer_origin(self):
        grid = Grid(1, 4, (3,), origin=(-1,))

        assert grid.shape == (12,)
        assert grid.axis_coordinates(0)[0] == -1.0
        np.testing.assert_array_equal(grid.residues()[0][:8], [0, 1, 2, 3, 0, 1, 2, 3])

    def test_tile_cell_field(self):
        grid = Grid(2, 3, (2, 1))
        cell = np.arange(9.0).reshape(3, 3)

        tiled = grid.tile_cell_field(cell)

        assert tiled.shape == (6, 3)
        np.testing.assert_array_equal(tiled[3:], cell)

    def test_invalid_resolution(self):
        with pytest.raises(ConfigError):
            Grid(1, 1, (4,))

    def test_direction_is_reduced(self):
        direction = LatticeDirection((2, 4))

        assert direction.components == (1, 2)
        assert direction.norm == pytest.approx(np.sqrt(5))

    def test_parse_direction(self):
        assert LatticeDirection.parse('3,4').exact_unit is not None
        assert LatticeDirection.parse('-1').components == (-1,)
        assert (-LatticeDirection.parse('1,0')).components == (-1, 0)

    def test_zero_direction_rejected(self):
        with pytest.raises(ConfigError):
            LatticeDirection((0, 0))
        with pytest.raises(ConfigError):
            LatticeDirection.parse('a,b')


class TestReaction:
    """Test cases for reaction terms."""

    def test_cubic_roots_and_slopes(self):
        reaction = ReactionSpec.cubic(0.3)

        for root in (0.0, 0.3, 1.0):
            assert reaction.evaluate([0.0], root)[0] == pytest.approx(0.0, abs=1e-14)
        assert reaction.evaluate([0.0], 0.0)[1] == pytest.approx(-0.3)
        assert reaction.evaluate([0.0], 1.0)[1] == pytest.approx(-0.7)

    def test_quintic_has_five_roots(self):
        reaction = ReactionSpec.quintic([0.2, 0.5, 0.8])

        np.testing.assert_allclose(sorted(reaction.base.roots().real), [0.0, 0.2, 0.5, 0.8, 1.0], atol=1e-10)

    def test_modulation_breaks_homogeneity(self):
        problem = modulated_cubic_problem(0.1)

        assert not problem.is_homogeneous
        value_0 = sample_reaction(problem, 0.0, 0.5)[0]
        value_half = sample_reaction(problem, 0.5, 0.5)[0]
        assert value_0 - value_half == pytest.approx(2 * 0.1 * 0.25)

    def test_sampled_matches_pointwise(self):
        problem = modulated_cubic_problem(0.2)
        grid = Grid(1, 8, (2,))
        sampled = problem.reaction.sample(grid)
        u = np.linspace(0.0, 1.0, grid.size)

        values = sampled.value(u)

        x = grid.axis_coordinates(0)
        expected = [sample_reaction(problem, xi, ui)[0] for xi, ui in zip(x, u)]
        np.testing.assert_allclose(values, expected, atol=1e-12)

    def test_integral(self):
        reaction = ReactionSpec.cubic(0.5)

        assert reaction.integral(0.0, 1.0) == pytest.approx(0.0, abs=1e-14)


class TestDiffusion:
    """Test cases for the discrete operator."""

    def setup_method(self):
        entry = DiffusionEntry(1.0, (DiffusionMode(0.3, (1, 1)),))
        self.problem = PeriodicProblem(2, DiffusionSpec((entry, DiffusionEntry(0.8))), ReactionSpec.cubic(0.3))

    def test_ellipticity_bounds(self):
        low, high = self.problem.ellipticity

        assert low == pytest.approx(0.7, abs=1e-2)
        assert high == pytest.approx(1.3, abs=1e-2)

    def test_periodic_matrix_is_symmetric_with_zero_row_sums(self):
        domain = Domain(Grid(2, 6, (2, 2)))

        matrix = assemble_diffusion(self.problem, domain)

        assert abs(matrix - matrix.T).max() < 1e-12
        np.testing.assert_allclose(np.asarray(matrix.sum(axis=1)).ravel(), 0.0, atol=1e-9)

    def test_constant_fields_are_in_the_kernel(self):
        domain = Domain(Grid(2, 6, (2, 3)), clamped_axes=(0,))

        matrix = assemble_diffusion(self.problem, domain)

        np.testing.assert_allclose(matrix @ np.ones(domain.grid.size), 0.0, atol=1e-9)

    def test_twist_requires_strip(self):
        with pytest.raises(ConfigError):
            Domain(Grid(2, 4, (2, 2)), twist=1)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            assemble_diffusion(cubic_problem(), Domain(Grid(2, 4, (1, 1))))

    @given(st.integers(min_value=0, max_value=5))
    @settings(max_examples=6, deadline=None)
    def test_shift_by_one_period_commutes(self, shift_cells):
        # on a periodic grid, shifting by whole periods commutes with the operator
        problem = modulated_cubic_problem(0.2)
        n, periods = 6, 6
        domain = Domain(Grid(1, n, (periods,)))
        matrix = assemble_diffusion(problem, domain)
        u = np.random.default_rng(shift_cells).random(domain.grid.size)
        shift = shift_cells * n

        np.testing.assert_allclose(np.roll(matrix @ u, shift), matrix @ np.roll(u, shift), atol=1e-9)
