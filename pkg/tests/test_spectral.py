"""
Tests for steady states, principal eigenpairs and the state lattice.
"""

import numpy as np
import pytest
import scipy.linalg

from src.terrace_lab.evolve import evolve
from src.terrace_lab.exceptions import LatticeError
from src.terrace_lab.problem import Domain, assemble_diffusion
from src.terrace_lab.problem.schema import Tolerances
from src.terrace_lab.spectral import (
    Stability,
    classify_stability,
    enumerate_stable_states,
    find_steady_state,
    principal_eigenpair,
)
from tests.configs import CUBIC_A, cubic_problem, modulated_cubic_problem


class TestPrincipalEigenpair:
    """Test cases for the principal eigenvalue on the periodic cell."""

    def test_zero_state_of_cubic(self):
        eigenvalue, phi = principal_eigenpair(cubic_problem(), np.zeros(20))

        assert eigenvalue == pytest.approx(-CUBIC_A, abs=1e-10)
        np.testing.assert_allclose(phi, 1.0, atol=1e-10)

    def test_heterogeneous_potential_matches_dense_solve(self):
        problem = modulated_cubic_problem(0.4)
        n = 16
        values = 0.2 + 0.1 * np.cos(2 * np.pi * np.arange(n) / n)
        domain = Domain.periodic_cell(1, n)
        operator = assemble_diffusion(problem, domain).toarray()
        operator += np.diag(problem.reaction.sample(domain.grid).derivative(values))

        eigenvalue, phi = principal_eigenpair(problem, values)

        expected = scipy.linalg.eigh(operator, eigvals_only=True).max()
        assert eigenvalue == pytest.approx(expected, abs=1e-8)
        assert phi.min() > 0
        assert phi.max() == pytest.approx(1.0)

    def test_classification_dead_band(self):
        assert classify_stability(-1e-3, 1e-4) == Stability.STABLE
        assert classify_stability(1e-3, 1e-4) == Stability.UNSTABLE
        assert classify_stability(5e-5, 1e-4) == Stability.MARGINAL


class TestFindSteadyState:
    """Test cases for the Newton solve."""

    def test_polishes_a_perturbed_constant(self):
        problem = modulated_cubic_problem(0.1)
        guess = np.full(20, 0.95)

        state = find_steady_state(problem, guess)

        assert state.residual <= 1e-10
        assert state.is_stable
        assert state.values.max() == pytest.approx(1.0, abs=1e-8)

    def test_unstable_middle_state(self):
        state = find_steady_state(cubic_problem(), np.full(10, 0.31))

        assert state.mean == pytest.approx(CUBIC_A, abs=1e-8)
        assert state.stability == Stability.UNSTABLE
        assert state.eigenvalue == pytest.approx(CUBIC_A * (1 - CUBIC_A), abs=1e-8)


class TestEnumerateStableStates:
    """Test cases for the lattice of stable states."""

    def setup_method(self):
        self.lattice = enumerate_stable_states(cubic_problem(), [0.2, 0.3, 0.5, 0.8], 10,
                                               relaxation_horizon=400.0)

    def test_bistable_lattice(self):
        assert [s.id for s in self.lattice.stable] == ['p0', 'p1']
        assert self.lattice.size == 1
        assert self.lattice.top.mean == pytest.approx(1.0, abs=1e-8)
        assert self.lattice.bottom.mean == pytest.approx(0.0, abs=1e-8)
        assert self.lattice.totally_ordered

    def test_unstable_state_recorded(self):
        assert len(self.lattice.unstable) == 1
        assert self.lattice.unstable[0].mean == pytest.approx(CUBIC_A, abs=1e-8)
        assert self.lattice.by_id('u0') is self.lattice.unstable[0]

    def test_below_and_between(self):
        assert self.lattice.between(self.lattice.top, self.lattice.bottom) == []
        assert [s.id for s in self.lattice.below(self.lattice.bottom).stable] == ['p1']

    def test_unknown_id(self):
        with pytest.raises(LatticeError):
            self.lattice.by_id('p7')

    def test_to_dict(self):
        payload = self.lattice.to_dict()

        assert [s['id'] for s in payload['stable']] == ['p0', 'p1']
        assert payload['totally_ordered'] is True

    def test_zero_must_be_stable(self):
        # for u(1-u)(u+0.2) the zero state is unstable
        problem = cubic_problem(a=-0.2)

        with pytest.raises(LatticeError):
            enumerate_stable_states(problem, [0.5], 10, Tolerances(), relaxation_horizon=400.0)


class TestPerturbationAttraction:
    """Small eigenfunction perturbations of stable states relax back."""

    def setup_method(self):
        self.problem = modulated_cubic_problem(0.1)
        self.lattice = enumerate_stable_states(self.problem, [0.1, 0.9], 20, relaxation_horizon=400.0)
        self.domain = Domain.periodic_cell(1, 20)

    @pytest.mark.parametrize('sign', [1.0, -1.0])
    def test_stable_states_attract(self, sign):
        for state in self.lattice.stable:
            u0 = state.values + sign * 0.05 * state.eigenfunction

            trajectory = evolve(self.problem, self.domain, u0, 60.0, dt=0.05)

            assert np.max(np.abs(trajectory.final.values - state.values)) < 1e-4
