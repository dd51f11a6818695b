"""
Tests for terrace construction, merge policies and terrace comparison.
"""

import logging
from types import SimpleNamespace

import pytest

from src.terrace_lab.exceptions import (
    BracketViolationError,
    ConfigError,
    MarginalStateError,
    MultipleSpeedsError,
    TerraceConstructionError,
    TerraceMismatchError,
)
from src.terrace_lab.fronts import FrontRecord, FrontSettings, SpeedEstimate
from src.terrace_lab.problem import LatticeDirection, load_config
from src.terrace_lab.spectral import enumerate_stable_states
from src.terrace_lab.terrace import (
    MERGE_POLICIES,
    FrontMeasurer,
    build_terrace,
    compare_terraces,
    make_merge_policy,
    merge_order_invariance_check,
    observe_terrace_from_cauchy,
    plateau_discrepancies,
    speeds_nondecreasing,
)
from tests.configs import CUBIC_SPEED, MERGE_1D, TRISTABLE_1D, cubic_problem

EAST = LatticeDirection((1,))


def _estimate(c: float, se: float = 0.0) -> SpeedEstimate:
    return SpeedEstimate(value=c, stderr=se, r2=1.0, drift=0.0, samples=10)


class FakeLattice:
    """Totally ordered states p0 > p1 > ... identified by id only."""

    def __init__(self, size: int, totally_ordered: bool = True, marginal=()):
        self.stable = [SimpleNamespace(id=f'p{k}', mean=1.0 - k / size) for k in range(size + 1)]
        self.totally_ordered = totally_ordered
        self.intersections = [] if totally_ordered else [('p0', 'p1')]
        self.marginal = tuple(marginal)

    def between(self, upper, lower):
        return [s for s in self.stable if lower.mean < s.mean < upper.mean]


class ScriptedMeasurer(FrontMeasurer):
    """Returns scripted speeds; 'split' scripts a front that does not connect."""

    def __init__(self, script):
        super().__init__(problem=None, direction=EAST)
        self.script = script
        self.calls = []

    def prefetch(self, pairs):
        pass

    def measure(self, upper, lower, intermediate=()):
        self.calls.append((upper.id, lower.id))
        speed = self.script[(upper.id, lower.id)]
        if speed == 'split':
            raise MultipleSpeedsError("split", speeds=[0.1, 0.4])
        return FrontRecord(EAST.components, upper, lower, _estimate(speed), (0.0, 1.0))


class TestMergePolicies:
    """Test cases for descent selection."""

    def test_registry(self):
        assert set(MERGE_POLICIES) == {'leftmost', 'rightmost'}

    def test_selection(self):
        assert make_merge_policy('leftmost').select([3, 1, 2]) == 1
        assert make_merge_policy('rightmost').select([3, 1, 2]) == 3

    def test_unknown_policy(self):
        with pytest.raises(ConfigError, match="Available"):
            make_merge_policy('middle')


class TestBuildTerraceScripted:
    """Test cases for the merge loop with scripted front speeds."""

    def setup_method(self):
        self.lattice = FakeLattice(3)

    def test_no_descent_keeps_every_platform(self):
        measurer = ScriptedMeasurer({('p0', 'p1'): 0.1, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.3})

        terrace = build_terrace(None, self.lattice, EAST, measurer=measurer)

        assert terrace.platform_ids == ['p0', 'p1', 'p2', 'p3']
        assert terrace.size == 3
        assert terrace.merges == ()
        assert terrace.unique_certified

    def test_single_merge(self):
        measurer = ScriptedMeasurer({
            ('p0', 'p1'): 0.5, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.6, ('p0', 'p2'): 0.3,
        })

        terrace = build_terrace(None, self.lattice, EAST, measurer=measurer)

        assert terrace.platform_ids == ['p0', 'p2', 'p3']
        assert [s.value for s in terrace.speeds] == [0.3, 0.6]
        assert terrace.merges[0].removed_id == 'p1'
        assert terrace.to_dict()['merges'][0]['c_merged'] == 0.3

    @pytest.mark.parametrize('policy', ['leftmost', 'rightmost'])
    def test_merge_order_does_not_change_result(self, policy):
        measurer = ScriptedMeasurer({
            ('p0', 'p1'): 0.6, ('p1', 'p2'): 0.4, ('p2', 'p3'): 0.2,
            ('p0', 'p2'): 0.5, ('p1', 'p3'): 0.3, ('p0', 'p3'): 0.3,
        })

        terrace = build_terrace(None, self.lattice, EAST, policy=policy, measurer=measurer)

        assert terrace.platform_ids == ['p0', 'p3']
        assert terrace.speeds[0].value == 0.3
        assert len(terrace.merges) == 2
        assert terrace.policy == policy

    def test_policy_sets_merge_order(self):
        script = {
            ('p0', 'p1'): 0.6, ('p1', 'p2'): 0.4, ('p2', 'p3'): 0.2,
            ('p0', 'p2'): 0.5, ('p1', 'p3'): 0.3, ('p0', 'p3'): 0.3,
        }
        leftmost, rightmost = ScriptedMeasurer(script), ScriptedMeasurer(script)

        build_terrace(None, self.lattice, EAST, policy='leftmost', measurer=leftmost)
        build_terrace(None, self.lattice, EAST, policy='rightmost', measurer=rightmost)

        assert ('p0', 'p2') in leftmost.calls and ('p1', 'p3') not in leftmost.calls
        assert ('p1', 'p3') in rightmost.calls and ('p0', 'p2') not in rightmost.calls

    def test_merged_speed_outside_bracket(self):
        measurer = ScriptedMeasurer({
            ('p0', 'p1'): 0.5, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.6, ('p0', 'p2'): 0.9,
        })

        with pytest.raises(BracketViolationError):
            build_terrace(None, self.lattice, EAST, measurer=measurer)

    def test_unresolved_split(self):
        measurer = ScriptedMeasurer({
            ('p0', 'p1'): 0.5, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.6, ('p0', 'p2'): 'split',
        })

        with pytest.raises(TerraceConstructionError):
            build_terrace(None, self.lattice, EAST, measurer=measurer)

    def test_small_descent_within_floor_is_ignored(self):
        measurer = ScriptedMeasurer({('p0', 'p1'): 0.202, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.3})

        terrace = build_terrace(None, self.lattice, EAST, measurer=measurer)

        assert terrace.size == 3

    def test_zero_speed_withdraws_uniqueness(self):
        measurer = ScriptedMeasurer({('p0', 'p1'): 0.0, ('p1', 'p2'): 0.2, ('p2', 'p3'): 0.3})

        terrace = build_terrace(None, self.lattice, EAST, measurer=measurer)

        assert not terrace.unique_certified
        assert terrace.flags['zero_speed']

    def test_intersecting_states_rejected(self):
        with pytest.raises(ConfigError):
            build_terrace(None, FakeLattice(2, totally_ordered=False), EAST, measurer=ScriptedMeasurer({}))

    def test_marginal_state_blocks_construction(self):
        marginal = SimpleNamespace(id='m0', mean=0.5, eigenvalue=1e-9)
        measurer = ScriptedMeasurer({('p0', 'p1'): 0.3})

        with pytest.raises(MarginalStateError, match="m0"):
            build_terrace(None, FakeLattice(1, marginal=(marginal,)), EAST, measurer=measurer)
        assert measurer.calls == []
        assert MarginalStateError.exit_code == 3


class TestMergeOrderScripted:
    """Test cases for the merge-order check with scripted front speeds."""

    def setup_method(self):
        self.script = {
            ('p0', 'p1'): 0.6, ('p1', 'p2'): 0.4, ('p2', 'p3'): 0.2,
            ('p0', 'p2'): 0.5, ('p1', 'p3'): 0.3, ('p0', 'p3'): 0.3,
        }

    def test_both_orders_agree(self):
        measurer = ScriptedMeasurer(self.script)

        report = merge_order_invariance_check(None, FakeLattice(3), EAST, measurer=measurer)

        assert report.passed
        assert report.platforms == {'leftmost': ['p0', 'p3'], 'rightmost': ['p0', 'p3']}
        assert report.speeds['rightmost'] == [0.3]
        assert report.max_speed_gap == 0.0
        assert ('p0', 'p2') in measurer.calls and ('p1', 'p3') in measurer.calls

    def test_marginal_state_blocks_check(self):
        lattice = FakeLattice(3, marginal=(SimpleNamespace(id='m0', mean=0.4, eigenvalue=0.0),))

        with pytest.raises(MarginalStateError):
            merge_order_invariance_check(None, lattice, EAST, measurer=ScriptedMeasurer(self.script))


class TestPlateauDiscrepancies:
    """Test cases for the plateau records logged by the Cauchy observation."""

    def setup_method(self):
        self.states = [SimpleNamespace(id=f'p{k}') for k in range(3)]
        self.levels = [0.75, 0.25]

    def test_one_record_per_plateau(self, caplog):
        with caplog.at_level(logging.WARNING, logger='terrace_lab'):
            records = plateau_discrepancies(self.states, self.levels, [[0], [1]],
                                            [_estimate(0.1), _estimate(0.3)], {'p1': 7.0}, 40.0)

        assert len(records) == 1
        record = records[0]
        assert record.state_id == 'p1'
        assert record.levels == (0.75, 0.25)
        assert record.measured_width == 7.0
        assert record.predicted_width == pytest.approx(8.0)
        assert record.to_dict()['c_ahead'] == 0.3
        assert 'Plateau discrepancy at p1' in caplog.text
        assert 'measured vs 8 predicted' in caplog.text

    def test_single_transition_has_no_plateau(self):
        records = plateau_discrepancies(self.states, self.levels, [[0, 1]], [_estimate(0.2)], {}, 40.0)

        assert records == []


class TestSpeedsNondecreasing:
    """Test cases for the monotonicity predicate."""

    def test_increasing(self):
        assert speeds_nondecreasing([_estimate(0.1), _estimate(0.2)], 1e-3)

    def test_descent_within_error_bars(self):
        assert speeds_nondecreasing([_estimate(0.2, 0.01), _estimate(0.19, 0.01)], 1e-3)

    def test_descent(self):
        assert not speeds_nondecreasing([_estimate(0.3), _estimate(0.2)], 1e-3)


class TestCompareTerraces:
    """Test cases for terrace comparison."""

    def _terrace(self, ids, speeds, direction=(1,)):
        return SimpleNamespace(direction=direction, size=len(speeds), platform_ids=ids,
                               speeds=[_estimate(c, 1e-3) for c in speeds], profiles=[None] * len(speeds))

    def test_matching(self):
        report = compare_terraces(self._terrace(['p0', 'p2'], [0.3]), self._terrace(['p0', 'p2'], [0.302]))

        assert report.passed
        report.raise_for_failure()

    def test_speed_mismatch(self):
        report = compare_terraces(self._terrace(['p0', 'p2'], [0.3]), self._terrace(['p0', 'p2'], [0.4]))

        assert report.size_match
        assert not report.speeds_match
        with pytest.raises(TerraceMismatchError):
            report.raise_for_failure()

    def test_platform_mismatch(self):
        report = compare_terraces(self._terrace(['p0', 'p1', 'p2'], [0.1, 0.3]),
                                  self._terrace(['p0', 'p2'], [0.2]))

        assert not report.size_match
        assert not report.passed

    def test_direction_mismatch(self):
        with pytest.raises(ConfigError):
            compare_terraces(self._terrace(['p0'], [], (1, 0)), self._terrace(['p0'], [], (0, 1)))


class TestBuildTerrace:
    """Test cases with measured fronts."""

    def test_bistable_terrace_is_a_single_front(self):
        problem = cubic_problem()
        lattice = enumerate_stable_states(problem, [0.5], 10, relaxation_horizon=400.0)
        settings = FrontSettings(points_per_period=10, extent_periods=80, horizon=40.0)

        terrace = build_terrace(problem, lattice, EAST, settings)

        assert terrace.size == 1
        assert terrace.platform_ids == ['p0', 'p1']
        assert terrace.speeds[0].value == pytest.approx(CUBIC_SPEED, rel=0.05)

    def test_bistable_cauchy_run_shows_one_transition(self):
        problem = cubic_problem()
        lattice = enumerate_stable_states(problem, [0.5], 10, relaxation_horizon=400.0)
        settings = FrontSettings(points_per_period=10, extent_periods=80, horizon=40.0)

        observed = observe_terrace_from_cauchy(problem, lattice, EAST, settings)

        assert observed.platform_ids == ['p0', 'p1']
        assert observed.size == 1
        assert observed.speeds[0].value == pytest.approx(CUBIC_SPEED, rel=0.05)
        assert observed.discrepancies == ()
        assert observed.to_dict()['plateau_discrepancies'] == []

    @pytest.mark.slow
    def test_tristable_terrace_keeps_middle_platform(self):
        config = load_config(TRISTABLE_1D)
        settings = FrontSettings.from_config(config)
        lattice = enumerate_stable_states(config.problem, config.run.probe_levels,
                                          settings.points_per_period, relaxation_horizon=400.0)

        terrace = build_terrace(config.problem, lattice, EAST, settings)
        observed = observe_terrace_from_cauchy(config.problem, lattice, EAST, settings)

        assert lattice.size == 2
        assert terrace.size == 2
        assert terrace.speeds[0].value < terrace.speeds[1].value
        assert compare_terraces(terrace, observed, settings.tolerances).passed

    @pytest.mark.slow
    def test_merge_removes_middle_platform(self):
        config = load_config(MERGE_1D)
        settings = FrontSettings.from_config(config)
        lattice = enumerate_stable_states(config.problem, config.run.probe_levels,
                                          settings.points_per_period, relaxation_horizon=400.0)

        report = merge_order_invariance_check(config.problem, lattice, EAST, settings)

        assert report.passed
        assert report.platforms['leftmost'] == ['p0', 'p2']
