"""Tests for weights, greedy set cover, the exhaustive oracle and two-phase selection."""

import math

import numpy as np
import pytest

from src.geometry.types import PointCloud
from src.planning.candidates import Viewpoint
from src.planning.sampling import SampleSet
from src.planning.sensors import AgentClass
from src.planning.visibility import CoverageMatrix
from src.solver.errors import Infeasible, MissingPrior, NoProgress, TooLarge
from src.solver.set_cover import brute_force_cover, greedy_select, order_by_gain
from src.solver.two_phase import two_phase_plan
from src.solver.weights import WeightMode, compute_weights, validate_weights
from src.utils.config import SolverConfig


def make_samples(n: int, weights=None) -> SampleSet:
    return SampleSet(
        points=np.column_stack((np.arange(n, dtype=float), np.zeros(n), np.zeros(n))),
        normals=np.tile([0.0, 0.0, 1.0], (n, 1)),
        triangle_ids=np.arange(n),
        weights=np.ones(n) if weights is None else np.asarray(weights, dtype=float),
    )


def make_matrix(rows, ids=None, samples=None, agent_class=AgentClass.GROUND) -> CoverageMatrix:
    bits = np.asarray(rows, dtype=bool)
    ids = range(len(bits)) if ids is None else ids
    candidates = [Viewpoint(int(i), (0.0, 0.0, 0.0), agent_class) for i in ids]
    return CoverageMatrix(candidates, samples or make_samples(bits.shape[1]), bits)


def random_cover_instance(seed: int):
    """At most 15 candidates over at most 80 unit-weight samples; target is what all of them reach."""
    rng = np.random.default_rng(seed)
    n_candidates = int(rng.integers(4, 16))
    n_samples = int(rng.integers(10, 81))
    bits = rng.random((n_candidates, n_samples)) < rng.uniform(0.2, 0.4)
    bits[0, 0] = True
    return make_matrix(bits), float(bits.any(axis=0).mean())


@pytest.fixture
def trap():
    """Optimum is {0, 1}; greedy is drawn to 2 first."""
    return make_matrix([
        [1, 1, 1, 0, 0, 0],
        [0, 0, 0, 1, 1, 1],
        [1, 1, 0, 1, 1, 0],
    ])


class TestWeights:
    def test_uniform_is_sample_area(self):
        samples = make_samples(4, [0.5, 1.0, 1.5, 2.0])
        np.testing.assert_array_equal(compute_weights(samples), samples.weights)

    def test_density_deficit_discounts_dense_prior(self):
        samples = make_samples(3)
        # 200 prior points piled on sample 0 only.
        prior = PointCloud(np.tile([0.0, 0.0, 0.0], (200, 1)))
        weights = compute_weights(samples, prior, "density_deficit", rho_ref=400.0, radius=0.25)
        density = 200 / (math.pi * 0.25 ** 2)
        assert weights[0] == pytest.approx(1.0 / (1.0 + density / 400.0))
        assert weights[1] == weights[2] == 1.0

    def test_density_deficit_needs_prior(self):
        with pytest.raises(MissingPrior):
            compute_weights(make_samples(3), None, WeightMode.DENSITY_DEFICIT)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            compute_weights(make_samples(3), None, "entropy")

    @pytest.mark.parametrize(
        "weights, message",
        [([1.0, 1.0], "expected 3"), ([1.0, -1.0, 1.0], "non-negative"), ([0.0, 0.0, 0.0], "all zero")],
    )
    def test_validate(self, weights, message):
        with pytest.raises(ValueError, match=message):
            validate_weights(np.array(weights), 3)


class TestGreedySelect:
    """Greedy weighted set cover."""

    def test_picks_largest_gain_first(self):
        matrix = make_matrix([[1, 1, 1, 0, 0], [0, 0, 1, 1, 0], [0, 0, 0, 1, 1]])
        selection = greedy_select(matrix, np.ones(5), target_coverage=1.0, min_gain=0.0)
        assert selection.ids == [0, 2]
        assert selection.gains == [3.0, 2.0]
        assert selection.coverage_fraction == 1.0

    def test_ties_go_to_lowest_id(self):
        matrix = make_matrix([[1, 1, 0], [1, 1, 0], [0, 0, 1]], ids=[5, 2, 9])
        selection = greedy_select(matrix, np.ones(3), target_coverage=1.0, min_gain=0.0)
        assert selection.ids == [2, 9]

    def test_stops_at_target(self):
        matrix = make_matrix([[1, 1, 1, 1, 0], [0, 0, 0, 0, 1]])
        selection = greedy_select(matrix, np.ones(5), target_coverage=0.8, min_gain=0.0)
        assert selection.ids == [0]

    def test_stops_below_min_gain(self):
        matrix = make_matrix([[1, 1, 0], [0, 0, 1]], samples=make_samples(3, [1.0, 1.0, 0.01]))
        selection = greedy_select(matrix, matrix.samples.weights, target_coverage=1.0, min_gain=0.05)
        assert selection.ids == [0]
        assert selection.coverage_fraction == pytest.approx(2.0 / 2.01)

    def test_max_views(self, rng):
        matrix = make_matrix(np.eye(10))
        selection = greedy_select(matrix, np.ones(10), target_coverage=1.0, min_gain=0.0, max_views=4)
        assert len(selection) == 4

    def test_no_progress(self):
        with pytest.raises(NoProgress):
            greedy_select(make_matrix(np.zeros((3, 4))), np.ones(4))

    def test_invalid_target(self, trap):
        with pytest.raises(ValueError):
            greedy_select(trap, np.ones(6), target_coverage=0.0)

    def test_baseline_counts_as_covered(self):
        matrix = make_matrix([[1, 1, 0, 0], [0, 0, 1, 0]])
        baseline = np.array([True, True, False, True])
        selection = greedy_select(matrix, np.ones(4), target_coverage=1.0, min_gain=0.0, baseline=baseline)
        assert selection.picks == [(1, 1.0)]
        np.testing.assert_array_equal(selection.covered, [False, False, True, False])

    def test_covered_is_union_of_rows(self, rng):
        matrix = make_matrix(rng.random((15, 40)) < 0.2)
        selection = greedy_select(matrix, np.ones(40), target_coverage=1.0, min_gain=0.0)
        np.testing.assert_array_equal(selection.covered, matrix.union(selection.ids))

    def test_gains_positive_and_non_increasing(self, rng):
        weights = rng.uniform(0.1, 2.0, size=60)
        matrix = make_matrix(rng.random((25, 60)) < 0.15, samples=make_samples(60, weights))
        selection = greedy_select(matrix, weights, target_coverage=1.0, min_gain=0.0)
        gains = np.array(selection.gains)
        assert np.all(gains > 0)
        assert np.all(np.diff(gains) <= 1e-9)

    @pytest.mark.parametrize("seed", range(100))
    def test_within_logarithmic_factor_of_optimum(self, seed):
        matrix, target = random_cover_instance(seed)
        n_samples = len(matrix.samples)
        greedy = greedy_select(matrix, np.ones(n_samples), target_coverage=target, min_gain=0.0)
        exact = brute_force_cover(matrix, np.ones(n_samples), target)
        assert len(exact) <= len(greedy) <= len(exact) * (1 + math.log(n_samples))

    def test_mean_ratio_to_optimum(self):
        ratios = []
        for seed in range(100):
            matrix, target = random_cover_instance(seed)
            n_samples = len(matrix.samples)
            greedy = greedy_select(matrix, np.ones(n_samples), target_coverage=target, min_gain=0.0)
            exact = brute_force_cover(matrix, np.ones(n_samples), target)
            ratios.append(len(greedy) / len(exact))
        mean_ratio = float(np.mean(ratios))
        print(f"greedy / optimum over 100 instances: mean {mean_ratio:.3f}, worst {max(ratios):.3f}")
        assert 1.0 <= mean_ratio <= 1 + math.log(80)

    def test_exactly_larger_gain_beats_lower_id(self):
        samples = make_samples(2, [1.0, 1.0 + 1e-13])
        matrix = make_matrix([[1, 0], [0, 1]], samples=samples)
        selection = greedy_select(matrix, samples.weights, target_coverage=1.0, min_gain=0.0)
        assert selection.ids == [1, 0]


class TestBruteForce:
    """Exhaustive minimum cover."""

    def test_beats_greedy_on_trap(self, trap):
        greedy = greedy_select(trap, np.ones(6), target_coverage=1.0, min_gain=0.0)
        exact = brute_force_cover(trap, np.ones(6), 1.0)
        assert greedy.ids == [2, 0, 1]
        assert exact.ids == [0, 1]
        assert exact.gains == [3.0, 3.0]

    def test_infeasible(self):
        matrix = make_matrix([[1, 0, 0], [0, 1, 0]])
        with pytest.raises(Infeasible):
            brute_force_cover(matrix, np.ones(3), 1.0)

    def test_too_large(self):
        matrix = make_matrix(np.eye(21))
        with pytest.raises(TooLarge):
            brute_force_cover(matrix, np.ones(21), 1.0)

    def test_order_by_gain(self, trap):
        ordered = order_by_gain(trap, np.ones(6), [1, 2])
        assert ordered.ids == [2, 1]
        assert ordered.gains == [4.0, 1.0]


class TestTwoPhase:
    """Ground first, aerial for the remainder."""

    @pytest.fixture
    def samples(self):
        return make_samples(6)

    def test_aerial_fills_residual(self, samples):
        ground = make_matrix([[1, 1, 1, 0, 0, 0], [1, 1, 0, 0, 0, 0]], samples=samples)
        aerial = make_matrix(
            [[1, 1, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]], ids=[2, 3], samples=samples, agent_class=AgentClass.AERIAL
        )
        cfg = SolverConfig(target_coverage=1.0, min_gain=0.0)
        result = two_phase_plan(ground, aerial, samples.weights, cfg)
        assert result.ground.ids == [0]
        # Aerial gains only count samples the ground robot left uncovered.
        assert result.aerial.picks == [(3, 2.0), (2, 1.0)]
        assert result.combined_fraction == 1.0
        assert result.residual_ids == []
        assert result.viewpoint_ids == [0, 3, 2]
        assert result.warning is None

    def test_residual_ids(self, samples):
        ground = make_matrix([[1, 1, 1, 0, 0, 0]], samples=samples)
        aerial = make_matrix([[0, 0, 0, 1, 0, 0]], ids=[1], samples=samples, agent_class=AgentClass.AERIAL)
        result = two_phase_plan(ground, aerial, samples.weights, SolverConfig(target_coverage=1.0, min_gain=0.0))
        assert result.residual_ids == [4, 5]
        assert result.ground_fraction == pytest.approx(0.5)
        assert result.combined_fraction == pytest.approx(4 / 6)

    def test_stuck_aerial_phase_below_target_raises(self, samples):
        ground = make_matrix([[1, 1, 1, 0, 0, 0]], samples=samples)
        aerial = make_matrix([[1, 1, 0, 0, 0, 0]], ids=[1], samples=samples, agent_class=AgentClass.AERIAL)
        with pytest.raises(NoProgress):
            two_phase_plan(ground, aerial, samples.weights, SolverConfig(target_coverage=0.98, min_gain=0.0))

    def test_stuck_aerial_phase_after_target_met_warns(self, samples):
        ground = make_matrix([[1, 1, 1, 1, 1, 0]], samples=samples)
        aerial = make_matrix([[1, 1, 0, 0, 0, 0]], ids=[1], samples=samples, agent_class=AgentClass.AERIAL)
        result = two_phase_plan(ground, aerial, samples.weights, SolverConfig(target_coverage=0.8, min_gain=0.0))
        assert len(result.aerial) == 0
        assert result.combined_fraction == pytest.approx(5 / 6)
        assert "no progress" in result.warning

    def test_target_met_by_ground_skips_useful_aerial_quietly(self, samples):
        ground = make_matrix([[1, 1, 1, 1, 1, 0]], samples=samples)
        aerial = make_matrix([[0, 0, 0, 0, 0, 1]], ids=[1], samples=samples, agent_class=AgentClass.AERIAL)
        result = two_phase_plan(ground, aerial, samples.weights, SolverConfig(target_coverage=0.8, min_gain=0.0))
        assert len(result.aerial) == 0
        assert result.warning is None

    def test_missing_ground_matrix(self, samples):
        aerial = make_matrix([[1, 1, 1, 1, 1, 1]], ids=[7], samples=samples, agent_class=AgentClass.AERIAL)
        result = two_phase_plan(None, aerial, samples.weights, SolverConfig(min_gain=0.0))
        assert result.ground.ids == []
        assert result.aerial.ids == [7]

    def test_no_matrices(self, samples):
        with pytest.raises(NoProgress):
            two_phase_plan(None, None, samples.weights)

    def test_sample_lists_must_match(self, samples):
        ground = make_matrix([[1, 1, 1, 0, 0, 0]], samples=samples)
        aerial = make_matrix([[1, 1]], ids=[1], agent_class=AgentClass.AERIAL)
        with pytest.raises(ValueError):
            two_phase_plan(ground, aerial, samples.weights)
