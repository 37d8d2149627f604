"""Tests for superexpert comparators and the loss-bound calculators."""

import itertools
import math

import numpy as np
import pytest

from anomix.aggregator import Method
from anomix.oracle import (
    BoundInputs,
    SuperexpertSpec,
    best_superexpert,
    corollary_bound,
    fixed_share_bound,
    superexpert_avg_loss,
    superexpert_step_losses,
    tuned_alpha,
    variable_share_bound,
)


def enumerate_superexperts(t_total, n_experts, k):
    """Every (boundaries, experts) pair with at most k switches."""
    for switches in range(k + 1):
        for cuts in itertools.combinations(range(2, t_total + 1), switches):
            boundaries = (1,) + cuts + (t_total + 1,)
            for experts in itertools.product(range(n_experts), repeat=switches + 1):
                if any(experts[j] == experts[j + 1] for j in range(switches)):
                    continue
                yield boundaries, experts


def brute_force_best(matrix, k):
    """Reference for best_superexpert: enumerate every candidate.

    Losses accumulate step by step in the same order the dynamic program
    adds them, so exact float ties agree; ties resolve toward fewer
    switches, then the smallest (boundaries, experts).
    """
    t_total, n = matrix.shape
    best = None
    for boundaries, experts in enumerate_superexperts(t_total, n, k):
        total = 0.0
        seg = 0
        for t in range(t_total):
            if t + 1 >= boundaries[seg + 1]:
                seg += 1
            total = total + matrix[t, experts[seg]]
        cand = (total, len(experts) - 1, boundaries, experts)
        if best is None or cand < best:
            best = cand
    return best[0], best[2], best[3]


class TestSuperexpertSpec:
    def test_counts_switches_and_steps(self):
        spec = SuperexpertSpec((1, 3, 7, 11), (0, 2, 1))
        assert spec.k == 2
        assert spec.t_total == 10

    def test_first_boundary_must_be_one(self):
        with pytest.raises(ValueError):
            SuperexpertSpec((2, 5), (0,))

    def test_boundaries_strictly_increase(self):
        with pytest.raises(ValueError):
            SuperexpertSpec((1, 4, 4), (0, 1))

    def test_adjacent_experts_differ(self):
        with pytest.raises(ValueError):
            SuperexpertSpec((1, 3, 5), (1, 1))

    def test_segment_count_matches_boundaries(self):
        with pytest.raises(ValueError):
            SuperexpertSpec((1, 3, 5), (0,))

    def test_negative_expert_rejected(self):
        with pytest.raises(ValueError):
            SuperexpertSpec((1, 5), (-1,))


class TestSuperexpertStepLosses:
    def test_no_switches_is_a_column(self):
        rng = np.random.default_rng(20)
        m = rng.random((6, 3))
        spec = SuperexpertSpec((1, 7), (2,))
        np.testing.assert_array_equal(superexpert_step_losses(spec, m), m[:, 2])

    def test_two_by_two_exhaustive_case(self):
        m = np.array([[1.0, 0.0], [0.0, 1.0]])
        stay_then_switch = SuperexpertSpec((1, 2, 3), (0, 1))
        other_way = SuperexpertSpec((1, 2, 3), (1, 0))
        assert superexpert_avg_loss(stay_then_switch, m) == 2.0
        assert superexpert_avg_loss(other_way, m) == 0.0

    def test_matches_per_segment_summation(self):
        rng = np.random.default_rng(21)
        m = rng.random((5, 3))
        spec = SuperexpertSpec((1, 2, 4, 6), (1, 0, 2))
        wanted = m[0, 1] + m[1:3, 0].sum() + m[3:5, 2].sum()
        assert superexpert_avg_loss(spec, m) == pytest.approx(wanted, rel=1e-15)

    def test_matrix_length_must_match(self):
        spec = SuperexpertSpec((1, 4), (0,))
        with pytest.raises(ValueError):
            superexpert_step_losses(spec, np.zeros((5, 2)))

    def test_expert_must_exist(self):
        spec = SuperexpertSpec((1, 4), (7,))
        with pytest.raises(ValueError):
            superexpert_step_losses(spec, np.zeros((3, 2)))


class TestBestSuperexpert:
    def test_no_switches_picks_best_column(self):
        m = np.array([[0.5, 0.1], [0.5, 0.4], [0.5, 0.3]])
        spec, value = best_superexpert(m, 0)
        assert spec.experts == (1,)
        assert value == pytest.approx(0.8, rel=1e-15)

    def test_single_expert_any_budget(self):
        m = np.arange(6, dtype=float).reshape(6, 1)
        spec, value = best_superexpert(m, 3)
        assert spec.experts == (0,)
        assert value == 15.0

    def test_finds_the_obvious_switch(self):
        m = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
        spec, value = best_superexpert(m, 1)
        assert value == 0.0
        assert spec.boundaries == (1, 3, 5)
        assert spec.experts == (0, 1)

    def test_budget_is_an_upper_limit(self):
        m = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        spec, value = best_superexpert(m, 2)
        assert spec.k == 0 and value == 0.0

    def test_ties_resolve_to_smallest_labeling(self):
        m = np.zeros((3, 2))
        spec, value = best_superexpert(m, 1)
        assert value == 0.0
        assert spec.boundaries == (1, 4)
        assert spec.experts == (0,)

    def test_value_is_consistent_with_spec(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            m = rng.random((7, 3))
            spec, value = best_superexpert(m, 2)
            assert value == pytest.approx(superexpert_avg_loss(spec, m), rel=1e-12)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            t = int(rng.integers(1, 8))
            n = int(rng.integers(1, 4))
            k = int(rng.integers(0, min(3, t)))
            m = rng.random((t, n))
            spec, value = best_superexpert(m, k)
            loss, boundaries, experts = brute_force_best(m, k)
            assert value == loss
            assert spec.boundaries == boundaries
            assert spec.experts == experts

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(24)
        for _ in range(60):
            t = int(rng.integers(2, 7))
            n = int(rng.integers(2, 4))
            k = int(rng.integers(0, min(3, t)))
            m = rng.integers(0, 2, size=(t, n)).astype(float)
            spec, value = best_superexpert(m, k)
            loss, boundaries, experts = brute_force_best(m, k)
            assert value == loss
            assert spec.boundaries == boundaries
            assert spec.experts == experts

    def test_budget_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            best_superexpert(np.zeros((3, 2)), 3)
        with pytest.raises(ValueError):
            best_superexpert(np.zeros((3, 2)), -1)


def inputs(**kw):
    base = dict(
        c=1.0, eta=1.0, n_experts=2, k=0, t_total=10, alpha=0.1,
        superexpert_avg_loss=1.0,
    )
    base.update(kw)
    return BoundInputs(**base)


class TestBoundInputs:
    def test_switch_budget_needs_steps(self):
        with pytest.raises(ValueError):
            inputs(k=10, t_total=10)

    def test_switching_needs_two_experts(self):
        with pytest.raises(ValueError):
            inputs(n_experts=1, k=1)

    def test_loss_must_be_finite_non_negative(self):
        with pytest.raises(ValueError):
            inputs(superexpert_avg_loss=-1.0)
        with pytest.raises(ValueError):
            inputs(superexpert_avg_loss=math.inf)

    def test_alpha_endpoint_one_is_representable(self):
        assert inputs(alpha=1.0).alpha == 1.0


class TestFixedShareBound:
    def test_no_switching_reduces_to_plain_aggregator(self):
        got = fixed_share_bound(inputs(k=0, alpha=0.0, n_experts=5, eta=2.0))
        assert got == pytest.approx(1.0 + 0.5 * math.log(5.0), rel=1e-15)

    def test_three_log_two_case(self):
        got = fixed_share_bound(
            inputs(n_experts=2, k=1, t_total=3, alpha=0.5, superexpert_avg_loss=0.0)
        )
        assert got == pytest.approx(2.0794415416798357, rel=1e-14)

    def test_frozen_tuned_case(self):
        got = fixed_share_bound(
            inputs(
                n_experts=5, k=3, t_total=100, alpha=3.0 / 99.0, eta=2.0,
                superexpert_avg_loss=7.5,
            )
        )
        assert got == pytest.approx(17.105961456100784, rel=1e-14)

    def test_degenerate_alpha_gives_infinity(self):
        assert fixed_share_bound(inputs(k=1, alpha=0.0)) == math.inf
        assert fixed_share_bound(inputs(k=1, alpha=1.0)) == math.inf
        assert fixed_share_bound(inputs(k=0, alpha=1.0, t_total=10)) == math.inf

    def test_alpha_one_with_all_steps_switching(self):
        got = fixed_share_bound(inputs(k=0, alpha=1.0, t_total=1))
        assert got == pytest.approx(1.0 + math.log(2.0), rel=1e-15)

    def test_monotone_in_superexpert_loss(self):
        lo = fixed_share_bound(inputs(superexpert_avg_loss=1.0))
        hi = fixed_share_bound(inputs(superexpert_avg_loss=2.0))
        assert hi > lo


class TestVariableShareBound:
    def test_no_switching_alpha_zero_reduces_to_plain(self):
        got = variable_share_bound(inputs(k=0, alpha=0.0, n_experts=3, eta=2.0))
        assert got == pytest.approx(1.0 + 0.5 * math.log(3.0), rel=1e-15)

    def test_frozen_two_expert_case(self):
        got = variable_share_bound(
            inputs(n_experts=2, k=1, alpha=0.5, eta=2.0, superexpert_avg_loss=1.0)
        )
        assert got == pytest.approx(3.3862943611198906, rel=1e-14)

    def test_zero_loss_leaves_only_switching_terms(self):
        alpha, eta, n, k = 0.2, 2.0, 4, 2
        got = variable_share_bound(
            inputs(n_experts=n, k=k, alpha=alpha, eta=eta, superexpert_avg_loss=0.0)
        )
        wanted = (1.0 / eta) * (
            math.log(n) + k * (eta + math.log((n - 1) / (alpha * (1 - alpha))))
        )
        assert got == pytest.approx(wanted, rel=1e-15)

    def test_degenerate_alpha_gives_infinity(self):
        assert variable_share_bound(inputs(alpha=1.0)) == math.inf
        assert variable_share_bound(inputs(k=1, alpha=0.0)) == math.inf


class TestTunedAlpha:
    def test_fixed_share_rate(self):
        assert tuned_alpha(Method.FIXED_SHARE, 3, 100) == pytest.approx(3.0 / 99.0)

    def test_variable_share_rate(self):
        assert tuned_alpha(Method.VARIABLE_SHARE, 2, 8) == pytest.approx(2.0 / 12.0)

    def test_variable_share_regime_boundary(self):
        assert tuned_alpha(Method.VARIABLE_SHARE, 5, 5) == pytest.approx(1.0 / 3.0)

    def test_fixed_share_needs_room_to_switch(self):
        with pytest.raises(ValueError):
            tuned_alpha(Method.FIXED_SHARE, 9, 10)

    def test_positive_arguments_required(self):
        with pytest.raises(ValueError):
            tuned_alpha(Method.FIXED_SHARE, 0, 10)
        with pytest.raises(ValueError):
            tuned_alpha(Method.VARIABLE_SHARE, 1, 0)

    def test_plain_aggregator_has_no_rate(self):
        with pytest.raises(ValueError):
            tuned_alpha(Method.AAP, 1, 10)


class TestCorollaryBound:
    def test_fixed_frozen_case(self):
        got = corollary_bound(
            Method.FIXED_SHARE,
            inputs(
                n_experts=2, k=1, t_total=3, superexpert_avg_loss=0.0,
                k_hat=1.0, t_hat=3.0,
            ),
        )
        assert got == pytest.approx(2.3862943611198906, rel=1e-14)

    def test_fixed_relaxes_the_exact_bound(self):
        rng = np.random.default_rng(25)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            t_hat = int(rng.integers(5, 200))
            k_hat = int(rng.integers(1, max(2, t_hat - 2)))
            l_s = float(rng.random() * 20)
            alpha = tuned_alpha(Method.FIXED_SHARE, k_hat, t_hat)
            common = inputs(
                n_experts=n, k=k_hat, t_total=t_hat, alpha=alpha,
                superexpert_avg_loss=l_s, k_hat=float(k_hat), t_hat=float(t_hat),
            )
            exact = fixed_share_bound(common)
            relaxed = corollary_bound(Method.FIXED_SHARE, common)
            assert relaxed >= exact - 1e-9

    def test_variable_frozen_case(self):
        got = corollary_bound(
            Method.VARIABLE_SHARE,
            inputs(
                n_experts=3, k=2, eta=2.0, t_total=50, superexpert_avg_loss=9.0,
                k_hat=2.0, l_hat=10.0,
            ),
        )
        assert got == pytest.approx(16.355968634104375, rel=1e-14)

    def test_variable_large_budget_regime_formula(self):
        c, eta, n, k = 1.0, 2.0, 4, 3
        k_hat, l_hat, l_s = 8.0, 5.0, 4.0
        got = corollary_bound(
            Method.VARIABLE_SHARE,
            inputs(
                n_experts=n, k=k, eta=eta, t_total=50, superexpert_avg_loss=l_s,
                k_hat=k_hat, l_hat=l_hat,
            ),
        )
        wanted = c * l_s + (c / eta) * (
            math.log(n) + k * (math.log(n - 1) + math.log(4.5) + eta) + k_hat / 2.0
        )
        assert got == pytest.approx(wanted, rel=1e-15)

    def test_variable_regime_boundary_picks_the_tighter_tail(self):
        # at k_hat == l_hat both regimes apply; the k_hat/2 tail is smaller
        at_boundary = corollary_bound(
            Method.VARIABLE_SHARE,
            inputs(
                n_experts=3, k=1, eta=2.0, t_total=50, superexpert_avg_loss=3.0,
                k_hat=4.0, l_hat=4.0,
            ),
        )
        just_below = corollary_bound(
            Method.VARIABLE_SHARE,
            inputs(
                n_experts=3, k=1, eta=2.0, t_total=50, superexpert_avg_loss=3.0,
                k_hat=4.0 - 1e-9, l_hat=4.0,
            ),
        )
        assert at_boundary < just_below

    def test_fixed_preconditions_enforced(self):
        with pytest.raises(ValueError):
            corollary_bound(Method.FIXED_SHARE, inputs(k=1, k_hat=1.0))
        with pytest.raises(ValueError):  # horizon exceeded
            corollary_bound(
                Method.FIXED_SHARE,
                inputs(k=1, t_total=10, k_hat=1.0, t_hat=5.0),
            )
        with pytest.raises(ValueError):  # fewer switches than anticipated
            corollary_bound(
                Method.FIXED_SHARE,
                inputs(k=1, t_total=10, k_hat=2.0, t_hat=50.0),
            )
        with pytest.raises(ValueError):  # k_hat too large for the horizon
            corollary_bound(
                Method.FIXED_SHARE,
                inputs(k=3, t_total=4, k_hat=3.0, t_hat=4.0),
            )

    def test_variable_preconditions_enforced(self):
        with pytest.raises(ValueError):  # missing l_hat
            corollary_bound(Method.VARIABLE_SHARE, inputs(k=1, k_hat=1.0))
        with pytest.raises(ValueError):  # loss above the anticipated level
            corollary_bound(
                Method.VARIABLE_SHARE,
                inputs(k=1, superexpert_avg_loss=5.0, k_hat=1.0, l_hat=4.0),
            )

    def test_plain_aggregator_has_no_corollary(self):
        with pytest.raises(ValueError):
            corollary_bound(Method.AAP, inputs(k_hat=1.0, t_hat=10.0))
