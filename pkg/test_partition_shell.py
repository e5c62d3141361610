"""Tests for pair partitions, niceness and the shell statistics behind the j-distribution."""

import math
from fractions import Fraction

import numpy as np
import pytest

import hard_instances as hi
import partition_shell as ps
from hard_instances import PairingError
from partition_shell import PartitionError


@pytest.fixture
def instance():
    params = hi.toy_schedule(8, 1, 2, [4])
    tree = hi.build_pairing(params, 8)
    rng = np.random.default_rng(3)
    while True:
        sampled = hi.sample_instance(tree, rng, params)
        if sampled.j_path == (1,):
            return sampled


# =========================
# Partition and niceness
# =========================
def test_random_partition_splits_pairs_in_half(instance):
    part = ps.random_pair_partition(instance, np.random.default_rng(1))
    assert len(part.alice_pairs) == len(part.bob_pairs) == 4
    assert part.alice_pairs | part.bob_pairs == frozenset(range(8))
    again = ps.random_pair_partition(instance, np.random.default_rng(1))
    assert again.alice_pairs == part.alice_pairs
    assert part.nice == ps.check_nice(part)


def test_niceness_threshold_for_four_shell_pairs():
    assert ps.nice_threshold(4) == 2


def test_alice_holding_the_whole_shell_is_not_nice(instance):
    assert not ps.check_nice(ps.partition_with(instance, {0, 1, 2, 3}))


def test_balanced_shell_is_nice(instance):
    assert ps.check_nice(ps.partition_with(instance, {0, 1, 4, 5}))


def test_partition_with_rejects_wrong_sizes(instance):
    with pytest.raises(PartitionError):
        ps.partition_with(instance, {0, 1, 2})


def test_shell_stats_for_three_alice_pairs(instance):
    stats = ps.shell_stats(ps.partition_with(instance, {0, 1, 2, 4}))
    assert stats.xs_size == 3 and stats.ys_size == 1
    assert 0 <= stats.a <= 3
    assert stats.delta == stats.a - Fraction(3, 2)


def test_shell_sizes_count_pairs(instance):
    # n = 8, gamma = 4: 4 shell pairs, 8 shell elements
    stats = ps.shell_stats(ps.partition_with(instance, {0, 1, 2, 4}))
    node = instance.pairing.node(())
    assert stats.xs_size + stats.ys_size == node.shell_size == 8 - 4


def test_shell_stats_with_no_alice_shell(instance):
    stats = ps.shell_stats(ps.partition_with(instance, {4, 5, 6, 7}))
    assert (stats.xs_size, stats.a, stats.delta) == (0, 0, 0)


def test_shell_stats_rejects_leaves(instance):
    with pytest.raises(PairingError):
        ps.shell_stats(ps.partition_with(instance, {0, 1, 4, 5}), (1,))


@pytest.mark.parametrize("total, shell", [(10, 4), (24, 10), (44, 20)])
def test_exact_failure_probability_matches_scipy(total, shell):
    exact = ps.niceness_failure_probability(total, shell)
    assert float(exact) == pytest.approx(ps.niceness_failure_probability_scipy(total, shell), abs=1e-12)


@pytest.mark.parametrize("shell", [3, 6, 10])
def test_monte_carlo_failure_rate_within_three_sigma(shell):
    total, trials = 2 * shell + 4, 20_000
    p = float(ps.niceness_failure_probability(total, shell))
    rate = ps.niceness_failure_rate(total, shell, np.random.default_rng(shell), trials)
    assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / trials) + 1 / trials


def test_low_count_distribution_is_hypergeometric():
    dist = ps.low_count_distribution(3, 1, 3)
    assert sum(dist.probs.values()) == 1
    mean = sum(a * p for a, p in dist.items())
    assert mean == Fraction(9, 4)


# =========================
# j-distribution
# =========================
def test_j_distribution_single_branch_is_a_point_mass():
    dist = ps.j_distribution(4, 0, 4, 1, 8)
    assert dist.prob(1) == 1


def test_j_distribution_balanced_and_shifted():
    uniform = ps.j_distribution(4, 0, 4, 2, 8)
    assert uniform.prob(1) == uniform.prob(2) == Fraction(1, 2)
    assert ps.uniformity_distance(uniform) == 0
    shifted = ps.j_distribution(4, 1, 4, 2, 8)
    assert shifted.prob(1) == Fraction(6, 7)
    assert ps.uniformity_distance(shifted) == Fraction(5, 14)


def test_j_distribution_rejects_bad_k():
    with pytest.raises(PartitionError):
        ps.j_distribution(4, 0, 4, 0, 8)


def test_point_mass_is_half_from_uniform():
    dist = ps.j_distribution(2, 3, 4, 2, 8)
    assert max(dist.probs.values()) == 1
    assert ps.uniformity_distance(dist) == Fraction(1, 2)


def test_uniformity_distance_shrinks_with_n():
    trend = ps.uniformity_trend([64, 256, 1024, 4096])
    assert trend["distance"].is_monotonic_decreasing


# =========================
# Binomial ratio
# =========================
def test_ratio_with_empty_core_is_one():
    check = ps.binomial_ratio_bound(64, 3, 0)
    assert check.ratio == 1 and check.bound == 1 and check.holds


def test_ratio_smallest_case():
    check = ps.binomial_ratio_bound(8, 0, 1)
    assert check.ratio == pytest.approx(2.0)
    assert check.bound == pytest.approx(2.25)
    assert check.holds


@pytest.mark.parametrize("n, delta, gamma", [(7, 0, 0), (8, 0, 2), (16, 2, 1)])
def test_ratio_argument_checks(n, delta, gamma):
    with pytest.raises(PartitionError):
        ps.binomial_ratio_bound(n, delta, gamma)


def test_ratio_sweep_holds_where_guaranteed():
    frame = ps.ratio_sweep([64, 128, 256])
    assert list(frame.columns[:6]) == ["n", "delta", "gamma", "ratio", "bound", "holds"]
    assert frame[frame["guaranteed"]]["holds"].all()


def test_j_distribution_ratio_obeys_the_bound():
    ratio, check = ps.j_ratio_check(30, 16, 4, 2, 64)
    assert ratio == Fraction(math.comb(30, 15), math.comb(30, 13))
    assert check.guaranteed
    assert float(ratio) <= check.bound
    dist = ps.j_distribution(30, 16, 4, 2, 64)
    assert max(dist.probs.values()) / min(dist.probs.values()) == ratio


def test_j_ratio_check_outside_its_regime():
    assert ps.j_ratio_check(30, 0, 4, 2, 64) is None
    assert ps.j_ratio_check(31, 16, 4, 2, 64) is None
