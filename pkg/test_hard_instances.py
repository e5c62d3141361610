"""Tests for the core/shell pairing tree and hard instance sampling."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hard_instances as hi
import median_programs as mp
from hard_instances import ModeParams, PairingError


def small_tree():
    params = hi.toy_schedule(8, 1, 2, [4])
    return params, hi.build_pairing(params, 8)


def sample_with_j(pairing, params, j, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        instance = hi.sample_instance(pairing, rng, params)
        if instance.j_path[0] == j:
            return instance
    raise AssertionError(f"j={j} never sampled")


# =========================
# Pairing
# =========================
def test_toy_pairing_layout():
    _, tree = small_tree()
    assert tree.shell_pairs == [(1, 16), (2, 15), (3, 14), (4, 13)]
    assert tree.core == (5, 12)
    left, right = tree.children
    assert (left.value_lo, left.value_hi) == (5, 8)
    assert (right.value_lo, right.value_hi) == (9, 12)
    assert left.leaf_pairs == [(5, 6), (7, 8)]
    assert right.leaf_pairs == [(9, 10), (11, 12)]


def test_pair_table_covers_every_value_once():
    _, tree = small_tree()
    values = sorted(v for _, _, pair in tree.pair_table for v in pair)
    assert values == list(range(1, 17))


@pytest.mark.parametrize("n, gamma, k", [(8, 6, 2), (9, 4, 2), (8, 0, 1), (8, 8, 1)])
def test_invalid_levels_are_rejected(n, gamma, k):
    with pytest.raises(PairingError):
        hi.toy_schedule(n, 1, k, [gamma])


def test_default_gamma_is_a_multiple_of_2k():
    params = hi.toy_schedule(64, 2, 2)
    (g1, k1), (g2, k2) = params.schedule
    assert g1 % (2 * k1) == 0 and g2 % (2 * k2) == 0
    assert g1 == 32


def test_params_round_trip():
    params = hi.toy_schedule(32, 2, 2)
    assert ModeParams.from_dict(params.to_dict()) == params


def test_full_mode_root_is_a_leaf():
    params = ModeParams("full", m=20, n0=2**20)
    assert params.full_k == 8000
    tree = hi.build_pairing(params, 2**20)
    assert tree.is_leaf
    assert tree.leaf_pairs[:2] == [(1, 2), (3, 4)]
    report = hi.recursion_depth(params)
    assert report.depth == 0
    assert report.formula_depth == 0


def test_one_level_needs_an_astronomical_n0():
    threshold = hi.formula_threshold_log_n0(1)
    assert 120 <= threshold <= 135
    assert threshold >= 18 * math.log2(threshold)
    assert threshold - 1 < 18 * math.log2(threshold - 1)


# =========================
# Sampling
# =========================
@pytest.mark.parametrize("j, low", [(1, 3), (2, 1)])
def test_low_shell_count_follows_j(j, low):
    params, tree = small_tree()
    instance = sample_with_j(tree, params, j)
    assert len(instance.choices[()].low) == low
    assert tree.low_count(j) == low
    hi.check_instance(instance)


def test_median_is_the_first_element_of_the_active_child():
    params, tree = small_tree()
    for j in (1, 2):
        instance = sample_with_j(tree, params, j, seed=j)
        child = tree.children[j - 1]
        local = sorted(v for v in instance.A if child.value_lo <= v <= child.value_hi)
        assert mp.median_oracle(instance.A) == local[0]
        assert hi.median_locality_check(instance)


@pytest.mark.parametrize("j", [1, 2])
def test_flipped_shell_choice_breaks_locality(j):
    params, tree = small_tree()
    instance = sample_with_j(tree, params, j)
    flipped = hi.flip_shell_choice(instance)
    assert not hi.median_locality_check(flipped)
    with pytest.raises(PairingError):
        hi.check_instance(flipped)


@settings(max_examples=30, deadline=None)
@given(
    setting=st.sampled_from([(8, 1, 1), (16, 1, 2), (24, 1, 3), (32, 2, 2), (64, 2, 2)]),
    seed=st.integers(0, 2**32 - 1),
)
def test_sampled_instances_are_valid_and_local(setting, seed):
    n, levels, k = setting
    params = hi.toy_schedule(n, levels, k)
    tree = hi.build_pairing(params, n)
    instance = hi.sample_instance(tree, np.random.default_rng(seed), params)
    hi.check_instance(instance)
    assert len(instance.A) == n
    assert hi.median_locality_check(instance)
    shifted = hi.leaf_local_median(instance) & 1 ^ hi.value_shift(instance) & 1
    assert mp.medianbit_oracle(instance.A) == shifted


def test_sampling_is_deterministic_given_the_seed():
    params = hi.toy_schedule(32, 2, 2)
    tree = hi.build_pairing(params, 32)
    a = hi.sample_instance(tree, np.random.default_rng(5), params)
    b = hi.sample_instance(tree, np.random.default_rng(5), params)
    assert a.to_json() == b.to_json()
    assert set(a.to_dict()) == {"n", "params", "j_path", "A"}


# =========================
# Base case
# =========================
def test_single_pair_leaf_is_exactly_balanced():
    leaf = hi.build_pairing(ModeParams("toy"), 1)
    assert hi.exact_basecase_bit_distribution(leaf) == Fraction(1, 2)


def test_four_pair_leaf_frequency():
    leaf = hi.build_pairing(ModeParams("toy"), 4)
    freq = hi.basecase_bit_distribution(leaf, np.random.default_rng(11), 100_000)
    assert abs(freq - 0.5) <= 0.01
    assert hi.exact_basecase_bit_distribution(leaf) == Fraction(1, 2)


def test_basecase_argument_checks():
    _, tree = small_tree()
    with pytest.raises(PairingError):
        hi.basecase_bit_distribution(tree, np.random.default_rng(0), 10)
    with pytest.raises(ValueError):
        hi.basecase_bit_distribution(tree.children[0], np.random.default_rng(0), 0)
