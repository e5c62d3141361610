"""Tests for the exact information-theory toolkit, correlated sampling and round elimination."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import infotools as it
from infotools import DistributionError, DistributionTable, EnumerationCapExceeded

BITS = [(x, y) for x in (0, 1) for y in (0, 1)]


def bit(p0, p1):
    return DistributionTable({0: Fraction(p0), 1: Fraction(p1)})


# =========================
# Tables
# =========================
def test_exact_tables_must_sum_to_one():
    with pytest.raises(DistributionError):
        DistributionTable({0: Fraction(1, 2), 1: Fraction(1, 3)})
    with pytest.raises(DistributionError):
        DistributionTable({0: -0.5, 1: 1.5})
    with pytest.raises(DistributionError):
        DistributionTable({})


def test_float_tables_allow_rounding():
    table = DistributionTable({0: 0.1, 1: 0.2, 2: 0.7000000000001})
    assert not table.exact


def test_product_marginal_and_condition():
    joint = DistributionTable.product(
        DistributionTable.uniform([(0,), (1,)], ("a",)), DistributionTable({0: Fraction(1, 4), 1: Fraction(3, 4)})
    )
    assert joint.names == ("a", "c1")
    assert joint.marginal("c1").prob((1,)) == Fraction(3, 4)
    cond = joint.condition("a", 1)
    assert cond.marginal("c1").prob((0,)) == Fraction(1, 4)
    with pytest.raises(DistributionError):
        joint.marginal("missing")


def test_conditioning_on_a_null_event_fails():
    joint = DistributionTable({(0, 0): Fraction(1)}, ("a", "b"))
    with pytest.raises(DistributionError):
        joint.condition("a", 1)


def test_map_merges_outcomes():
    parity = DistributionTable.uniform(BITS).map(lambda u: u[0] ^ u[1])
    assert parity.prob(0) == parity.prob(1) == Fraction(1, 2)


def test_from_weights():
    assert DistributionTable.from_weights({"a": 1, "b": 3}).prob("b") == Fraction(3, 4)
    with pytest.raises(DistributionError):
        DistributionTable.from_weights({"a": 0})


# =========================
# Distances and entropy
# =========================
def test_statistical_distance_example():
    assert it.statistical_distance(bit(Fraction(1, 2), Fraction(1, 2)), bit(Fraction(3, 4), Fraction(1, 4))) == Fraction(1, 4)


def test_statistical_distance_needs_matching_outcomes():
    with pytest.raises(DistributionError):
        it.statistical_distance(bit(1, 0), DistributionTable({0: Fraction(1, 2), 2: Fraction(1, 2)}))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(2, 8))
def test_statistical_distance_equals_max_event_gap(seed, size):
    rng = np.random.default_rng(seed)
    P = it.random_distribution(list(range(size)), rng)
    Q = it.random_distribution(list(range(size)), rng)
    assert it.statistical_distance(P, Q) == pytest.approx(it.max_event_gap(P, Q), abs=1e-12)


def test_max_event_gap_respects_the_cap():
    big = DistributionTable.uniform(range(20))
    with pytest.raises(EnumerationCapExceeded):
        it.max_event_gap(big, big)


def test_entropy_and_mutual_information_of_copied_bits():
    joint = DistributionTable({(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}, ("a", "b"))
    assert it.entropy(joint.marginal("a")) == pytest.approx(1.0)
    assert it.mutual_information(joint, "a", "b") == pytest.approx(1.0)
    assert it.conditional_entropy(joint, "a", "b") == pytest.approx(0.0)


def test_independent_bits_share_no_information():
    joint = DistributionTable.uniform(BITS, ("a", "b"))
    assert it.mutual_information(joint, "a", "b") == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_conditioning_never_adds_information(seed):
    outcomes = [(x, y, z) for x in range(3) for y in range(2) for z in range(3)]
    joint = it.random_distribution(outcomes, np.random.default_rng(seed), ("X", "Y", "Z"))
    tol = 1e-9
    assert it.mutual_information(joint, "X", "Y", "Z") <= it.conditional_entropy(joint, "X", "Z") + tol
    assert it.conditional_entropy(joint, "X", "Z") <= it.entropy(joint.marginal("X")) + tol
    assert it.mutual_information(joint, "X", "Y", "Z") >= -tol


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(2, 6))
def test_statistical_distance_is_a_metric(seed, size):
    rng = np.random.default_rng(seed)
    P, Q, R = (it.random_distribution(list(range(size)), rng) for _ in range(3))
    assert it.statistical_distance(P, Q) == pytest.approx(it.statistical_distance(Q, P))
    assert it.statistical_distance(P, R) <= it.statistical_distance(P, Q) + it.statistical_distance(Q, R) + 1e-12
    assert it.statistical_distance(P, P) == 0


# =========================
# Pinsker
# =========================
def test_pinsker_on_copied_bits():
    joint = DistributionTable({(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}, ("p", "q"))
    result = it.pinsker_check(joint)
    assert result.lhs == pytest.approx(0.25)
    assert result.rhs == pytest.approx(math.log(2) / 2)
    assert result.holds


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(2, 8), cols=st.integers(2, 8))
def test_pinsker_holds_on_random_tables(seed, rows, cols):
    matrix = np.random.default_rng(seed).dirichlet(np.ones(rows * cols)).reshape(rows, cols)
    assert it.pinsker_matrix(matrix).holds


# =========================
# Correlated sampling
# =========================
def test_identical_distributions_always_agree():
    P = DistributionTable.uniform(range(5))
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b = it.correlated_sample(P, P, rng)
        assert a == b
    law = it.correlated_sampling_law(P, P)
    assert it.disagreement(law) == 0


def test_correlated_sampling_law_marginals_and_disagreement():
    P, Q = bit(Fraction(1, 2), Fraction(1, 2)), bit(Fraction(3, 4), Fraction(1, 4))
    law = it.correlated_sampling_law(P, Q)
    assert law.marginal("p").prob((0,)) == Fraction(1, 2)
    assert law.marginal("q").prob((0,)) == Fraction(3, 4)
    d = it.statistical_distance(P, Q)
    assert it.disagreement(law) <= 2 * d / (1 + d)


def test_batch_sampler_matches_the_exact_law():
    rng = np.random.default_rng(9)
    P = it.random_distribution(list(range(6)), rng)
    Q = it.random_distribution(list(range(6)), rng)
    trials = 20_000
    a, b = it.correlated_sample_batch(P, Q, rng, trials)
    law = it.correlated_sampling_law(P, Q)
    expected = float(it.disagreement(law))
    sigma = math.sqrt(expected * (1 - expected) / trials)
    assert abs(float(np.mean(a != b)) - expected) <= 4 * sigma + 1 / trials
    freq = np.bincount(a, minlength=6) / trials
    p = np.array([P.prob(u) for u in range(6)])
    assert np.all(np.abs(freq - p) <= 4.5 * np.sqrt(p * (1 - p) / trials) + 1 / trials)


# =========================
# Protocols
# =========================
def test_f_power_k_table():
    D = DistributionTable.uniform(BITS)
    f_k, D_k = it.build_f_power_k(it.xor, D, 2)
    assert len(D_k.probs) == 32
    assert set(D_k.probs.values()) == {Fraction(1, 32)}
    assert f_k((1, 0), ((1, 1), 2)) == 1


def test_f_power_one_is_d_times_the_only_index():
    D = DistributionTable.uniform(BITS)
    _, D_1 = it.build_f_power_k(it.xor, D, 1)
    assert D_1.probs == {((x,), ((y,), 1)): Fraction(1, 4) for x, y in BITS}


def test_xor_index_protocol_is_exact():
    D = DistributionTable.uniform(BITS)
    for first in ("parity", "x1", "constant"):
        protocol = it.xor_index_protocol(3, first)
        f_k, D_k = it.build_f_power_k(it.xor, D, 3)
        assert it.protocol_error(protocol, f_k, D_k) == 0
    transcript, out = it.xor_index_protocol(3).run((1, 0, 1), ((0, 0, 1), 2))
    assert transcript == (0, 1, 0)
    assert out == 0


def test_constant_first_message_has_no_bits():
    assert it.xor_index_protocol(4, "constant").message_bits == (0, 2, 1)
    with pytest.raises(DistributionError):
        it.xor_index_protocol(4, "majority")


def test_tabulate_rejects_oversized_messages():
    with pytest.raises(DistributionError):
        it.ToyProtocol.tabulate("A", (1,), (lambda x, tr: 2,), lambda y, tr: 0, [0, 1], [0, 1])


def test_tabulate_respects_the_cap():
    with pytest.raises(EnumerationCapExceeded):
        it.ToyProtocol.tabulate("A", (8,), (lambda x, tr: 0,), lambda y, tr: 0, range(100), range(100), cap=1000)


# =========================
# Information chain
# =========================
def test_chain_when_the_message_is_x1():
    D = DistributionTable.uniform(BITS)
    report = it.information_chain_check(it.xor_index_protocol(2, "x1"), D, 2)
    assert report.entropy == pytest.approx(1.0)
    assert report.sigma == pytest.approx(0.5)
    assert report.holds


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3), m1=st.integers(1, 2))
def test_chain_holds_for_random_protocols(seed, k, m1):
    rng = np.random.default_rng(seed)
    D = it.random_distribution(BITS, rng)
    report = it.information_chain_check(it.random_first_message_protocol(k, m1, rng), D, k)
    assert report.holds, report.steps
    assert report.steps[0] + 1e-9 >= report.entropy


# =========================
# First-message elimination
# =========================
def test_constant_first_message_is_free_to_remove():
    D = DistributionTable.uniform(BITS)
    result = it.eliminate_first_message(it.xor_index_protocol(4, "constant"), it.xor, D, 4)
    assert result.delta == 0
    assert result.epsilon_prime == result.epsilon == 0
    assert result.protocol.first == "B"


@pytest.mark.slow
def test_parity_first_message_elimination():
    D = DistributionTable.uniform(BITS)
    result = it.eliminate_first_message(it.xor_index_protocol(8, "parity"), it.xor, D, 8)
    assert result.precondition
    assert result.delta == pytest.approx(math.sqrt(math.log(2)))
    assert float(result.epsilon_prime) <= float(result.epsilon) + result.delta + 0.05
    assert result.as_dict()["remaining_bits"] == [3, 1]


def test_elimination_needs_alice_first():
    proto = it.ToyProtocol.tabulate("B", (1,), (lambda y, tr: 0,), lambda x, tr: 0, [0, 1], [0, 1])
    with pytest.raises(DistributionError):
        it.eliminate_first_message(proto, it.xor, DistributionTable.uniform(BITS), 1)


def test_one_coordinate_claims_no_guarantee():
    assert it.default_delta(1, 1) >= 1
    D = DistributionTable.uniform(BITS)
    result = it.eliminate_first_message(it.xor_index_protocol(1, "x1"), it.xor, D, 1)
    assert not result.precondition
    assert result.as_dict()["coin_search"] == {"coordinates": 1, "seeds_per_coordinate": 4, "mode": "sampled"}


def test_supplied_delta_sets_the_precondition():
    D = DistributionTable.uniform(BITS)
    proto = it.xor_index_protocol(2, "parity")
    assert not it.eliminate_first_message(proto, it.xor, D, 2, delta=0.5).precondition
    assert not it.eliminate_first_message(proto, it.xor, D, 2, delta=1.5).precondition
    assert it.default_delta(1, 8) < 1
