"""Tests for the branching-program core: evaluation, structure checks, leveling and JSON."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bp_core
from bp_core import (
    InconsistentSinks,
    InputError,
    MalformedProgram,
    NoPath,
    NotDeterministic,
    ProgramBuilder,
)
import median_programs as mp


def coordinate_program(index: int = 2, domain: int = 2, n: int = 2):
    """Outputs the value of x_index."""
    b = ProgramBuilder(domain, n)
    src = b.add_node(index)
    for v in range(1, domain + 1):
        b.add_edge(src, v, b.add_sink(v))
    return b.build(src)


def double_read_chain():
    b = ProgramBuilder(2, 1)
    first, second = b.add_node(1), b.add_node(1)
    sink = b.add_sink(0)
    for v in (1, 2):
        b.add_edge(first, v, second)
        b.add_edge(second, v, sink)
    return b.build(first)


def uneven_paths():
    """x_1 = 1 jumps straight to the sink; x_1 = 2 reads x_2 first."""
    b = ProgramBuilder(2, 2)
    src, mid = b.add_node(1), b.add_node(2)
    zero, one = b.add_sink(0), b.add_sink(1)
    b.add_edge(src, 1, one)
    b.add_edge(src, 2, mid)
    b.add_edge(mid, 1, zero)
    b.add_edge(mid, 2, one)
    return b.build(src)


# =========================
# Evaluation
# =========================
def test_constant_program_evaluates_to_its_label():
    bp = bp_core.constant_program(0, domain_size=3, num_inputs=2)
    assert bp_core.evaluate_deterministic(bp, (3, 1)) == 0
    assert bp_core.evaluate_nondeterministic(bp, (1, 2)) == 0


def test_coordinate_program_reads_x2():
    assert bp_core.evaluate_deterministic(coordinate_program(), (1, 2)) == 2


def test_medianbit_decision_tree_n2():
    bp = bp_core.decision_tree(4, 2, lambda xs: min(xs) & 1)
    assert bp_core.evaluate_deterministic(bp, (1, 4)) == 1


def test_median_nbp_n2_picks_the_lower_element():
    assert bp_core.evaluate_nondeterministic(mp.build_median_nbp(2), (3, 2)) == 2


def test_missing_edge_raises_no_path():
    b = ProgramBuilder(2, 1)
    src = b.add_node(1)
    b.add_edge(src, 2, b.add_sink(0))
    bp = b.build(src)
    with pytest.raises(NoPath):
        bp_core.evaluate_nondeterministic(bp, (1,))
    with pytest.raises(MalformedProgram):
        bp_core.evaluate_deterministic(bp, (1,))


def test_conflicting_sinks_raise():
    b = ProgramBuilder(2, 1)
    src = b.add_node(1)
    b.add_edge(src, 1, b.add_sink(0))
    b.add_edge(src, 1, b.add_sink(1))
    bp = b.build(src)
    with pytest.raises(InconsistentSinks):
        bp_core.evaluate_nondeterministic(bp, (1,))
    with pytest.raises(NotDeterministic):
        bp_core.evaluate_deterministic(bp, (1,))


@pytest.mark.parametrize("values", [(1,), (1, 2, 1), (0, 1), (1, 3)])
def test_bad_inputs_raise_input_error(values):
    with pytest.raises(InputError):
        bp_core.evaluate_deterministic(coordinate_program(), values)


def test_cycle_is_rejected():
    b = ProgramBuilder(2, 1)
    a, c = b.add_node(1), b.add_node(1)
    b.add_edge(a, 1, c)
    b.add_edge(c, 1, a)
    with pytest.raises(MalformedProgram):
        b.build(a)


def test_out_of_range_edge_value_is_rejected():
    b = ProgramBuilder(2, 1)
    src = b.add_node(1)
    b.add_edge(src, 3, b.add_sink(0))
    with pytest.raises(MalformedProgram):
        b.build(src)


# =========================
# Structure
# =========================
def test_median_nbp_is_oblivious_read_once():
    bp = mp.build_median_nbp(4)
    assert bp_core.check_oblivious(bp) == (True, (1, 2, 3, 4))
    assert bp_core.check_read_k(bp, 1)


def test_branching_to_different_indices_is_not_oblivious():
    b = ProgramBuilder(2, 3)
    src, left, right = b.add_node(1), b.add_node(2), b.add_node(3)
    sink = b.add_sink(0)
    b.add_edge(src, 1, left)
    b.add_edge(src, 2, right)
    for node in (left, right):
        for v in (1, 2):
            b.add_edge(node, v, sink)
    assert bp_core.check_oblivious(b.build(src)) == (False, None)


def test_constant_program_structure():
    bp = bp_core.constant_program(1)
    assert bp_core.check_oblivious(bp) == (True, ())
    assert all(bp_core.check_read_k(bp, k) for k in (1, 2, 5))
    assert bp_core.level(bp) is bp


def test_double_read_chain_multiplicity():
    bp = double_read_chain()
    assert not bp_core.check_read_k(bp, 1)
    assert bp_core.check_read_k(bp, 2)
    with pytest.raises(InputError):
        bp_core.check_read_k(bp, 0)


def test_useful_nodes_skip_dead_ends():
    b = ProgramBuilder(2, 1)
    src, dead = b.add_node(1), b.add_node(1)
    sink = b.add_sink(0)
    b.add_edge(src, 1, sink)
    b.add_edge(src, 2, dead)
    bp = b.build(src)
    assert bp_core.useful_nodes(bp) == frozenset({src, sink})


def test_level_duplicates_the_shared_sink_and_preserves_the_function():
    bp = uneven_paths()
    assert not bp_core.is_leveled(bp)
    leveled = bp_core.level(bp)
    assert bp_core.is_leveled(leveled)
    assert len(leveled.sink_labels) == 3
    for x in bp_core.all_inputs(bp):
        assert bp_core.evaluate_deterministic(leveled, x) == bp_core.evaluate_deterministic(bp, x)
    m = bp_core.metrics(bp)
    assert math.log2(len(leveled)) <= m.space + math.log2(m.time) + 1


def test_level_is_identity_on_leveled_programs():
    bp = mp.build_median_nbp(2)
    assert bp_core.level(bp) is bp


def test_decision_tree_metrics():
    n = 4
    m = bp_core.metrics(bp_core.decision_tree(2, n, lambda xs: sum(xs) & 1))
    assert m.time == n
    assert m.space == pytest.approx(math.log2(2 ** (n + 1) - 1))
    assert m.oblivious and m.leveled


def test_single_sink_metrics():
    m = bp_core.metrics(bp_core.constant_program("a"))
    assert (m.time, m.space, m.node_count) == (0, 0.0, 1)


def test_median_nbp_node_count_matches_tuple_count():
    assert len(mp.build_median_nbp(4)) == mp.count_median_nbp_nodes(4)


# =========================
# Random programs
# =========================
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), width=st.integers(1, 4))
def test_random_oblivious_programs_are_leveled_and_deterministic(seed, width):
    rng = np.random.default_rng(seed)
    seq = [int(i) + 1 for i in rng.permutation(3)] * 2
    bp = bp_core.random_oblivious_program(seq, 3, width, rng, num_inputs=3)
    assert bp.deterministic
    oblivious, found = bp_core.check_oblivious(bp)
    assert oblivious
    assert found == tuple(seq)
    assert bp_core.check_read_k(bp, 2)
    assert max(bp_core.level_widths(bp)) <= width


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_json_round_trip_is_byte_identical(seed):
    rng = np.random.default_rng(seed)
    bp = bp_core.random_oblivious_program([1, 2, 1], 2, 3, rng, num_inputs=2)
    text = bp_core.to_json(bp)
    again = bp_core.from_json(text)
    assert bp_core.to_json(again) == text
    for x in itertools.product((1, 2), repeat=2):
        assert bp_core.evaluate_deterministic(again, x) == bp_core.evaluate_deterministic(bp, x)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), width=st.integers(1, 5))
def test_both_evaluators_agree_on_deterministic_programs(seed, width):
    rng = np.random.default_rng(seed)
    seq = [int(i) + 1 for i in rng.permutation(3)] + [int(i) + 1 for i in rng.permutation(3)]
    bp = bp_core.random_oblivious_program(seq, 3, width, rng, num_inputs=3)
    for x in itertools.product((1, 2, 3), repeat=3):
        assert bp_core.evaluate_nondeterministic(bp, x) == bp_core.evaluate_deterministic(bp, x)


def test_from_json_rejects_garbage():
    with pytest.raises(MalformedProgram):
        bp_core.from_json('{"domain": 2}')
    with pytest.raises(MalformedProgram):
        bp_core.from_json("not json")


def test_relabel_sinks_keeps_structure():
    bp = mp.build_median_nbp(2)
    bits = bp_core.relabel_sinks(bp, lambda m: m & 1)
    assert bits.nodes == bp.nodes
    for x in mp.distinct_inputs(2):
        assert bp_core.evaluate_nondeterministic(bits, x) == mp.medianbit_oracle(x)
