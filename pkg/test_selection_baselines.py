"""Tests for the streaming selection baselines and the pass benchmark."""

import numpy as np
import pytest

import selection_baselines as sb
from selection_baselines import (
    BenchConfig,
    BudgetExceeded,
    DuplicateValues,
    RegisterBudget,
    SelectionError,
    StreamReader,
)


def select(algo, values, s, rank, seed=0):
    reader = StreamReader.from_array(values, chunk_size=997)
    budget = RegisterBudget(s)
    if algo == "multipass":
        value = sb.multipass_select(reader, budget, rank)
    else:
        value = sb.sampling_select(reader, budget, rank, np.random.default_rng(seed))
    return value, reader.pass_count, budget.peak


# =========================
# Registers and streams
# =========================
def test_budget_tracks_the_peak():
    budget = RegisterBudget(4)
    with budget.hold(3):
        budget.acquire()
        budget.release()
    assert budget.in_use == 0
    assert budget.peak == 4
    with pytest.raises(BudgetExceeded):
        budget.acquire(5)
    with pytest.raises(SelectionError):
        RegisterBudget(0)


def test_every_scan_is_one_pass():
    reader = StreamReader.from_array(np.arange(10), chunk_size=3)
    chunks = list(reader.scan())
    assert [len(c) for c in chunks] == [3, 3, 3, 1]
    list(reader.scan())
    assert reader.pass_count == 2


def test_reader_needs_one_source():
    with pytest.raises(SelectionError):
        StreamReader()


def test_file_stream(tmp_path):
    values = sb.synthetic_input(500, np.random.default_rng(1))
    path = tmp_path / "values.txt"
    path.write_text("\n".join(str(v) for v in values) + "\n")
    reader = StreamReader.from_file(path, chunk_size=64)
    assert reader.length == 500
    assert sb.multipass_select(reader, RegisterBudget(16), 250) == sb.sort_oracle(values, 250)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        StreamReader.from_file("no/such/values.txt")


# =========================
# Selection
# =========================
@pytest.mark.parametrize("algo", ["multipass", "sampling"])
def test_budget_at_least_n_takes_one_pass(algo):
    values = sb.synthetic_input(50, np.random.default_rng(0))
    value, passes, peak = select(algo, values, 64, 25)
    assert value == sb.sort_oracle(values, 25)
    assert passes == 1
    assert peak <= 64


@pytest.mark.parametrize("n, s", [(10_000, 16), (10_000, 256), (100_000, 64)])
def test_multipass_is_correct_within_its_bound(n, s):
    values = sb.synthetic_input(n, np.random.default_rng([n, s]))
    rank = (n + 1) // 2
    value, passes, peak = select("multipass", values, s, rank)
    assert value == sb.sort_oracle(values, rank)
    assert passes <= sb.pass_bound("multipass", n, s)
    assert peak <= s


def test_one_far_outlier_costs_at_most_one_pass():
    values = np.array(list(range(1, 1000)) + [10**15])
    value, passes, peak = select("multipass", values, 16, 500)
    assert value == 500
    assert passes <= sb.pass_bound("multipass", 1000, 16) == 8
    assert peak <= 16


@pytest.mark.parametrize("s", [4, 5, 6])
def test_multipass_with_the_smallest_budgets(s):
    values = sb.synthetic_input(300, np.random.default_rng(s))
    value, _, peak = select("multipass", values, s, 150)
    assert value == sb.sort_oracle(values, 150)
    assert peak <= s


def test_multipass_passes_do_not_grow_with_the_budget():
    values = sb.synthetic_input(50_000, np.random.default_rng(11))
    passes = [select("multipass", values, s, 25_000)[1] for s in (16, 64, 256, 4096)]
    assert passes == sorted(passes, reverse=True)


@pytest.mark.parametrize("n, s", [(10_000, 256), (100_000, 256), (100_000, 4096), (1_000_000, 1000)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sampling_is_correct_within_its_bound(n, s, seed):
    values = sb.synthetic_input(n, np.random.default_rng([n, s, seed]))
    rank = (n + 1) // 2
    value, passes, peak = select("sampling", values, s, rank, seed)
    assert value == sb.sort_oracle(values, rank)
    assert passes <= sb.pass_bound("sampling", n, s)
    assert peak <= s


def test_sampling_handles_ordered_streams():
    values = np.arange(1, 20_001)
    for stream in (values, values[::-1]):
        for rank in (1, 7_000, 20_000):
            value, _, peak = select("sampling", stream, 64, rank)
            assert value == rank
            assert peak <= 64


def test_sampling_at_its_smallest_budget():
    values = sb.synthetic_input(100_000, np.random.default_rng(9))
    value, _, peak = select("sampling", values, sb.SAMPLING_MIN_S, 31_337)
    assert value == sb.sort_oracle(values, 31_337)
    assert peak <= sb.SAMPLING_MIN_S


@pytest.mark.parametrize("rank", [1, 2, 5_000, 9_999, 10_000])
def test_extreme_ranks(rank):
    values = sb.synthetic_input(10_000, np.random.default_rng(rank))
    for algo in ("multipass", "sampling"):
        assert select(algo, values, 128, rank)[0] == sb.sort_oracle(values, rank)


def test_sampling_rejects_budgets_below_its_minimum():
    values = sb.synthetic_input(5_000, np.random.default_rng(4))
    with pytest.raises(SelectionError, match="Register budget too small"):
        select("sampling", values, 16, 100)


@pytest.mark.parametrize("algo, s", [("multipass", 16), ("multipass", 4096), ("sampling", 64), ("sampling", 4096)])
def test_repeated_values_are_rejected(algo, s):
    values = np.array([5] * 100 + list(range(1000, 1100)))
    with pytest.raises(DuplicateValues):
        select(algo, values, s, 50)


def test_bad_requests():
    values = sb.synthetic_input(100, np.random.default_rng(0))
    with pytest.raises(SelectionError):
        select("multipass", values, 16, 0)
    with pytest.raises(SelectionError):
        select("multipass", values, 16, 101)
    with pytest.raises(SelectionError):
        select("multipass", values, 3, 50)


# =========================
# Bounds and benchmark
# =========================
def test_pass_bounds():
    assert sb.pass_bound("multipass", 10, 10) == 1
    assert sb.pass_bound("multipass", 10**4, 1000) == 6
    assert sb.pass_bound("sampling", 10**4, 1000) == 4
    assert sb.pass_bound("sampling", 10**6, 1000) == 4
    assert sb.pass_bound("multipass", 10**7, 16) == 14


def test_empty_grid_gives_a_header_only_frame():
    frame = sb.bench_frame(sb.pass_bench(BenchConfig()))
    assert frame.empty
    assert list(frame.columns) == sb.BENCH_COLUMNS


def test_bench_rows_are_correct():
    records = sb.pass_bench(BenchConfig(ns=(10_000,), ss=(16, 256)))
    frame = sb.bench_frame(records)
    assert len(frame) == 3
    assert frame["correct"].all()
    assert set(frame[frame["s"] == 16]["algo"]) == {"multipass"}


def test_run_select_is_seeded():
    a = sb.run_select("sampling", 20_000, 256, seed=3)
    b = sb.run_select("sampling", 20_000, 256, seed=3)
    assert a.measured == b.measured
    assert a.passed
    with pytest.raises(SelectionError):
        sb.run_select("quickselect", 100, 16, seed=0)
