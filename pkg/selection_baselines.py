# selection_baselines.py
# -------------------------------------------------------------------
# Small-space selection over a read-only stream:
# - StreamReader (in-memory array or one-integer-per-line file, chunked)
# - RegisterBudget (peak register accounting, hard cap s)
# - multipass_select: deterministic bucket narrowing on tracked extrema
# - sampling_select: in-pass bracket refinement, reservoir bracketing fallback
# - pass_bench: (n, s, algorithm, seed) grid -> ExperimentRecord rows
# -------------------------------------------------------------------

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from config import STREAM_CHUNK_SIZE
from reports import ExperimentRecord, records_to_frame

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["algo", "n", "s", "seed", "passes", "peak_registers", "correct"]
MAX_PASSES = 64
CONTROL_REGISTERS = 4  # bracket bounds, count below, count inside
REFINE_REGISTERS = 8  # outer and working brackets, target, size, below, above
SAMPLING_MIN_S = 64


class SelectionError(ValueError):
    pass


class BudgetExceeded(SelectionError):
    pass


class DuplicateValues(SelectionError):
    pass


# =========================
# Stream and registers
# =========================
class StreamReader:
    """Sequential access to n integers; every full scan counts one pass."""

    def __init__(self, values: np.ndarray | None = None, path: str | Path | None = None,
                 chunk_size: int = STREAM_CHUNK_SIZE, length: int | None = None):
        if (values is None) == (path is None):
            raise SelectionError("StreamReader needs exactly one of values or path")
        self._values = None if values is None else np.asarray(values, dtype=np.int64)
        self._path = None if path is None else Path(path)
        self.chunk_size = chunk_size
        self.pass_count = 0
        if self._values is not None:
            self.length = len(self._values)
        elif length is not None:
            self.length = length
        else:
            self.length = sum(len(chunk) for chunk in self._file_chunks())

    @classmethod
    def from_array(cls, values, chunk_size: int = STREAM_CHUNK_SIZE) -> "StreamReader":
        return cls(values=values, chunk_size=chunk_size)

    @classmethod
    def from_file(cls, path: str | Path, chunk_size: int = STREAM_CHUNK_SIZE) -> "StreamReader":
        """One integer per line, no header. The length is read once as file metadata."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Input file not found: {path}")
        return cls(path=path, chunk_size=chunk_size)

    def _file_chunks(self) -> Iterator[np.ndarray]:
        for chunk in pd.read_csv(self._path, header=None, names=["value"], chunksize=self.chunk_size):
            yield chunk["value"].to_numpy(dtype=np.int64)

    def scan(self) -> Iterator[np.ndarray]:
        self.pass_count += 1
        if self._values is not None:
            for start in range(0, self.length, self.chunk_size):
                yield self._values[start : start + self.chunk_size]
        else:
            yield from self._file_chunks()


class RegisterBudget:
    """s registers, each one input value or one counter."""

    def __init__(self, s: int):
        if s < 1:
            raise SelectionError(f"A register budget needs s >= 1, got {s}")
        self.s = s
        self.in_use = 0
        self.peak = 0

    def acquire(self, count: int = 1) -> None:
        if self.in_use + count > self.s:
            raise BudgetExceeded(f"Need {self.in_use + count} registers, budget is {self.s}")
        self.in_use += count
        self.peak = max(self.peak, self.in_use)

    def release(self, count: int = 1) -> None:
        self.in_use -= count

    @contextmanager
    def hold(self, count: int):
        self.acquire(count)
        try:
            yield
        finally:
            self.release(count)


# =========================
# Passes
# =========================
@dataclass
class _Bracket:
    lo: int | None
    hi: int | None

    def mask(self, values: np.ndarray) -> np.ndarray:
        keep = np.ones(len(values), dtype=bool)
        if self.lo is not None:
            keep &= values >= self.lo
        if self.hi is not None:
            keep &= values <= self.hi
        return keep

    def below(self, values: np.ndarray) -> int:
        return 0 if self.lo is None else int(np.count_nonzero(values < self.lo))


def _check_request(reader: StreamReader, budget: RegisterBudget, rank: int, min_s: int) -> None:
    if not 1 <= rank <= reader.length:
        raise SelectionError(f"rank must lie in 1..{reader.length}, got {rank}")
    if budget.s < min_s:
        raise SelectionError(f"Register budget too small: s={budget.s}, need at least {min_s}")


def _sorted_distinct(values: np.ndarray) -> np.ndarray:
    out = np.sort(values)
    if out.size > 1 and np.any(out[1:] == out[:-1]):
        raise DuplicateValues("Input contains repeated values; selection assumes distinct inputs")
    return out


def _load_all(reader: StreamReader, budget: RegisterBudget, rank: int) -> int:
    with budget.hold(reader.length):
        values = np.concatenate(list(reader.scan()) or [np.empty(0, np.int64)])
    return int(_sorted_distinct(values)[rank - 1])


def _minmax_pass(reader: StreamReader, budget: RegisterBudget) -> tuple[int, int]:
    lo = hi = None
    with budget.hold(2):
        for chunk in reader.scan():
            if chunk.size:
                lo = int(chunk.min()) if lo is None else min(lo, int(chunk.min()))
                hi = int(chunk.max()) if hi is None else max(hi, int(chunk.max()))
    if hi - lo + 1 < reader.length:
        raise DuplicateValues(f"{reader.length} values cannot be distinct inside [{lo}, {hi}]")
    return lo, hi


# =========================
# Multipass (deterministic)
# =========================
def _bucket_count(s: int) -> tuple[int, bool]:
    """
    Buckets per pass and whether each bucket also tracks its extreme values.

    With extrema a bucket costs a counter, its min and its max; the last
    counter is implied by the total, so 3B - 1 registers plus lo and hi.
    Budgets too small for two such buckets fall back to plain counters
    (s - 3 counters plus lo, hi and the width).
    """
    tight = (s - 1) // 3
    if tight >= 2:
        return tight, True
    return s - 2, False


def _bucket_pass(reader: StreamReader, budget: RegisterBudget, lo: int, hi: int,
                 target: int) -> tuple[int, int, int, int]:
    """
    Split [lo, hi] into equal value buckets and count each. When extrema are
    tracked the chosen bucket shrinks to [its min, its max], so the next pass
    starts from real elements and a lone outlier costs one pass at most.
    """
    buckets, tight = _bucket_count(budget.s)
    width = -(-(hi - lo + 1) // buckets)
    edges = np.array([lo + j * width for j in range(1, buckets) if lo + j * width <= hi], dtype=np.int64)
    k = edges.size + 1
    held = 3 * buckets + 1 if tight else budget.s
    with budget.hold(held):
        counts = np.zeros(k, dtype=np.int64)
        mins = np.full(k, hi, dtype=np.int64)
        maxs = np.full(k, lo, dtype=np.int64)
        for chunk in reader.scan():
            inside = chunk[(chunk >= lo) & (chunk <= hi)]
            idx = np.searchsorted(edges, inside, side="right")
            counts += np.bincount(idx, minlength=k)
            if tight:
                np.minimum.at(mins, idx, inside)
                np.maximum.at(maxs, idx, inside)
    cum = np.cumsum(counts)
    j = int(np.searchsorted(cum, target))
    if tight:
        new_lo, new_hi = int(mins[j]), int(maxs[j])
    else:
        new_lo = lo + j * width
        new_hi = min(hi, new_lo + width - 1)
    count = int(counts[j])
    if count > new_hi - new_lo + 1:
        raise DuplicateValues(f"{count} values cannot be distinct inside [{new_lo}, {new_hi}]")
    prior = int(cum[j - 1]) if j else 0
    return new_lo, new_hi, target - prior, count


def _load_pass(reader: StreamReader, budget: RegisterBudget, lo: int, hi: int, target: int, count: int) -> int:
    with budget.hold(2), budget.hold(count):
        parts = [chunk[(chunk >= lo) & (chunk <= hi)] for chunk in reader.scan()]
    values = _sorted_distinct(np.concatenate(parts))
    return int(values[target - 1])


def multipass_select(reader: StreamReader, budget: RegisterBudget, rank: int) -> int:
    """
    Deterministic selection: one min/max pass, then bucket passes until the
    candidate interval fits in the budget, then one load pass.

    Buckets track their smallest and largest member, so every pass ends on
    an interval whose ends are input values with known ranks. A pass cuts
    the candidate count by about (s-1)/3 on evenly spread data and always
    cuts the value range by at least that factor, so spread only costs
    passes when the values cluster at many different scales.
    """
    _check_request(reader, budget, rank, 4)
    if reader.length <= budget.s:
        return _load_all(reader, budget, rank)
    _, tight = _bucket_count(budget.s)
    lo, hi = _minmax_pass(reader, budget)
    target, count = rank, reader.length
    while count > budget.s - 2:
        lo, hi, target, count = _bucket_pass(reader, budget, lo, hi, target)
        logger.debug("bucket pass %d: [%d, %d] holds %d values", reader.pass_count, lo, hi, count)
        if tight and count <= 2:
            # both candidates are the tracked extrema
            return lo if target == 1 else hi
    return _load_pass(reader, budget, lo, hi, target, count)


# =========================
# Sampling (randomized)
# =========================
class _Refinement:
    """
    One refinement pass. Every candidate inside the working bracket is
    buffered; when the buffer fills, the bracket shrinks to the buffered
    order statistics z standard deviations either side of the target's
    expected position among the values seen so far. Values leaving the
    bracket are counted, never dropped, so below/inside/above stay exact.
    Once a refill would be too small the bracket is frozen and only counted.
    """

    def __init__(self, outer: _Bracket, size: int, target: int, cap: int, z: float):
        self.lo, self.hi = outer.lo, outer.hi
        self.size = size
        self.target = target
        self.cap = cap
        self.z = z
        self.below = self.above = self.inside = 0
        self.buffer = np.empty(0, dtype=np.int64)
        self.frozen = False

    @property
    def held(self) -> int:
        return 0 if self.frozen else self.buffer.size

    @property
    def count(self) -> int:
        return self.inside if self.frozen else self.buffer.size

    def feed(self, cand: np.ndarray, budget: RegisterBudget) -> None:
        while cand.size:
            keep = _Bracket(self.lo, self.hi).mask(cand)
            if self.frozen:
                self._count_outside(cand[~keep])
                self.inside += int(np.count_nonzero(keep))
                return
            where = np.flatnonzero(keep)
            room = self.cap - self.buffer.size
            if where.size < room:
                self._count_outside(cand[~keep])
                self._store(cand[keep], budget)
                return
            cut = int(where[room - 1]) + 1
            head, keep, cand = cand[:cut], keep[:cut], cand[cut:]
            self._count_outside(head[~keep])
            self._store(head[keep], budget)
            self._narrow(budget)

    def _count_outside(self, values: np.ndarray) -> None:
        low = 0 if self.lo is None else int(np.count_nonzero(values < self.lo))
        self.below += low
        self.above += values.size - low

    def _store(self, values: np.ndarray, budget: RegisterBudget) -> None:
        budget.acquire(values.size)
        self.buffer = np.concatenate([self.buffer, values])

    def _narrow(self, budget: RegisterBudget) -> None:
        values = _sorted_distinct(self.buffer)
        size = values.size
        seen = self.below + self.above + size
        p = self.target / self.size
        # seen values ranked at or below the target: hypergeometric
        mean = seen * p
        var = seen * p * (1 - p) * (self.size - seen) / max(self.size - 1, 1)
        slack = self.z * math.sqrt(var) + 1
        i_lo = math.floor(mean - slack) - self.below - 1
        i_hi = math.ceil(mean + slack) - self.below
        a = b = None
        if i_lo >= 0:
            a = min(i_lo, size - 1)
            self.lo = int(values[a])
        if i_hi < size:
            b = max(i_hi, 0)
            self.hi = int(values[b])
        kept = values[(a or 0) : size if b is None else b + 1]
        self.below += a or 0
        self.above += 0 if b is None else size - 1 - b
        budget.release(size - kept.size)
        self.buffer = kept
        if kept.size > self.cap - max(1, self.cap // 16):
            self.inside = kept.size
            budget.release(kept.size)
            self.buffer = np.empty(0, dtype=np.int64)
            self.frozen = True
        logger.debug("refined after %d values: [%s, %s] keeps %d%s", seen, self.lo, self.hi,
                     kept.size, " (frozen)" if self.frozen else "")


def _refine_pass(reader: StreamReader, budget: RegisterBudget, outer: _Bracket, size: int,
                 target: int, z: float) -> _Refinement:
    state = _Refinement(outer, size, target, budget.s - REFINE_REGISTERS, z)
    with budget.hold(REFINE_REGISTERS):
        try:
            for chunk in reader.scan():
                state.feed(chunk[outer.mask(chunk)], budget)
        finally:
            budget.release(state.held)
    if not state.frozen:
        state.buffer = _sorted_distinct(state.buffer)
    return state


def _count_and_sample(reader: StreamReader, budget: RegisterBudget, bracket: _Bracket, cap: int,
                      rng: np.random.Generator) -> tuple[int, int, np.ndarray]:
    """
    One pass: exact counts below and inside the bracket plus a uniform
    sample of at most `cap` values from inside it. When the bracket holds
    no more than `cap` values the sample is all of them.
    """
    below = inside = 0
    held = np.empty(0, dtype=np.int64)
    keys = np.empty(0)
    with budget.hold(CONTROL_REGISTERS):
        for chunk in reader.scan():
            below += bracket.below(chunk)
            fresh = chunk[bracket.mask(chunk)]
            inside += fresh.size
            if not fresh.size:
                continue
            # smallest random keys among everything seen inside = uniform reservoir
            held = np.concatenate([held, fresh])
            keys = np.concatenate([keys, rng.random(fresh.size)])
            if held.size > cap:
                keep = np.argpartition(keys, cap - 1)[:cap]
                held, keys = held[keep], keys[keep]
            budget.acquire(held.size - (budget.in_use - CONTROL_REGISTERS))
        budget.release(held.size)
    return below, inside, np.sort(held)


def _sample_rounds(reader: StreamReader, budget: RegisterBudget, rank: int, rng: np.random.Generator,
                   start: _Bracket, z: float) -> int:
    """Reservoir bracketing from `start`; works for any stream order."""
    cap = budget.s - CONTROL_REGISTERS
    outer = bracket = start
    for _ in range(MAX_PASSES):
        below, inside, sample = _count_and_sample(reader, budget, bracket, cap, rng)
        target = rank - below
        if not 1 <= target <= inside:
            # the missed side, recounted next pass
            if target < 1:
                bracket = _Bracket(outer.lo, bracket.lo - 1)
            else:
                bracket = _Bracket(bracket.hi + 1, outer.hi)
            logger.debug("pass %d: bracket missed rank %d, retrying", reader.pass_count, rank)
            continue
        if bracket.lo is not None and bracket.hi is not None and inside > bracket.hi - bracket.lo + 1:
            raise DuplicateValues(f"{inside} values cannot be distinct inside [{bracket.lo}, {bracket.hi}]")
        if inside <= cap:
            return int(_sorted_distinct(sample)[target - 1])
        outer = bracket
        bracket = _next_bracket(bracket, sample, target, inside, z)
        logger.debug("pass %d: %d values inside, next bracket [%s, %s]",
                     reader.pass_count, inside, bracket.lo, bracket.hi)
    raise SelectionError(f"sampling_select made no progress within {MAX_PASSES} passes")


def _next_bracket(bracket: _Bracket, sample: np.ndarray, target: int, inside: int, z: float) -> _Bracket:
    size = sample.size
    p = target / inside
    center = p * size
    slack = z * math.sqrt(size * p * (1 - p)) + 1
    i_lo = math.floor(center - slack) - 1
    i_hi = math.ceil(center + slack) - 1
    lo = int(sample[i_lo]) if i_lo >= 0 else bracket.lo
    hi = int(sample[i_hi]) if i_hi < size else bracket.hi
    return _Bracket(lo, hi)


def sampling_select(reader: StreamReader, budget: RegisterBudget, rank: int, rng: np.random.Generator,
                    z: float = 4.0) -> int:
    """
    Randomized selection that refines its bracket while the pass is running.

    Every pass treats the prefix of the stream read so far as a sample of
    the candidates and keeps shrinking the bracket around the target's
    expected position (see `_Refinement`); all counts stay exact, so the
    answer never depends on the estimate. On a randomly ordered stream a
    pass keeps roughly z^2/s of its candidates and finishes outright once
    fewer than about (s/z)^2 remain, which gives the log log_s n pass
    count. An ordered stream makes the estimate miss; after two misses in
    a row the remaining passes switch to reservoir bracketing with `rng`,
    which is slower but does not depend on order.

    Needs s >= SAMPLING_MIN_S; smaller budgets raise SelectionError.
    """
    _check_request(reader, budget, rank, SAMPLING_MIN_S)
    if reader.length <= budget.s:
        return _load_all(reader, budget, rank)

    outer = _Bracket(None, None)
    size, target, misses = reader.length, rank, 0
    for _ in range(MAX_PASSES):
        if misses >= 2:
            logger.debug("pass %d: stream looks ordered, switching to reservoir brackets", reader.pass_count)
            return _sample_rounds(reader, budget, rank, rng, outer, z)
        state = _refine_pass(reader, budget, outer, size, target, z)
        local = target - state.below
        if 1 <= local <= state.count:
            if state.lo is not None and state.hi is not None and state.count > state.hi - state.lo + 1:
                raise DuplicateValues(f"{state.count} values cannot be distinct inside [{state.lo}, {state.hi}]")
            if not state.frozen:
                return int(state.buffer[local - 1])
            if state.count == size:
                misses = 2
                continue
            outer, size, target, misses = _Bracket(state.lo, state.hi), state.count, local, 0
        elif local < 1:
            outer, size, misses = _Bracket(outer.lo, state.lo - 1), state.below, misses + 1
        else:
            outer, size, target = _Bracket(state.hi + 1, outer.hi), state.above, local - state.count
            misses += 1
        logger.debug("pass %d: %d candidates left in [%s, %s]", reader.pass_count, size, outer.lo, outer.hi)
    raise SelectionError(f"sampling_select made no progress within {MAX_PASSES} passes")


# =========================
# Inputs and oracle
# =========================
def synthetic_input(n: int, rng: np.random.Generator) -> np.ndarray:
    """n distinct values from [2n] in random order."""
    return rng.choice(2 * n, size=n, replace=False).astype(np.int64) + 1


def sort_oracle(values: Sequence[int] | np.ndarray, rank: int) -> int:
    return int(np.sort(np.asarray(values))[rank - 1])


def pass_bound(algo: str, n: int, s: int) -> int:
    """Pass budgets the benchmark checks: 2*ceil(log_s n) + 2 and ceil(log2 log_s n) + 3."""
    if n <= s:
        return 1
    log_s_n = math.log(n) / math.log(s)
    if algo == "multipass":
        return 2 * math.ceil(log_s_n) + 2
    return max(0, math.ceil(math.log2(log_s_n))) + 3


# =========================
# Benchmark grid
# =========================
@dataclass(frozen=True)
class BenchConfig:
    ns: tuple[int, ...] = ()
    ss: tuple[int, ...] = ()
    algos: tuple[str, ...] = ("multipass", "sampling")
    seeds: tuple[int, ...] = (0,)
    rank: int | None = None  # default: the median rank ceil(n/2)
    jobs: int = 1

    def points(self) -> list[tuple[str, int, int, int]]:
        """Grid points; sampling is skipped where s is below SAMPLING_MIN_S."""
        return [(a, n, s, seed) for n in self.ns for s in self.ss for a in self.algos for seed in self.seeds
                if a != "sampling" or s >= SAMPLING_MIN_S]


def run_select(algo: str, n: int, s: int, seed: int, rank: int | None = None,
               values: np.ndarray | None = None) -> ExperimentRecord:
    if algo not in ("multipass", "sampling"):
        raise SelectionError(f"Unknown algorithm {algo!r}")
    if values is None:
        values = synthetic_input(n, np.random.default_rng([seed, n]))
    rank = rank or (n + 1) // 2
    reader = StreamReader.from_array(values)
    budget = RegisterBudget(s)
    start = time.perf_counter()
    if algo == "multipass":
        value = multipass_select(reader, budget, rank)
    else:
        value = sampling_select(reader, budget, rank, np.random.default_rng([seed, n, s, 1]))
    wall = (time.perf_counter() - start) * 1000
    correct = value == sort_oracle(values, rank)
    return ExperimentRecord(
        suite="select",
        params={"algo": algo, "n": n, "s": s},
        seed=seed,
        measured={"passes": reader.pass_count, "peak_registers": budget.peak, "correct": correct, "value": value},
        passed=correct and budget.peak <= s,
        wall_ms=wall,
    )


def _run_point(point: tuple[str, int, int, int, int | None]) -> ExperimentRecord:
    algo, n, s, seed, rank = point
    return run_select(algo, n, s, seed, rank)


def pass_bench(config: BenchConfig) -> list[ExperimentRecord]:
    points = [p + (config.rank,) for p in config.points()]
    if config.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_run_point, points))
    return [_run_point(p) for p in points]


def bench_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    return records_to_frame(records, columns=["suite", *BENCH_COLUMNS])[BENCH_COLUMNS]
