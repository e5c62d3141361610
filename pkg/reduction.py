# reduction.py
# -------------------------------------------------------------------
# From oblivious branching programs to two-party protocols:
# - Split a length-kn query sequence into 4k^2 segments
# - Give 2k segments to Alice so both players own many exclusive indices
# - Embed a size-N MedianBit instance into a size-n input (XOR correction)
# - Simulate the program as a protocol: one node-name message per handoff
#   plus a final output bit
# -------------------------------------------------------------------

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from bp_core import BranchingProgram, check_oblivious, evaluate_deterministic
from config import ASSIGNMENT_ATTEMPT_CAP, EXHAUSTIVE_ASSIGNMENT_CAP

logger = logging.getLogger(__name__)

RANDOM_ATTEMPTS_FIRST = 1000


class ReductionError(ValueError):
    pass


class CoverageError(ReductionError):
    """A player would have to read an index it does not hold."""


# =========================
# Segments
# =========================
def segment_length(n: int, k: int) -> int:
    return -(-n // (4 * k))


def segment_split(query_sequence: Sequence[int], k: int, n: int) -> list[tuple[int, ...]]:
    """
    Cut the sequence into r = 4k^2 consecutive segments of length ceil(n/4k).

    When 4k does not divide n the tail is padded with queries that read
    nothing, so the last segments come out shorter.
    """
    if k < 1:
        raise ReductionError(f"k must be a positive integer, got {k}")
    if len(query_sequence) != k * n:
        raise ReductionError(f"Query sequence has length {len(query_sequence)}, expected k*n = {k * n}")
    size = segment_length(n, k)
    seq = tuple(query_sequence)
    return [seq[j * size : (j + 1) * size] for j in range(4 * k * k)]


def random_query_sequence(n: int, k: int, rng: np.random.Generator) -> list[int]:
    """k independent permutations of 1..n, concatenated."""
    return [int(i) + 1 for _ in range(k) for i in rng.permutation(n)]


@dataclass(frozen=True)
class SegmentAssignment:
    k: int
    n: int
    query_sequence: tuple[int, ...]
    segments: tuple[tuple[int, ...], ...]
    L_A: tuple[int, ...]
    L_B: tuple[int, ...]
    n_A: int
    n_B: int
    I_A: tuple[int, ...]
    I_B: tuple[int, ...]
    Q: tuple[int, ...]
    N: int

    @property
    def r(self) -> int:
        return 4 * self.k * self.k

    @property
    def segment_length(self) -> int:
        return segment_length(self.n, self.k)

    @property
    def n_A_bound(self) -> float:
        return self.n / (2 * math.comb(self.r, 2 * self.k))

    def owner(self, segment: int) -> str:
        return "A" if segment in self.L_A else "B"

    def indices_of(self, segment_ids: Sequence[int]) -> set[int]:
        return {i for j in segment_ids for i in self.segments[j]}

    def exclusive(self) -> tuple[list[int], list[int]]:
        """Indices not read in Bob's segments, and indices not read in Alice's."""
        in_a, in_b = self.indices_of(self.L_A), self.indices_of(self.L_B)
        everything = range(1, self.n + 1)
        return [i for i in everything if i not in in_b], [i for i in everything if i not in in_a]

    def with_size(self, N: int) -> "SegmentAssignment":
        only_a, only_b = self.exclusive()
        return _choose(self, only_a, only_b, N)

    def check(self) -> bool:
        in_a, in_b = self.indices_of(self.L_A), self.indices_of(self.L_B)
        total_a = sum(len(self.segments[j]) for j in self.L_A)
        return (
            not set(self.I_A) & in_b
            and not set(self.I_B) & in_a
            and not set(self.I_A) & set(self.I_B)
            and len(self.I_A) == len(self.I_B) == self.N // 2
            and total_a <= self.n / 2
            and self.n_A >= self.n_A_bound
            and self.n_B >= self.n / 2
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "r": self.r,
            "segment_length": self.segment_length,
            "L_A": list(self.L_A),
            "L_B": list(self.L_B),
            "n_A": self.n_A,
            "n_B": self.n_B,
            "n_A_bound": self.n_A_bound,
            "N": self.N,
            "I_A": list(self.I_A),
            "I_B": list(self.I_B),
            "Q": list(self.Q),
        }


def embedded_size(n: int, k: int) -> int:
    """N = ceil(n / C(4k^2, 2k)), rounded up to even."""
    N = -(-n // math.comb(4 * k * k, 2 * k))
    return N + (N & 1)


def _choose(base: SegmentAssignment, only_a: list[int], only_b: list[int], N: int) -> SegmentAssignment:
    if N % 2 or N < 0 or N > base.n:
        raise ReductionError(f"N must be an even size between 0 and {base.n}, got {N}")
    half = N // 2
    I_A = tuple(only_a[:half])
    taken = set(I_A)
    I_B = tuple([i for i in only_b if i not in taken][:half])
    if len(I_A) < half or len(I_B) < half:
        raise ReductionError(f"Only {len(I_A)} / {len(I_B)} exclusive indices available for N/2 = {half}")
    used = taken | set(I_B)
    Q = tuple(i for i in range(1, base.n + 1) if i not in used)
    return SegmentAssignment(
        base.k, base.n, base.query_sequence, base.segments, base.L_A, base.L_B,
        base.n_A, base.n_B, I_A, I_B, Q, N,
    )


def _evaluate(segments, k: int, n: int, L_A: tuple[int, ...]) -> tuple[tuple[int, ...], int, int, list[int], list[int]]:
    L_B = tuple(j for j in range(len(segments)) if j not in L_A)
    in_a = {i for j in L_A for i in segments[j]}
    in_b = {i for j in L_B for i in segments[j]}
    only_a = [i for i in range(1, n + 1) if i not in in_b]
    only_b = [i for i in range(1, n + 1) if i not in in_a]
    return L_B, len(only_a), len(only_b), only_a, only_b


def find_assignment(
    segments: Sequence[Sequence[int]],
    k: int,
    n: int,
    rng: np.random.Generator,
    exhaustive_cap: int = EXHAUSTIVE_ASSIGNMENT_CAP,
    attempt_cap: int = ASSIGNMENT_ATTEMPT_CAP,
) -> SegmentAssignment:
    """
    Pick 2k of the 4k^2 segments for Alice so that n_A >= n / (2 C(4k^2, 2k))
    and n_B >= n/2.

    Uniformly random choices come first; averaging over all choices shows a
    good one exists. After RANDOM_ATTEMPTS_FIRST misses, every subset is
    tried when there are at most `exhaustive_cap` of them.
    """
    r = 4 * k * k
    if len(segments) != r:
        raise ReductionError(f"Expected {r} segments for k={k}, got {len(segments)}")
    total = math.comb(r, 2 * k)
    bound_a, bound_b = n / (2 * total), n / 2

    def candidates():
        for attempt in range(attempt_cap):
            if attempt == RANDOM_ATTEMPTS_FIRST and total <= exhaustive_cap:
                logger.info("Random choices missed %d times; trying all %d subsets", attempt, total)
                yield from itertools.combinations(range(r), 2 * k)
                return
            yield tuple(sorted(int(j) for j in rng.choice(r, size=2 * k, replace=False)))

    segs = tuple(tuple(s) for s in segments)
    for tries, L_A in enumerate(candidates(), start=1):
        L_B, n_A, n_B, only_a, only_b = _evaluate(segs, k, n, L_A)
        if n_A >= bound_a and n_B >= bound_b:
            logger.debug("Assignment found after %d tries: L_A=%s n_A=%d n_B=%d", tries, L_A, n_A, n_B)
            base = SegmentAssignment(
                k, n, tuple(i for s in segs for i in s), segs, L_A, L_B, n_A, n_B, (), (), (), 0
            )
            return _choose(base, only_a, only_b, embedded_size(n, k))
    raise ReductionError(
        f"No segment assignment met n_A >= {bound_a:.3g} and n_B >= {bound_b:g} "
        f"within {attempt_cap} attempts (k={k}, n={n})"
    )


def assignment_from_index_sets(
    query_sequence: Sequence[int], k: int, n: int, L_A: Sequence[int], I_A: Sequence[int], I_B: Sequence[int]
) -> SegmentAssignment:
    """Assignment with caller-chosen segments and index halves (used for direct embeddings)."""
    segs = tuple(segment_split(query_sequence, k, n))
    L_A = tuple(sorted(L_A))
    L_B, n_A, n_B, _, _ = _evaluate(segs, k, n, L_A)
    if len(I_A) != len(I_B) or set(I_A) & set(I_B):
        raise ReductionError("I_A and I_B must be disjoint and of equal size")
    used = set(I_A) | set(I_B)
    Q = tuple(i for i in range(1, n + 1) if i not in used)
    return SegmentAssignment(
        k, n, tuple(query_sequence), segs, L_A, L_B, n_A, n_B,
        tuple(sorted(I_A)), tuple(sorted(I_B)), Q, 2 * len(I_A),
    )


def reduction_parameters(n: int, k: int, S: float) -> dict:
    total = math.comb(4 * k * k, 2 * k)
    return {
        "n": n,
        "k": k,
        "r": 4 * k * k,
        "segment_length": segment_length(n, k),
        "subsets": total,
        "n_A_bound": n / (2 * total),
        "N": embedded_size(n, k),
        "messages": 4 * k + 1,
        "message_bits": math.ceil(S),
    }


# =========================
# Embedding
# =========================
def q_values(n: int, N: int) -> list[int]:
    """Smallest valid padding: (n-N)/2 values from [n-N], then (n-N)/2 from [n+N+1, 2n]."""
    half = (n - N) // 2
    return list(range(1, half + 1)) + list(range(n + N + 1, n + N + 1 + half))


def embed_instance(small: Sequence[int], assignment: SegmentAssignment, n: int | None = None) -> tuple[tuple[int, ...], int]:
    """
    Place a size-N instance inside a size-n input.

    Alice's half goes to I_A and Bob's to I_B, both shifted up by n-N; Q
    gets the padding values. The median moves by exactly n-N, so MedianBit
    of the full input is MedianBit of the small one XOR the low bit of n-N.
    """
    n = assignment.n if n is None else n
    N = len(small)
    if N % 2:
        raise ReductionError(f"The embedded instance must have even size, got N={N}")
    if N > n:
        raise ReductionError(f"Cannot embed N={N} values into n={n}")
    if N != assignment.N:
        raise ReductionError(f"Assignment expects N={assignment.N} values, got {N}")
    if (n - N) % 2:
        raise ReductionError(f"n-N must be even to split the padding, got n={n}, N={N}")
    if len(set(small)) != N or any(not 1 <= v <= 2 * N for v in small):
        raise ReductionError(f"Small instance must be {N} distinct values from 1..{2 * N}")
    shift = n - N
    full = [0] * n
    for i, v in zip(assignment.I_A, small[: N // 2]):
        full[i - 1] = v + shift
    for i, v in zip(assignment.I_B, small[N // 2 :]):
        full[i - 1] = v + shift
    for i, v in zip(assignment.Q, q_values(n, N)):
        full[i - 1] = v
    return tuple(full), shift & 1


# =========================
# Protocol simulation
# =========================
@dataclass(frozen=True)
class ProtocolRun:
    transcript: tuple[tuple[str, int, int], ...]  # (speaker, payload, bit count)
    output: int
    message_count: int
    max_message_bits: int
    bp_output: int
    correction: int

    def within_budget(self, k: int, S: float) -> bool:
        if self.message_count > 4 * k + 1 or not self.transcript:
            return False
        *names, last = self.transcript
        return all(bits <= math.ceil(S) for _, _, bits in names) and last[2] == 1

    def to_dict(self) -> dict:
        return {
            "output": self.output,
            "bp_output": self.bp_output,
            "correction": self.correction,
            "message_count": self.message_count,
            "max_message_bits": self.max_message_bits,
            "transcript": transcript_lines(self),
        }


def _level_names(bp: BranchingProgram) -> tuple[dict[int, int], int]:
    """Dense per-level names for useful nodes and the bits needed to send one."""
    depth = {bp.source: 0}
    for v in bp.topological_order:
        if v in depth and v in bp.useful:
            for w in bp.successors[v]:
                depth.setdefault(w, depth[v] + 1)
    levels: dict[int, list[int]] = {}
    for v in sorted(bp.useful):
        levels.setdefault(depth[v], []).append(v)
    names = {v: rank for members in levels.values() for rank, v in enumerate(members)}
    width = max((len(m) for m in levels.values()), default=1)
    return names, math.ceil(math.log2(width)) if width > 1 else 0


def _view(assignment: SegmentAssignment, own: Sequence[int], half: Sequence[int]) -> dict[int, int]:
    shift = assignment.n - assignment.N
    view = {i: v for i, v in zip(assignment.Q, q_values(assignment.n, assignment.N))}
    view.update({i: v + shift for i, v in zip(own, half)})
    return view


def protocol_from_bp(
    bp: BranchingProgram,
    assignment: SegmentAssignment,
    alice_half: Sequence[int],
    bob_half: Sequence[int],
) -> ProtocolRun:
    """
    Run the program as a protocol. Segment owners take turns; whenever the
    owner changes, the previous owner sends the name of the node reached.
    The player holding the sink sends its label XOR the correction bit.
    """
    oblivious, seq = check_oblivious(bp)
    if not oblivious:
        raise ReductionError("protocol_from_bp needs an oblivious program")
    if not bp.deterministic:
        raise ReductionError("protocol_from_bp needs a deterministic program")
    if tuple(seq) != assignment.query_sequence[: len(seq)]:
        raise ReductionError("Program's query sequence does not match the assignment's sequence")
    half = assignment.N // 2
    if len(alice_half) != half or len(bob_half) != half:
        raise ReductionError(f"Each player needs {half} values, got {len(alice_half)} and {len(bob_half)}")

    views = {"A": _view(assignment, assignment.I_A, alice_half), "B": _view(assignment, assignment.I_B, bob_half)}
    names, bits = _level_names(bp)
    size = assignment.segment_length
    transcript: list[tuple[str, int, int]] = []
    holder = assignment.owner(0)
    v = bp.source
    for p, index in enumerate(seq):
        owner = assignment.owner(p // size)
        if owner != holder:
            if bits:
                transcript.append((holder, names[v], bits))
            holder = owner
        value = views[holder].get(index)
        if value is None:
            raise CoverageError(f"Player {holder} reads x_{index} at step {p + 1} but does not hold it")
        v = bp.nodes[v].edges[value][0]
    label = bp.sink_labels[v]
    if label not in (0, 1):
        raise ReductionError(f"Sink label {label!r} is not a bit")
    correction = (assignment.n - assignment.N) & 1
    transcript.append((holder, label ^ correction, 1))
    return ProtocolRun(
        transcript=tuple(transcript),
        output=label ^ correction,
        message_count=len(transcript),
        max_message_bits=max(b for _, _, b in transcript),
        bp_output=label,
        correction=correction,
    )


def run_embedded(bp: BranchingProgram, assignment: SegmentAssignment, small: Sequence[int]) -> tuple[ProtocolRun, int]:
    """Protocol run on an embedded instance plus direct evaluation of the full input, XOR correction."""
    full, correction = embed_instance(small, assignment)
    half = assignment.N // 2
    run = protocol_from_bp(bp, assignment, small[:half], small[half:])
    return run, evaluate_deterministic(bp, full) ^ correction


def transcript_lines(run: ProtocolRun) -> list[str]:
    return [f"{speaker},{payload:x},{bits}" for speaker, payload, bits in run.transcript]
