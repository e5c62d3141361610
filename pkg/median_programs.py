# median_programs.py
# -------------------------------------------------------------------
# Median programs:
# - Sort-based median / MedianBit oracles
# - The guess-and-verify nondeterministic oblivious read-once program
#   (nodes are (i, m, l, e) tuples, size O(n^4))
# - Per-guess deterministic verifiers and an exhaustive reference program
# - Re-indexing of read-once programs for symmetric functions
# -------------------------------------------------------------------

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence

import numpy as np

from bp_core import (
    BranchingProgram,
    InputError,
    Node,
    ProgramBuilder,
    ProgramError,
    check_read_k,
    relabel_sinks,
)

logger = logging.getLogger(__name__)


# =========================
# Oracles
# =========================
def _check_distinct(values: Sequence[int], upper: int | None = None) -> None:
    n = len(values)
    if n == 0:
        raise InputError("Median of an empty input is undefined")
    upper = 2 * n if upper is None else upper
    for x in values:
        if not 1 <= x <= upper:
            raise InputError(f"Value {x} is outside 1..{upper}")
    if len(set(values)) != n:
        raise InputError(f"Input values must be distinct, got {list(values)}")


def median_rank(n: int) -> int:
    """Ascending rank of the median: ceil(n/2)."""
    return (n + 1) // 2


def median_oracle(values: Sequence[int]) -> int:
    _check_distinct(values)
    return sorted(values)[median_rank(len(values)) - 1]


def medianbit_oracle(values: Sequence[int]) -> int:
    return median_oracle(values) & 1


def distinct_inputs(n: int, domain: int | None = None) -> Iterable[tuple[int, ...]]:
    """All ordered inputs of n distinct values from 1..domain (default 2n)."""
    return itertools.permutations(range(1, (domain or 2 * n) + 1), n)


def random_distinct_inputs(n: int, count: int, rng: np.random.Generator, domain: int | None = None) -> np.ndarray:
    """count rows of n distinct values from 1..domain, in random order."""
    domain = domain or 2 * n
    keys = rng.random((count, domain))
    return np.argsort(keys, axis=1)[:, :n] + 1


# =========================
# Guess-and-verify program
# =========================
def _state_bound(n: int) -> int:
    return (n + 1) // 2 + 1


def _step(n: int, i_next: int, ell: int, e: int) -> bool:
    """Can counts (ell, e) after i_next reads still end with the guess being the median?"""
    h = median_rank(n)
    if ell > h - 1 or e > 1:
        return False
    remaining = n - i_next
    if (h - 1 - ell) + (1 - e) > remaining:
        return False
    return i_next - ell - e <= n - h


def median_states(n: int) -> Iterable[tuple[int, int, int, int]]:
    """Every (i, m, l, e) with 1 <= i < n and l + e <= min(i, floor((n+1)/2) + 1)."""
    bound = _state_bound(n)
    for i in range(1, n):
        cap = min(i, bound)
        for m in range(1, 2 * n + 1):
            for ell in range(cap + 1):
                for e in range(cap + 1 - ell):
                    yield i, m, ell, e


def count_median_nbp_nodes(n: int) -> int:
    """Node count of build_median_nbp(n) without materializing it."""
    _check_nbp_size(n)
    bound = _state_bound(n)
    states = sum(2 * n * (c + 1) * (c + 2) // 2 for c in (min(i, bound) for i in range(1, n)))
    return 1 + 2 * n + states


def _check_nbp_size(n: int) -> None:
    if n < 2 or n % 2:
        raise InputError(f"n must be an even integer >= 2, got {n}")


def build_median_nbp(n: int) -> BranchingProgram:
    """
    Nondeterministic oblivious read-once program computing the median.

    The source reads x_1 and guesses the median m: for every value it has one
    edge per guess, (2n)^2 edges in all. State (i, m, l, e) has read i values,
    l of them below m and e equal to m, and reads x_{i+1}. Edges that make the
    guess impossible are left out; after x_n the surviving path enters the
    sink labeled m.
    """
    _check_nbp_size(n)
    domain = 2 * n
    b = ProgramBuilder(domain, n)
    source = b.add_node(1)
    ids: dict[tuple[int, int, int, int], int] = {}
    for state in median_states(n):
        ids[state] = b.add_node(state[0] + 1)
    sinks = {m: b.add_sink(m) for m in range(1, domain + 1)}

    def classes(m: int):
        # (values, dl, de) for values below, equal to and above the guess
        return ((range(1, m), 1, 0), ((m,), 0, 1), (range(m + 1, domain + 1), 0, 0))

    for m in range(1, domain + 1):
        for values, dl, de in classes(m):
            target = ids[(1, m, dl, de)]
            for j in values:
                b.add_edge(source, j, target)

    for (i, m, ell, e), nid in ids.items():
        for values, dl, de in classes(m):
            ell2, e2 = ell + dl, e + de
            if not _step(n, i + 1, ell2, e2):
                continue
            if i + 1 == n:
                # the feasibility test already forces l = ceil(n/2) - 1 and e = 1
                target = sinks[m]
            else:
                target = ids[(i + 1, m, ell2, e2)]
            for j in values:
                b.add_edge(nid, j, target)

    bp = b.build(source)
    logger.info("Built median program for n=%d: %d nodes", n, len(bp))
    return bp


def build_medianbit_nbp(n: int, complement: bool = False) -> BranchingProgram:
    """MedianBit (or its complement) from the same guess-and-verify structure."""
    flip = 1 if complement else 0
    return relabel_sinks(build_median_nbp(n), lambda m: (m & 1) ^ flip)


def source_out_degree(bp: BranchingProgram) -> int:
    return sum(len(succ) for succ in bp.nodes[bp.source].edges.values())


def build_guess_program(n: int, m: int) -> BranchingProgram:
    """Deterministic read-once program accepting (label 1) iff m is the median."""
    _check_nbp_size(n)
    domain = 2 * n
    if not 1 <= m <= domain:
        raise InputError(f"Guess {m} is outside 1..{domain}")
    b = ProgramBuilder(domain, n)
    start = b.add_node(1)
    reject = b.add_sink(0)
    accept = b.add_sink(1)
    ids = {(0, 0, 0): start}
    frontier = [(0, 0, 0)]
    while frontier:
        nxt = []
        for i, ell, e in frontier:
            nid = ids[(i, ell, e)]
            for j in range(1, domain + 1):
                ell2, e2 = ell + (j < m), e + (j == m)
                if not _step(n, i + 1, ell2, e2):
                    b.add_edge(nid, j, reject)
                elif i + 1 == n:
                    ok = ell2 == median_rank(n) - 1 and e2 == 1
                    b.add_edge(nid, j, accept if ok else reject)
                else:
                    key = (i + 1, ell2, e2)
                    if key not in ids:
                        ids[key] = b.add_node(i + 2)
                        nxt.append(key)
                    b.add_edge(nid, j, ids[key])
        frontier = nxt
    return b.build(start)


def build_medianbit_decision_program(n: int) -> BranchingProgram:
    """
    Exhaustive deterministic oblivious read-once program for MedianBit.

    The state after i reads is the set of values seen. Inputs with a
    repeated value fall into a chain that ends at the 0-sink.
    """
    _check_nbp_size(n)
    domain = 2 * n
    b = ProgramBuilder(domain, n)
    zero, one = b.add_sink(0), b.add_sink(1)
    start = b.add_node(1)
    level: dict[frozenset[int] | None, int] = {frozenset(): start}
    for i in range(n):
        last = i == n - 1
        nxt: dict[frozenset[int] | None, int] = {}

        def target(key):
            if key not in nxt:
                nxt[key] = b.add_node(i + 2)
            return nxt[key]

        for seen, nid in level.items():
            for j in range(1, domain + 1):
                if seen is None or j in seen:
                    dst = zero if last else target(None)
                elif last:
                    values = sorted(seen | {j})
                    dst = one if values[median_rank(n) - 1] & 1 else zero
                else:
                    dst = target(seen | {j})
                b.add_edge(nid, j, dst)
        level = nxt
    bp = b.build(start)
    logger.info("Built exhaustive MedianBit program for n=%d: %d nodes", n, len(bp))
    return bp


def size_slope(ns: Sequence[int]) -> float:
    """Least-squares slope of log(node count) against log(n)."""
    counts = [count_median_nbp_nodes(n) for n in ns]
    slope, _ = np.polyfit(np.log(ns), np.log(counts), 1)
    return float(slope)


# =========================
# Obliviation
# =========================
def obliviate_readonce(bp: BranchingProgram) -> BranchingProgram:
    """
    Replace the index read at each node v by |I_v| + 1.

    I_v is the set of indices read on the way to v; in a read-once program
    its size is the path length, which must not depend on the path. Only
    symmetric functions are guaranteed to be preserved; that is the
    caller's responsibility.
    """
    if not check_read_k(bp, 1):
        raise ProgramError("obliviate_readonce needs a read-once program")
    depth: dict[int, set[int]] = {bp.source: {0}}
    for v in bp.topological_order:
        if v not in depth:
            continue
        for w in bp.successors[v]:
            depth.setdefault(w, set()).update(d + 1 for d in depth[v])
    nodes = {}
    for v, node in bp.nodes.items():
        if node.is_sink or v not in bp.useful:
            nodes[v] = node
            continue
        if len(depth[v]) != 1:
            raise ProgramError(f"|I_v| is ill-defined at node {v}: path lengths {sorted(depth[v])}")
        (d,) = depth[v]
        if d + 1 > bp.num_inputs:
            raise ProgramError(f"Node {v} sits below depth {bp.num_inputs}")
        nodes[v] = Node(v, d + 1, node.edges)
    return BranchingProgram(bp.domain_size, bp.num_inputs, nodes, bp.source, bp.sink_labels)


def node_count_table(ns: Sequence[int]) -> list[dict]:
    """Rows (n, nodes, log2_nodes, n^4) for the size sweep."""
    rows = []
    for n in ns:
        c = count_median_nbp_nodes(n)
        rows.append({"n": n, "nodes": c, "log2_nodes": math.log2(c), "n4": n**4})
    return rows
