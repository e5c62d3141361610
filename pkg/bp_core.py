# bp_core.py
# -------------------------------------------------------------------
# Multiway branching programs:
# - Immutable program representation + incremental builder
# - Deterministic and nondeterministic evaluation
# - Structural checks (oblivious, read-k, leveled) and time/space metrics
# - Canonical JSON round trip
# -------------------------------------------------------------------

from __future__ import annotations

import heapq
import itertools
import json
import logging
import math
import re
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)


# =========================
# Errors
# =========================
class ProgramError(ValueError):
    """Base class for branching-program errors."""


class MalformedProgram(ProgramError):
    pass


class NotDeterministic(ProgramError):
    pass


class InputError(ProgramError):
    pass


class NoPath(ProgramError):
    """No path consistent with the input reaches a sink."""


class InconsistentSinks(ProgramError):
    """Consistent paths reach sinks with different labels."""


# =========================
# Types
# =========================
@dataclass(frozen=True)
class Node:
    id: int
    index: int | None  # None marks a sink
    edges: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def is_sink(self) -> bool:
        return self.index is None


@dataclass(frozen=True)
class ProgramMetrics:
    time: int
    space: float
    node_count: int
    leveled: bool
    oblivious: bool
    query_sequence: tuple[int, ...] | None
    unreachable: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "time": self.time,
            "space": self.space,
            "nodes": self.node_count,
            "leveled": self.leveled,
            "oblivious": self.oblivious,
            "query_sequence": list(self.query_sequence) if self.query_sequence is not None else None,
            "unreachable": list(self.unreachable),
        }


@dataclass(frozen=True)
class BranchingProgram:
    """
    A multiway branching program over inputs x_1..x_n with values in [domain_size].

    Values and query indices are 1-based. Sinks are the nodes listed in
    ``sink_labels``; they carry no index and no edges.
    """

    domain_size: int
    num_inputs: int
    nodes: Mapping[int, Node]
    source: int
    sink_labels: Mapping[int, Hashable]

    def __post_init__(self):
        if self.domain_size < 1 or self.num_inputs < 1:
            raise MalformedProgram(
                f"domain_size and num_inputs must be positive (got {self.domain_size}, {self.num_inputs})"
            )
        if self.source not in self.nodes:
            raise MalformedProgram(f"Source {self.source} is not a node")
        for sid in self.sink_labels:
            if sid not in self.nodes:
                raise MalformedProgram(f"Sink {sid} is not a node")
        for node in self.nodes.values():
            if node.id in self.sink_labels:
                if node.index is not None or node.edges:
                    raise MalformedProgram(f"Sink {node.id} must have no index and no out-edges")
                continue
            if node.index is None or not 1 <= node.index <= self.num_inputs:
                raise MalformedProgram(
                    f"Node {node.id} queries index {node.index}, expected a value in 1..{self.num_inputs}"
                )
            for value, succ in node.edges.items():
                if not 1 <= value <= self.domain_size:
                    raise MalformedProgram(f"Node {node.id} has an edge for out-of-range value {value}")
                for w in succ:
                    if w not in self.nodes:
                        raise MalformedProgram(f"Node {node.id} points to unknown node {w}")
        self.topological_order  # raises on cycles

    # ---- derived structure ----
    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        """Kahn order with ties broken by smallest id."""
        indeg = {v: 0 for v in self.nodes}
        for node in self.nodes.values():
            for succ in node.edges.values():
                for w in succ:
                    indeg[w] += 1
        heap = [v for v, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for succ in self.nodes[v].edges.values():
                for w in succ:
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        heapq.heappush(heap, w)
        if len(order) != len(self.nodes):
            raise MalformedProgram("Program graph contains a cycle")
        return tuple(order)

    @cached_property
    def successors(self) -> dict[int, frozenset[int]]:
        return {v: frozenset(w for succ in n.edges.values() for w in succ) for v, n in self.nodes.items()}

    @cached_property
    def reachable(self) -> frozenset[int]:
        seen = {self.source}
        stack = [self.source]
        while stack:
            for w in self.successors[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(seen)

    @cached_property
    def useful(self) -> frozenset[int]:
        """Nodes lying on at least one source-to-sink path."""
        reaches_sink = set(self.sink_labels)
        for v in reversed(self.topological_order):
            if v not in reaches_sink and any(w in reaches_sink for w in self.successors[v]):
                reaches_sink.add(v)
        return frozenset(reaches_sink & self.reachable)

    @cached_property
    def deterministic(self) -> bool:
        for v, node in self.nodes.items():
            if v in self.sink_labels:
                continue
            if len(node.edges) != self.domain_size or any(len(s) != 1 for s in node.edges.values()):
                return False
        return True

    def __len__(self) -> int:
        return len(self.nodes)


# =========================
# Construction helpers
# =========================
class ProgramBuilder:
    """Incremental construction with dense ids handed out in creation order."""

    def __init__(self, domain_size: int, num_inputs: int):
        self.domain_size = domain_size
        self.num_inputs = num_inputs
        self._index: dict[int, int | None] = {}
        self._edges: dict[int, dict[int, set[int]]] = {}
        self._labels: dict[int, Hashable] = {}

    def add_node(self, index: int) -> int:
        nid = len(self._index)
        self._index[nid] = index
        self._edges[nid] = {}
        return nid

    def add_sink(self, label: Hashable) -> int:
        nid = len(self._index)
        self._index[nid] = None
        self._edges[nid] = {}
        self._labels[nid] = label
        return nid

    def add_edge(self, src: int, value: int, dst: int) -> None:
        self._edges[src].setdefault(value, set()).add(dst)

    def build(self, source: int = 0) -> BranchingProgram:
        nodes = {
            nid: Node(nid, self._index[nid], {v: tuple(sorted(s)) for v, s in sorted(self._edges[nid].items())})
            for nid in self._index
        }
        return BranchingProgram(self.domain_size, self.num_inputs, nodes, source, dict(self._labels))


def constant_program(label: Hashable, domain_size: int = 2, num_inputs: int = 1) -> BranchingProgram:
    b = ProgramBuilder(domain_size, num_inputs)
    b.add_sink(label)
    return b.build()


def decision_tree(domain_size: int, num_inputs: int, fn: Callable[[tuple[int, ...]], Hashable]) -> BranchingProgram:
    """Complete |D|-ary tree querying x_1..x_n in order; leaves labeled by fn(input)."""
    b = ProgramBuilder(domain_size, num_inputs)
    if num_inputs == 0:
        raise InputError("decision_tree needs at least one input")
    root = b.add_node(1)
    frontier = [(root, ())]
    for depth in range(1, num_inputs + 1):
        nxt = []
        for nid, prefix in frontier:
            for value in range(1, domain_size + 1):
                xs = prefix + (value,)
                child = b.add_node(depth + 1) if depth < num_inputs else b.add_sink(fn(xs))
                b.add_edge(nid, value, child)
                nxt.append((child, xs))
        frontier = nxt
    return b.build(root)


def relabel_sinks(bp: BranchingProgram, fn: Callable[[Hashable], Hashable]) -> BranchingProgram:
    return BranchingProgram(
        bp.domain_size, bp.num_inputs, bp.nodes, bp.source, {s: fn(lbl) for s, lbl in bp.sink_labels.items()}
    )


def random_oblivious_program(
    query_sequence: Sequence[int],
    domain_size: int,
    width: int,
    rng: np.random.Generator,
    num_inputs: int | None = None,
) -> BranchingProgram:
    """Leveled deterministic program reading query_sequence, with random edges and 0/1 sink labels."""
    if width < 1:
        raise InputError(f"width must be positive, got {width}")
    n = num_inputs or max(query_sequence, default=1)
    b = ProgramBuilder(domain_size, n)
    length = len(query_sequence)
    widths = [min(width, domain_size**t) for t in range(length + 1)]
    levels: list[list[int]] = []
    for t in range(length + 1):
        if t < length:
            levels.append([b.add_node(query_sequence[t]) for _ in range(widths[t])])
        else:
            levels.append([b.add_sink(int(bit)) for bit in rng.integers(0, 2, size=widths[t])])
    for t in range(length):
        for nid in levels[t]:
            targets = rng.integers(0, widths[t + 1], size=domain_size)
            for value, j in enumerate(targets, start=1):
                b.add_edge(nid, value, levels[t + 1][int(j)])
    return b.build(levels[0][0])


# =========================
# Evaluation
# =========================
def _check_input(bp: BranchingProgram, values: Sequence[int]) -> None:
    if len(values) != bp.num_inputs:
        raise InputError(f"Expected {bp.num_inputs} input values, got {len(values)}")
    for i, x in enumerate(values, start=1):
        if not 1 <= x <= bp.domain_size:
            raise InputError(f"x_{i}={x} is outside the domain 1..{bp.domain_size}")


def evaluate_deterministic(bp: BranchingProgram, values: Sequence[int]) -> Hashable:
    """
    Follow the unique path selected by ``values``.

    Branching edges raise NotDeterministic; a missing edge on the followed
    path raises MalformedProgram.
    """
    if any(len(s) > 1 for n in bp.nodes.values() for s in n.edges.values()):
        raise NotDeterministic("Program has a node with several successors for one value")
    _check_input(bp, values)
    v = bp.source
    while v not in bp.sink_labels:
        node = bp.nodes[v]
        succ = node.edges.get(values[node.index - 1])
        if not succ:
            raise MalformedProgram(f"Node {v} has no edge for value {values[node.index - 1]}")
        v = succ[0]
    return bp.sink_labels[v]


def reachable_sinks(bp: BranchingProgram, values: Sequence[int]) -> set[int]:
    """Sinks reachable from the source along edges consistent with ``values``."""
    _check_input(bp, values)
    seen = {bp.source}
    stack = [bp.source]
    sinks = set()
    while stack:
        v = stack.pop()
        if v in bp.sink_labels:
            sinks.add(v)
            continue
        node = bp.nodes[v]
        for w in node.edges.get(values[node.index - 1], ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return sinks


def evaluate_nondeterministic(bp: BranchingProgram, values: Sequence[int]) -> Hashable:
    sinks = reachable_sinks(bp, values)
    if not sinks:
        raise NoPath(f"No path consistent with input {tuple(values)} reaches a sink")
    labels = {bp.sink_labels[s] for s in sinks}
    if len(labels) > 1:
        raise InconsistentSinks(f"Input {tuple(values)} reaches sinks labeled {sorted(map(str, labels))}")
    return labels.pop()


# =========================
# Structural checks
# =========================
def useful_nodes(bp: BranchingProgram) -> frozenset[int]:
    """Nodes lying on some source-to-sink path."""
    return bp.useful


def _useful_depths(bp: BranchingProgram) -> dict[int, set[int]]:
    """All path lengths from the source to each useful node."""
    useful = bp.useful
    depths: dict[int, set[int]] = {v: set() for v in useful}
    if bp.source in useful:
        depths[bp.source].add(0)
    for v in bp.topological_order:
        if v not in useful or not depths[v]:
            continue
        for w in bp.successors[v]:
            if w in useful:
                depths[w].update(d + 1 for d in depths[v])
    return depths


def is_leveled(bp: BranchingProgram) -> bool:
    return all(len(d) == 1 for d in _useful_depths(bp).values())


def check_oblivious(bp: BranchingProgram) -> tuple[bool, tuple[int, ...] | None]:
    """Return (True, query_sequence) when every source-to-sink path reads the same indices."""
    depths = _useful_depths(bp)
    if not depths:
        return True, ()
    if any(len(d) != 1 for d in depths.values()):
        return False, None
    per_level: dict[int, set[int]] = {}
    sink_levels = set()
    for v, ds in depths.items():
        (d,) = ds
        if v in bp.sink_labels:
            sink_levels.add(d)
        else:
            per_level.setdefault(d, set()).add(bp.nodes[v].index)
    if len(sink_levels) != 1:
        return False, None
    (last,) = sink_levels
    if any(len(idx) != 1 for idx in per_level.values()) or set(per_level) != set(range(last)):
        return False, None
    return True, tuple(next(iter(per_level[d])) for d in range(last))


def max_index_multiplicity(bp: BranchingProgram) -> int:
    """Largest number of times one index is read along any source-to-sink path."""
    useful = bp.useful
    if not useful:
        return 0
    counts: dict[int, np.ndarray] = {}
    zero = np.zeros(bp.num_inputs + 1, dtype=np.int64)
    counts[bp.source] = zero
    best = 0
    for v in bp.topological_order:
        if v not in useful or v not in counts:
            continue
        here = counts[v]
        if v in bp.sink_labels:
            best = max(best, int(here.max()))
            continue
        out = here.copy()
        out[bp.nodes[v].index] += 1
        for w in bp.successors[v]:
            if w in useful:
                counts[w] = np.maximum(counts[w], out) if w in counts else out
    return best


def check_read_k(bp: BranchingProgram, k: int) -> bool:
    if k < 1:
        raise InputError(f"k must be a positive integer, got {k}")
    return max_index_multiplicity(bp) <= k


def longest_path(bp: BranchingProgram) -> int:
    """Longest source-to-sink path, counted in queries."""
    useful = bp.useful
    dist = {bp.source: 0} if bp.source in useful else {}
    for v in bp.topological_order:
        if v not in dist:
            continue
        for w in bp.successors[v]:
            if w in useful:
                dist[w] = max(dist.get(w, 0), dist[v] + 1)
    return max((dist[s] for s in bp.sink_labels if s in dist), default=0)


def level(bp: BranchingProgram) -> BranchingProgram:
    """
    Copy each useful node once per depth at which it is reached.

    The result computes the same function and every path from the source to
    a node has the same length. Programs that are already leveled come back
    unchanged.
    """
    depths = _useful_depths(bp)
    if not depths or all(len(d) == 1 for d in depths.values()):
        return bp
    copies = sorted((d, v) for v, ds in depths.items() for d in ds)
    new_id = {key: i for i, key in enumerate(copies)}
    nodes = {}
    labels = {}
    for (d, v), nid in new_id.items():
        old = bp.nodes[v]
        if v in bp.sink_labels:
            labels[nid] = bp.sink_labels[v]
            nodes[nid] = Node(nid, None, {})
            continue
        edges = {}
        for value, succ in old.edges.items():
            targets = tuple(sorted(new_id[(d + 1, w)] for w in succ if (d + 1, w) in new_id))
            if targets:
                edges[value] = targets
        nodes[nid] = Node(nid, old.index, edges)
    leveled = BranchingProgram(bp.domain_size, bp.num_inputs, nodes, new_id[(0, bp.source)], labels)
    logger.debug("Leveled program: %d -> %d nodes", len(bp), len(leveled))
    return leveled


def level_widths(bp: BranchingProgram) -> list[int]:
    """Number of useful nodes at each depth of a leveled program."""
    depths = _useful_depths(bp)
    if any(len(d) != 1 for d in depths.values()):
        raise ProgramError("level_widths needs a leveled program")
    widths: dict[int, int] = {}
    for ds in depths.values():
        (d,) = ds
        widths[d] = widths.get(d, 0) + 1
    return [widths[d] for d in sorted(widths)]


def metrics(bp: BranchingProgram) -> ProgramMetrics:
    oblivious, seq = check_oblivious(bp)
    return ProgramMetrics(
        time=longest_path(bp),
        space=math.log2(len(bp)),
        node_count=len(bp),
        leveled=is_leveled(bp),
        oblivious=oblivious,
        query_sequence=seq,
        unreachable=tuple(sorted(set(bp.nodes) - bp.reachable)),
    )


def all_inputs(bp: BranchingProgram) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(1, bp.domain_size + 1), repeat=bp.num_inputs)


# =========================
# JSON
# =========================
_INT_LABEL = re.compile(r"-?\d+")


def to_json(bp: BranchingProgram) -> str:
    order = bp.topological_order
    payload = {
        "domain": bp.domain_size,
        "n": bp.num_inputs,
        "source": bp.source,
        "nodes": [
            {
                "id": v,
                "index": bp.nodes[v].index,
                "edges": {str(val): list(succ) for val, succ in sorted(bp.nodes[v].edges.items())},
            }
            for v in order
        ],
        "sinks": {str(v): str(bp.sink_labels[v]) for v in order if v in bp.sink_labels},
    }
    return json.dumps(payload)


def from_json(text: str) -> BranchingProgram:
    try:
        data = json.loads(text)
        nodes = {}
        for rec in data["nodes"]:
            nid = int(rec["id"])
            edges = {int(val): tuple(int(w) for w in succ) for val, succ in rec.get("edges", {}).items()}
            index = rec.get("index")
            nodes[nid] = Node(nid, None if index is None else int(index), edges)
        labels = {
            int(sid): int(lbl) if _INT_LABEL.fullmatch(str(lbl)) else lbl for sid, lbl in data["sinks"].items()
        }
        return BranchingProgram(int(data["domain"]), int(data["n"]), nodes, int(data["source"]), labels)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise MalformedProgram(f"Could not parse program JSON: {exc}") from exc
