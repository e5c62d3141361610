# hard_instances.py
# -------------------------------------------------------------------
# Recursive core/shell hard instances for MedianBit:
# - Pairing trees (mirrored shell pairs around k embedded sub-instances)
# - Toy (explicit gamma/k schedule) and full-scale parameter modes
# - Sampling, median locality, base-case bit uniformity
# - Recursion depth vs. the closed-form depth condition
# -------------------------------------------------------------------

from __future__ import annotations

import itertools
import json
import logging
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from median_programs import median_oracle, median_rank

logger = logging.getLogger(__name__)

MAX_TREE_NODES = 10**6


class PairingError(ValueError):
    """Invalid pairing parameters or an operation applied to the wrong kind of node."""


# =========================
# Parameters
# =========================
@dataclass(frozen=True)
class ModeParams:
    mode: str = "toy"
    schedule: tuple[tuple[int, int], ...] = ()  # toy: (gamma, k) per level, root first
    m: float | None = None
    n0: int | None = None

    def __post_init__(self):
        if self.mode not in ("toy", "full"):
            raise PairingError(f"mode must be 'toy' or 'full', got {self.mode!r}")
        if self.mode == "full" and (self.m is None or self.n0 is None or self.m <= 0 or self.n0 < 4):
            raise PairingError("full mode needs m > 0 and n0 >= 4")

    @property
    def log_n0(self) -> float:
        return math.log2(self.n0)

    @property
    def full_k(self) -> int:
        return math.floor(self.m * self.log_n0**2)

    def to_dict(self) -> dict:
        if self.mode == "toy":
            return {"mode": "toy", "schedule": [list(level) for level in self.schedule]}
        return {"mode": "full", "m": self.m, "n0": self.n0}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModeParams":
        if data.get("mode") == "full":
            return cls("full", m=data["m"], n0=int(data["n0"]))
        return cls("toy", schedule=tuple((int(g), int(k)) for g, k in data.get("schedule", [])))


def check_level(n: int, gamma: int, k: int) -> None:
    """Divisibility and range conditions for one recursion level."""
    if n % 2:
        raise PairingError(f"A recursive node needs an even pair count, got n={n}")
    if k < 1:
        raise PairingError(f"k must be >= 1, got {k}")
    if gamma < 1 or gamma % (2 * k):
        raise PairingError(f"2k={2 * k} must divide gamma={gamma} (and gamma > 0)")
    if gamma > n - 1:
        raise PairingError(f"gamma={gamma} must be at most n-1={n - 1}")
    if gamma * (2 * k - 1) > n * k:
        raise PairingError(
            f"gamma={gamma}, k={k} leave no room for the shell choice at n={n}: "
            "need gamma*(2k-1)/(2k) <= n/2"
        )


def toy_schedule(n: int, levels: int, k: int, gammas: Sequence[int] | None = None) -> ModeParams:
    """
    Toy schedule with `levels` recursive levels of branching k.

    Missing gammas default to the largest multiple of 2k not above n/2.
    """
    gammas = list(gammas or [])
    schedule = []
    size = n
    for level in range(levels):
        gamma = gammas[level] if level < len(gammas) else (size // 2) // (2 * k) * (2 * k)
        check_level(size, gamma, k)
        schedule.append((gamma, k))
        size = gamma // k
    return ModeParams("toy", schedule=tuple(schedule))


# =========================
# Pairing tree
# =========================
@dataclass(frozen=True)
class PairingTree:
    path: tuple[int, ...]
    n: int
    value_lo: int
    value_hi: int
    gamma: int = 0
    k: int = 0
    children: tuple["PairingTree", ...] = ()
    pair_offset: int = 0

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def shell_size(self) -> int:
        return 0 if self.is_leaf else self.n - self.gamma

    @property
    def shell_pairs(self) -> list[tuple[int, int]]:
        return [(self.value_lo + p, self.value_hi - p) for p in range(self.shell_size)]

    @property
    def leaf_pairs(self) -> list[tuple[int, int]]:
        if not self.is_leaf:
            return []
        return [(self.value_lo + 2 * i, self.value_lo + 2 * i + 1) for i in range(self.n)]

    @property
    def core(self) -> tuple[int, int]:
        mid = self.value_lo + self.n - 1
        return mid - self.gamma + 1, mid + self.gamma

    def low_count(self, j: int) -> int:
        """Shell pairs contributing their low element when sub-instance j is active."""
        return self.n // 2 - (self.gamma // (2 * self.k)) * (2 * j - 1)

    def walk(self) -> Iterator["PairingTree"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def node(self, path: Sequence[int]) -> "PairingTree":
        node = self
        for j in path:
            if node.is_leaf or not 1 <= j <= node.k:
                raise PairingError(f"No child {j} below node {node.path}")
            node = node.children[j - 1]
        return node

    def own_pairs(self) -> list[tuple[int, int]]:
        return self.leaf_pairs if self.is_leaf else self.shell_pairs

    @cached_property
    def pair_table(self) -> list[tuple[tuple[int, ...], int, tuple[int, int]]]:
        """(node path, local pair index, pair) for every pair; position = global pair id."""
        return [(node.path, p, pair) for node in self.walk() for p, pair in enumerate(node.own_pairs())]

    def depth(self) -> int:
        node, d = self, 0
        while not node.is_leaf:
            node, d = node.children[0], d + 1
        return d


def full_schedule(params: ModeParams, n: int) -> tuple[tuple[int, int], ...]:
    return tuple((lvl.gamma, lvl.k) for lvl in full_levels(params, n) if not lvl.leaf)


def build_pairing(params: ModeParams, n: int, value_lo: int = 1) -> PairingTree:
    """Build the pairing tree for n pairs over values value_lo .. value_lo + 2n - 1."""
    if n < 1:
        raise PairingError(f"n must be positive, got {n}")
    if params.mode == "full":
        if n > params.n0:
            raise PairingError(f"n={n} exceeds n0={params.n0}")
        schedule = full_schedule(params, n)
    else:
        schedule = params.schedule
    total = 1
    width = 1
    for _, k in schedule:
        width *= k
        total += width
    if total > MAX_TREE_NODES:
        raise PairingError(f"Pairing tree would have {total} nodes (limit {MAX_TREE_NODES})")

    next_id = [0]

    def take(count):
        first = next_id[0]
        next_id[0] += count
        return first

    def build(path, size, lo, levels):
        if not levels:
            offset = take(size)
            return PairingTree(path, size, lo, lo + 2 * size - 1, pair_offset=offset)
        gamma, k = levels[0]
        check_level(size, gamma, k)
        offset = take(size - gamma)
        child_n = gamma // k
        core_lo = lo + size - gamma
        children = tuple(
            build(path + (c,), child_n, core_lo + (c - 1) * 2 * child_n, levels[1:]) for c in range(1, k + 1)
        )
        return PairingTree(path, size, lo, lo + 2 * size - 1, gamma, k, children, offset)

    tree = build((), n, value_lo, list(schedule))
    logger.debug("Built pairing tree: n=%d depth=%d", n, tree.depth())
    return tree


# =========================
# Instances
# =========================
@dataclass(frozen=True)
class NodeChoice:
    j: int | None
    low: frozenset[int]  # local pair indices contributing their low element


@dataclass(frozen=True)
class HardInstance:
    pairing: PairingTree
    params: ModeParams
    choices: Mapping[tuple[int, ...], NodeChoice]
    values: tuple[int, ...] = field(default=())

    @property
    def A(self) -> tuple[int, ...]:
        return self.values

    @property
    def n(self) -> int:
        return self.pairing.n

    @property
    def j_path(self) -> tuple[int, ...]:
        node, path = self.pairing, []
        while not node.is_leaf:
            j = self.choices[node.path].j
            path.append(j)
            node = node.children[j - 1]
        return tuple(path)

    def active_path(self) -> list[PairingTree]:
        nodes = [self.pairing]
        for j in self.j_path:
            nodes.append(nodes[-1].children[j - 1])
        return nodes

    @property
    def active_leaf(self) -> PairingTree:
        return self.active_path()[-1]

    def to_dict(self) -> dict:
        return {"n": self.n, "params": self.params.to_dict(), "j_path": list(self.j_path), "A": list(self.values)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def assemble(pairing: PairingTree, choices: Mapping[tuple[int, ...], NodeChoice]) -> tuple[int, ...]:
    values = []
    for node in pairing.walk():
        low = choices[node.path].low
        values.extend(lo if p in low else hi for p, (lo, hi) in enumerate(node.own_pairs()))
    return tuple(sorted(values))


def sample_instance(pairing: PairingTree, rng: np.random.Generator, params: ModeParams | None = None) -> HardInstance:
    """Pick j and the shell's low elements at every node; leaves pick each pair's element uniformly."""
    choices = {}
    for node in pairing.walk():
        if node.is_leaf:
            bits = rng.random(node.n) < 0.5
            choices[node.path] = NodeChoice(None, frozenset(np.flatnonzero(bits).tolist()))
            continue
        j = int(rng.integers(1, node.k + 1))
        count = node.low_count(j)
        assert 0 <= count <= node.shell_size, f"low-shell count {count} outside 0..{node.shell_size}"
        low = rng.choice(node.shell_size, size=count, replace=False)
        choices[node.path] = NodeChoice(j, frozenset(int(p) for p in low))
    return HardInstance(pairing, params or ModeParams("toy"), choices, assemble(pairing, choices))


def check_instance(instance: HardInstance) -> None:
    """Raise PairingError unless A holds one element per pair and the shell counts match j."""
    members = set(instance.values)
    if len(members) != instance.n:
        raise PairingError(f"|A|={len(members)} but n={instance.n}")
    for _, _, (lo, hi) in instance.pairing.pair_table:
        if (lo in members) == (hi in members):
            raise PairingError(f"Pair ({lo}, {hi}) does not contribute exactly one element")
    for node in instance.pairing.walk():
        if not node.is_leaf:
            choice = instance.choices[node.path]
            if len(choice.low) != node.low_count(choice.j):
                raise PairingError(f"Node {node.path}: {len(choice.low)} low shell elements for j={choice.j}")


def _local_median(values: Sequence[int], node: PairingTree) -> int:
    local = sorted(v for v in values if node.value_lo <= v <= node.value_hi)
    return local[median_rank(len(local)) - 1]


def median_locality_check(instance: HardInstance) -> bool:
    """True iff the median at every node of the active path is the active child's median."""
    nodes = instance.active_path()
    if median_oracle(instance.values) != _local_median(instance.values, nodes[0]):
        return False
    return all(
        _local_median(instance.values, parent) == _local_median(instance.values, child)
        for parent, child in zip(nodes, nodes[1:])
    )


def value_shift(instance: HardInstance) -> int:
    """Offset between the active leaf's local values (1-based) and absolute values."""
    return instance.active_leaf.value_lo - 1


def leaf_local_median(instance: HardInstance) -> int:
    return _local_median(instance.values, instance.active_leaf) - value_shift(instance)


def flip_shell_choice(instance: HardInstance, path: Sequence[int] = (), pair: int = 0) -> HardInstance:
    """Copy of instance with one shell pair's element swapped."""
    node = instance.pairing.node(path)
    if node.is_leaf or not 0 <= pair < node.shell_size:
        raise PairingError(f"Node {tuple(path)} has no shell pair {pair}")
    choices = dict(instance.choices)
    old = choices[node.path]
    choices[node.path] = NodeChoice(old.j, old.low ^ {pair})
    return replace(instance, choices=choices, values=assemble(instance.pairing, choices))


# =========================
# Base case
# =========================
def basecase_bit_distribution(leaf: PairingTree, rng: np.random.Generator, trials: int) -> float:
    """Monte Carlo frequency of MedianBit = 1 over independent samples of a leaf."""
    if not leaf.is_leaf:
        raise PairingError(f"Node {leaf.path} is not a leaf")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    base = leaf.value_lo + 2 * np.arange(leaf.n)
    r = median_rank(leaf.n)
    ones = 0
    for start in range(0, trials, 100_000):
        size = min(100_000, trials - start)
        values = base + rng.integers(0, 2, size=(size, leaf.n))
        medians = np.sort(values, axis=1)[:, r - 1]
        ones += int(np.count_nonzero(medians & 1))
    return ones / trials


def exact_basecase_bit_distribution(leaf: PairingTree) -> Fraction:
    """Exact Pr[MedianBit = 1] for a leaf, by enumeration of its 2^n samples."""
    if not leaf.is_leaf:
        raise PairingError(f"Node {leaf.path} is not a leaf")
    if leaf.n > 16:
        # only the median pair matters: its two elements have opposite parity
        return Fraction(1, 2)
    r = median_rank(leaf.n)
    pairs = leaf.leaf_pairs
    ones = sum(sorted(choice)[r - 1] & 1 for choice in itertools.product(*pairs))
    return Fraction(ones, 2**leaf.n)


# =========================
# Paper-scale recursion
# =========================
@dataclass(frozen=True)
class LevelInfo:
    n: int
    gamma: int
    k: int
    gamma_raw: int
    leaf: bool
    alternate_continues: bool
    log2_size: float
    log2_formula_bound: float


@dataclass(frozen=True)
class RecursionReport:
    depth: int
    levels: tuple[LevelInfo, ...]
    formula_depth: int
    formula_holds: bool
    leaf_pairs: int
    leaf_values: int

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "formula_depth": self.formula_depth,
            "formula_holds": self.formula_holds,
            "leaf_pairs": self.leaf_pairs,
            "leaf_values": self.leaf_values,
            "levels": [lvl.__dict__ for lvl in self.levels],
        }


def _log2_formula_bound(params: ModeParams, level: int) -> float:
    L = params.log_n0
    return L / 2**level - (2 - 2 ** (1 - level)) * math.log2(params.m * L**4)


def full_levels(params: ModeParams, n: int | None = None) -> list[LevelInfo]:
    """Walk one root-to-leaf path of the full-scale recursion without building the tree."""
    if params.mode != "full":
        raise PairingError("full_levels needs full-mode parameters")
    L = params.log_n0
    k = params.full_k
    if k < 1:
        raise PairingError(f"k = floor(m log^2 n0) = {k} is below 1")
    size = params.n0 if n is None else n
    levels = []
    while True:
        root = math.isqrt(size)
        gamma_raw = math.floor(root / L**2)
        alternate = gamma_raw >= k * L
        bound = _log2_formula_bound(params, len(levels))
        if root < k * L**3:
            levels.append(LevelInfo(size, 0, k, gamma_raw, True, alternate, math.log2(size), bound))
            return levels
        gamma = gamma_raw - gamma_raw % (2 * k)
        if gamma < k:
            raise PairingError(f"gamma={gamma_raw} cannot form {k} sub-instances at n={size}")
        if size % 2:
            raise PairingError(f"Recursive node with odd pair count n={size}")
        levels.append(LevelInfo(size, gamma, k, gamma_raw, False, alternate, math.log2(size), bound))
        size = gamma // k


def depth_condition(params: ModeParams, t: int) -> bool:
    """n0 >= m^(2^(t+1)-2) * log^(9*2^t-2) n0, compared in log2 space."""
    L = params.log_n0
    return L >= (2 ** (t + 1) - 2) * math.log2(params.m) + (9 * 2**t - 2) * math.log2(L)


def recursion_depth(params: ModeParams) -> RecursionReport:
    levels = full_levels(params)
    depth = len(levels) - 1
    formula_depth = 0
    while depth_condition(params, formula_depth + 1):
        formula_depth += 1
    leaf = levels[-1]
    return RecursionReport(
        depth=depth,
        levels=tuple(levels),
        formula_depth=formula_depth,
        formula_holds=depth_condition(params, depth),
        leaf_pairs=leaf.n,
        leaf_values=2 * leaf.n,
    )


def formula_threshold_log_n0(t: int, m_of_log=None, limit: int = 10**6) -> int:
    """Smallest integer log2 n0 meeting the depth-t condition; m defaults to log2 n0."""
    m_of_log = m_of_log or (lambda L: L)
    for L in range(2, limit):
        if L >= (2 ** (t + 1) - 2) * math.log2(m_of_log(L)) + (9 * 2**t - 2) * math.log2(L):
            return L
    raise PairingError(f"No log n0 below {limit} satisfies the depth-{t} condition")
