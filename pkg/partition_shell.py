# partition_shell.py
# -------------------------------------------------------------------
# Splitting a hard instance's pairs between Alice and Bob:
# - Exact half split of pairs and the per-node niceness condition
# - Shell statistics (x^s, a, delta) at a recursion node
# - Exact law of j after fixing Alice's shell, and its distance to uniform
# - Binomial ratio bound sweep (exact big integers, log-gamma above 2^14)
# -------------------------------------------------------------------

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import pandas as pd
from scipy.special import gammaln
from scipy.stats import hypergeom

from hard_instances import HardInstance, PairingError, PairingTree
from infotools import DistributionTable, statistical_distance

logger = logging.getLogger(__name__)

EXACT_LIMIT = 2**14


class PartitionError(ValueError):
    pass


# =========================
# Partition
# =========================
@dataclass(frozen=True)
class PartitionedInstance:
    instance: HardInstance
    alice_pairs: frozenset[int]
    bob_pairs: frozenset[int]
    nice: bool


@dataclass(frozen=True)
class ShellStats:
    """
    Alice's view of one node's shell. Sizes count shell pairs, not elements:
    xs_size + ys_size is the node's shell pair count, half its shell elements.
    `a` counts Alice's pairs whose low element is in the instance.
    """

    xs_size: int  # shell pairs Alice holds
    ys_size: int  # shell pairs Bob holds
    a: int
    delta: Fraction
    retained: bool  # |delta| <= sqrt(n) * log2(n0)


def _shell_ids(tree: PairingTree, node: PairingTree) -> range:
    return range(node.pair_offset, node.pair_offset + node.shell_size)


def nice_threshold(shell_pairs: int) -> int:
    return -(-shell_pairs // 3)


def _nice(tree: PairingTree, alice: frozenset[int]) -> bool:
    for node in tree.walk():
        if node.is_leaf:
            continue
        ids = _shell_ids(tree, node)
        held = sum(1 for p in ids if p in alice)
        need = nice_threshold(node.shell_size)
        if held < need or node.shell_size - held < need:
            return False
    return True


def random_pair_partition(instance: HardInstance, rng: np.random.Generator) -> PartitionedInstance:
    """Uniformly random split giving each player exactly half of the pairs."""
    total = len(instance.pairing.pair_table)
    if total % 2:
        raise PartitionError(f"Cannot split {total} pairs equally")
    order = rng.permutation(total)
    alice = frozenset(int(p) for p in order[: total // 2])
    bob = frozenset(int(p) for p in order[total // 2 :])
    return PartitionedInstance(instance, alice, bob, _nice(instance.pairing, alice))


def partition_with(instance: HardInstance, alice_pairs) -> PartitionedInstance:
    """Partition giving Alice exactly `alice_pairs`."""
    total = len(instance.pairing.pair_table)
    alice = frozenset(alice_pairs)
    if len(alice) != total // 2 or total % 2 or not alice <= set(range(total)):
        raise PartitionError(f"Alice must hold exactly {total // 2} of the pair ids 0..{total - 1}")
    bob = frozenset(range(total)) - alice
    return PartitionedInstance(instance, alice, bob, _nice(instance.pairing, alice))


def check_nice(partitioned: PartitionedInstance) -> bool:
    return _nice(partitioned.instance.pairing, partitioned.alice_pairs)


def shell_stats(partitioned: PartitionedInstance, path: Sequence[int] = ()) -> ShellStats:
    """Alice's shell elements at a recursion node: how many, and how many fall below the core."""
    tree = partitioned.instance.pairing
    node = tree.node(path)
    if node.is_leaf:
        raise PairingError(f"Node {tuple(path)} is a leaf and has no shell")
    members = set(partitioned.instance.values)
    xs = [p for p in _shell_ids(tree, node) if p in partitioned.alice_pairs]
    a = sum(1 for p in xs if tree.pair_table[p][2][0] in members)
    delta = Fraction(a) - Fraction(len(xs), 2)
    n0 = tree.n
    return ShellStats(
        xs_size=len(xs),
        ys_size=node.shell_size - len(xs),
        a=a,
        delta=delta,
        retained=float(abs(delta)) <= math.sqrt(node.n) * math.log2(max(n0, 2)),
    )


# =========================
# Exact hypergeometric laws
# =========================
def niceness_failure_probability(total_pairs: int, shell_pairs: int) -> Fraction:
    """Exact Pr[one player gets fewer than ceil(s/3) of s shell pairs] under an exact half split."""
    if total_pairs % 2 or not 0 <= shell_pairs <= total_pairs:
        raise PartitionError(f"Bad sizes: total={total_pairs}, shell={shell_pairs}")
    half = total_pairs // 2
    need = nice_threshold(shell_pairs)
    denom = math.comb(total_pairs, half)
    bad = sum(
        math.comb(shell_pairs, x) * math.comb(total_pairs - shell_pairs, half - x)
        for x in range(shell_pairs + 1)
        if x < need or shell_pairs - x < need
    )
    return Fraction(bad, denom)


def niceness_failure_probability_scipy(total_pairs: int, shell_pairs: int) -> float:
    half = total_pairs // 2
    need = nice_threshold(shell_pairs)
    dist = hypergeom(total_pairs, shell_pairs, half)
    xs = np.arange(shell_pairs + 1)
    bad = (xs < need) | (shell_pairs - xs < need)
    return float(dist.pmf(xs[bad]).sum())


def niceness_failure_rate(total_pairs: int, shell_pairs: int, rng: np.random.Generator, trials: int) -> float:
    """Monte Carlo estimate from explicit random half splits."""
    half = total_pairs // 2
    need = nice_threshold(shell_pairs)
    held = np.empty(trials, dtype=np.int64)
    for start in range(0, trials, 4096):
        size = min(4096, trials - start)
        order = np.argsort(rng.random((size, total_pairs)), axis=1)[:, :half]
        held[start : start + size] = np.count_nonzero(order < shell_pairs, axis=1)
    fails = (held < need) | (shell_pairs - held < need)
    return float(np.mean(fails))


def low_count_distribution(xs_size: int, ys_size: int, low_total: int) -> DistributionTable:
    """Exact law of a: low shell elements among Alice's xs_size shell pairs."""
    total = xs_size + ys_size
    if not 0 <= low_total <= total:
        raise PartitionError(f"low_total={low_total} outside 0..{total}")
    denom = math.comb(total, xs_size)
    weights = {
        a: Fraction(math.comb(low_total, a) * math.comb(total - low_total, xs_size - a), denom)
        for a in range(min(xs_size, low_total) + 1)
    }
    return DistributionTable({a: p for a, p in weights.items() if p})


def j_distribution(ys_size: int, a: int, gamma: int, k: int, n: int) -> DistributionTable:
    """Pr[j = j0] proportional to C(|y^s|, n/2 - a - (gamma/k)(j0 - 1/2)), exactly."""
    if k < 1:
        raise PartitionError(f"k must be >= 1, got {k}")
    weights = {}
    for j in range(1, k + 1):
        arg = Fraction(n, 2) - a - Fraction(gamma, k) * (Fraction(2 * j - 1, 2))
        if arg.denominator != 1 or not 0 <= arg <= ys_size:
            weights[j] = 0
        else:
            weights[j] = math.comb(ys_size, int(arg))
    total = sum(weights.values())
    if total == 0:
        raise PartitionError(f"No value of j is consistent with a={a}, |y^s|={ys_size}")
    return DistributionTable({j: Fraction(w, total) for j, w in weights.items()})


def uniformity_distance(dist: DistributionTable) -> Fraction | float:
    return statistical_distance(dist, DistributionTable.uniform(dist.outcomes))


# =========================
# Binomial ratio bound
# =========================
@dataclass(frozen=True)
class RatioCheck:
    n: int
    delta: int
    gamma: int
    log2_ratio: float
    log2_bound: float
    holds: bool
    exact: bool

    @property
    def ratio(self) -> float:
        return _pow2(self.log2_ratio)

    @property
    def bound(self) -> float:
        return _pow2(self.log2_bound)

    @property
    def guaranteed(self) -> bool:
        return ratio_bound_guaranteed(self.n, self.delta, self.gamma)

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "gamma": self.gamma,
            "ratio": self.ratio,
            "bound": self.bound,
            "holds": self.holds,
            "guaranteed": self.guaranteed,
            "log2_ratio": self.log2_ratio,
            "log2_bound": self.log2_bound,
        }


def _pow2(x: float) -> float:
    return math.inf if x > 1023 else 2.0**x


def ratio_bound_guaranteed(n: int, delta: int, gamma: int) -> bool:
    """
    Sufficient condition for the constant-10 bound: 30*delta + 20*gamma <= n/4 + 10.

    Each factor of the ratio is 1 + (2delta+2i+1)/(n/8-delta-i); summing
    log(1+y) <= y against gamma*log(1+x) >= gamma*x/(1+x) gives this range.
    """
    return 30 * delta + 20 * gamma <= Fraction(n, 4) + 10


def binomial_ratio_bound(n: int, delta: int, gamma: int) -> RatioCheck:
    """C(n/4, n/8-delta) / C(n/4, n/8-delta-gamma) against (1 + 10(2delta+gamma)/n)^gamma."""
    delta = abs(delta)
    if n < 8 or n % 8:
        raise PartitionError(f"n must be a positive multiple of 8, got {n}")
    if gamma < 0 or n // 8 - delta - gamma < 0:
        raise PartitionError(f"Need gamma >= 0 and n/8 - delta - gamma >= 0 (n={n}, delta={delta}, gamma={gamma})")
    quarter, eighth = n // 4, n // 8
    if n <= EXACT_LIMIT:
        top = math.comb(quarter, eighth - delta)
        bottom = math.comb(quarter, eighth - delta - gamma)
        grown = n + 20 * delta + 10 * gamma
        holds = top * n**gamma <= bottom * grown**gamma
        log2_ratio = math.log2(top) - math.log2(bottom)
        log2_bound = gamma * (math.log2(grown) - math.log2(n))
        return RatioCheck(n, delta, gamma, log2_ratio, log2_bound, holds, True)

    def log_comb(a, b):
        return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)

    ln_ratio = log_comb(quarter, eighth - delta) - log_comb(quarter, eighth - delta - gamma)
    ln_bound = gamma * math.log1p(10 * (2 * delta + gamma) / n)
    return RatioCheck(
        n, delta, gamma, float(ln_ratio / math.log(2)), ln_bound / math.log(2), bool(ln_ratio <= ln_bound), False
    )


def j_ratio_check(ys_size: int, a: int, gamma: int, k: int, n: int) -> tuple[Fraction, RatioCheck] | None:
    """
    Max/min ratio of the j-distribution, matched to binomial_ratio_bound.

    When every binomial argument sits at or below |y^s|/2, the ratio equals
    C(N/4, N/8-D)/C(N/4, N/8-D-G) with N = 4|y^s|, D the distance of the
    largest argument from the middle and G the spread of the arguments.
    Returns None outside that regime.
    """
    if ys_size < 2 or ys_size % 2 or k < 2:
        return None
    args = [Fraction(n, 2) - a - Fraction(gamma, k) * Fraction(2 * j - 1, 2) for j in range(1, k + 1)]
    if any(x.denominator != 1 or x < 0 for x in args) or args[0] > ys_size // 2:
        return None
    hi, lo = int(args[0]), int(args[-1])
    ratio = Fraction(math.comb(ys_size, hi), math.comb(ys_size, lo))
    return ratio, binomial_ratio_bound(4 * ys_size, ys_size // 2 - hi, hi - lo)


def ratio_sweep(ns: Sequence[int], max_delta=None, max_gamma=None) -> pd.DataFrame:
    """Grid of binomial_ratio_bound over 0 <= delta <= sqrt(n), 0 <= gamma <= n/16."""
    rows = []
    for n in ns:
        d_hi = math.isqrt(n) if max_delta is None else max_delta(n)
        g_hi = n // 16 if max_gamma is None else max_gamma(n)
        for delta in range(d_hi + 1):
            for gamma in range(g_hi + 1):
                if n // 8 - delta - gamma < 0:
                    continue
                rows.append(binomial_ratio_bound(n, delta, gamma).as_row())
    frame = pd.DataFrame(
        rows, columns=["n", "delta", "gamma", "ratio", "bound", "holds", "guaranteed", "log2_ratio", "log2_bound"]
    )
    logger.info("Ratio sweep: %d grid points, %d hold", len(frame), int(frame["holds"].sum()) if len(frame) else 0)
    return frame


def uniformity_trend(ns: Sequence[int], k: int = 2) -> pd.DataFrame:
    """
    Distance of the j-distribution from uniform as n grows.

    gamma is fixed at 2k, Alice holds half the shell, and a sits sqrt(n)
    above its mean.
    """
    gamma = 2 * k
    rows = []
    for n in ns:
        shell = n - gamma
        xs = shell // 2
        ys = shell - xs
        delta = math.isqrt(n)
        a = xs // 2 + delta
        dist = j_distribution(ys, a, gamma, k, n)
        rows.append(
            {"n": n, "gamma": gamma, "k": k, "delta": delta, "a": a, "ys_size": ys,
             "distance": float(uniformity_distance(dist))}
        )
    return pd.DataFrame(rows)
