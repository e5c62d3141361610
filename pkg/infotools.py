# infotools.py
# -------------------------------------------------------------------
# Exact finite information theory and first-message elimination:
# - DistributionTable (Fraction or float probabilities, named coordinates)
# - Statistical distance, entropy, conditional mutual information
# - Pinsker check, correlated sampling over a shared stream
# - Toy two-party protocols, k-fold indexed problems, the information
#   chain for a first message, and public-coin fixing
# -------------------------------------------------------------------

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from config import ENUMERATION_CAP

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9


class DistributionError(ValueError):
    pass


class EnumerationCapExceeded(RuntimeError):
    pass


def _check_cap(states: int, cap: int, what: str) -> None:
    if states > cap:
        raise EnumerationCapExceeded(f"{what} needs {states} states, above the enumeration cap of {cap}")


# =========================
# Distribution tables
# =========================
@dataclass(frozen=True)
class DistributionTable:
    """
    Finite distribution. Outcomes of a joint table are tuples whose
    positions are named by `names`.
    """

    probs: Mapping[Hashable, Fraction | float]
    names: tuple[str, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if not self.probs:
            raise DistributionError("A distribution needs at least one outcome")
        values = list(self.probs.values())
        if any(p < 0 for p in values):
            raise DistributionError("Probabilities must be nonnegative")
        if self.exact:
            if sum(values) != 1:
                raise DistributionError(f"Exact probabilities sum to {sum(values)}, not 1")
        elif abs(math.fsum(float(p) for p in values) - 1.0) > TOLERANCE:
            raise DistributionError(f"Probabilities sum to {math.fsum(map(float, values))}, not 1")

    @property
    def exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.probs.values())

    @property
    def outcomes(self) -> tuple:
        return tuple(self.probs)

    def prob(self, outcome) -> Fraction | float:
        return self.probs.get(outcome, 0)

    def items(self):
        return self.probs.items()

    def support(self) -> tuple:
        return tuple(u for u, p in self.probs.items() if p > 0)

    # ---- constructors ----
    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable], names: tuple[str, ...] = ()) -> "DistributionTable":
        outcomes = list(outcomes)
        return cls({u: Fraction(1, len(outcomes)) for u in outcomes}, names)

    @classmethod
    def point_mass(cls, outcome: Hashable, outcomes: Iterable[Hashable] = ()) -> "DistributionTable":
        probs = {u: Fraction(0) for u in outcomes}
        probs[outcome] = Fraction(1)
        return cls(probs)

    @classmethod
    def from_weights(cls, weights: Mapping[Hashable, float | int], names: tuple[str, ...] = ()) -> "DistributionTable":
        total = sum(weights.values())
        if total <= 0:
            raise DistributionError("Weights must have a positive total")
        if all(isinstance(w, (int, Fraction)) for w in weights.values()):
            return cls({u: Fraction(w) / total for u, w in weights.items()}, names)
        total = math.fsum(weights.values())
        return cls({u: float(w) / total for u, w in weights.items()}, names)

    @classmethod
    def product(cls, *tables: "DistributionTable") -> "DistributionTable":
        names = []
        for i, t in enumerate(tables):
            names.extend(t.names or (f"c{i}",))
        probs = {}
        for combo in itertools.product(*(t.items() for t in tables)):
            outcome = []
            p = 1
            for t, (u, q) in zip(tables, combo):
                outcome.extend(u if t.names else (u,))
                p = p * q
            probs[tuple(outcome)] = p
        return cls(probs, tuple(names))

    # ---- coordinate operations ----
    def _positions(self, names: Sequence[str]) -> list[int]:
        try:
            return [self.names.index(name) for name in names]
        except ValueError:
            raise DistributionError(f"Unknown coordinate in {list(names)}; table has {list(self.names)}") from None

    def marginal(self, names: Sequence[str] | str) -> "DistributionTable":
        names = _as_names(names)
        pos = self._positions(names)
        probs: dict = {}
        for u, p in self.probs.items():
            key = tuple(u[i] for i in pos)
            probs[key] = probs.get(key, 0) + p
        return DistributionTable(probs, tuple(names))

    def condition(self, names: Sequence[str] | str, value) -> "DistributionTable":
        names = _as_names(names)
        pos = self._positions(names)
        value = (value,) if len(names) == 1 else tuple(value)
        kept = {u: p for u, p in self.probs.items() if tuple(u[i] for i in pos) == value}
        total = sum(kept.values())
        if total == 0:
            raise DistributionError(f"Conditioning event {dict(zip(names, value))} has probability 0")
        return DistributionTable({u: p / total for u, p in kept.items()}, self.names)

    def map(self, fn: Callable[[Hashable], Hashable], names: tuple[str, ...] = ()) -> "DistributionTable":
        probs: dict = {}
        for u, p in self.probs.items():
            key = fn(u)
            probs[key] = probs.get(key, 0) + p
        return DistributionTable(probs, names)


def _as_names(names: Sequence[str] | str) -> tuple[str, ...]:
    return (names,) if isinstance(names, str) else tuple(names)


def random_distribution(outcomes: Sequence[Hashable], rng: np.random.Generator, names: tuple[str, ...] = ()) -> DistributionTable:
    weights = rng.dirichlet(np.ones(len(outcomes)))
    return DistributionTable.from_weights(dict(zip(outcomes, weights.tolist())), names)


# =========================
# Distances and entropies
# =========================
def statistical_distance(P: DistributionTable, Q: DistributionTable) -> Fraction | float:
    """Half the L1 distance; both tables must list the same outcomes."""
    if set(P.outcomes) != set(Q.outcomes):
        raise DistributionError("statistical_distance needs tables over the same outcomes")
    return _half_l1(P.probs, Q.probs, P.exact and Q.exact)


def _half_l1(p: Mapping, q: Mapping, exact: bool) -> Fraction | float:
    keys = set(p) | set(q)
    if exact:
        return sum((abs(p.get(u, 0) - q.get(u, 0)) for u in keys), Fraction(0)) / 2
    return math.fsum(abs(float(p.get(u, 0)) - float(q.get(u, 0))) for u in keys) / 2


def max_event_gap(P: DistributionTable, Q: DistributionTable) -> Fraction | float:
    """max over events A of |P(A) - Q(A)|, by subset enumeration."""
    outcomes = list(P.outcomes)
    _check_cap(2 ** len(outcomes), 2**16, "max_event_gap")
    best = 0
    for r in range(len(outcomes) + 1):
        for event in itertools.combinations(outcomes, r):
            gap = abs(sum((P.prob(u) for u in event), 0) - sum((Q.prob(u) for u in event), 0))
            best = max(best, gap)
    return best


def entropy(P: DistributionTable) -> float:
    return -math.fsum(float(p) * math.log2(float(p)) for p in P.probs.values() if p > 0)


def joint_entropy(joint: DistributionTable, names: Sequence[str] | str) -> float:
    key = tuple(sorted(set(_as_names(names))))
    if not key:
        return 0.0
    if key not in joint._cache:
        joint._cache[key] = entropy(joint.marginal(key))
    return joint._cache[key]


def conditional_entropy(joint: DistributionTable, target: Sequence[str] | str, given: Sequence[str] | str = ()) -> float:
    target, given = _as_names(target), _as_names(given)
    return joint_entropy(joint, target + given) - joint_entropy(joint, given)


def mutual_information(
    joint: DistributionTable, a: Sequence[str] | str, b: Sequence[str] | str, given: Sequence[str] | str = ()
) -> float:
    """I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C), in bits."""
    a, b, c = _as_names(a), _as_names(b), _as_names(given)
    value = (
        joint_entropy(joint, a + c) + joint_entropy(joint, b + c) - joint_entropy(joint, a + b + c) - joint_entropy(joint, c)
    )
    return max(value, 0.0) if value > -TOLERANCE else value


@dataclass(frozen=True)
class PinskerResult:
    lhs: float
    rhs: float
    holds: bool


def pinsker_matrix(matrix: np.ndarray) -> PinskerResult:
    """E_q ||P - (P|Q=q)||^2 <= (ln 2)/2 * I(P;Q) for a joint given as a matrix P x Q."""
    m = np.asarray(matrix, dtype=float)
    m = m / m.sum()
    p = m.sum(axis=1)
    q = m.sum(axis=0)
    cols = q > 0
    cond = m[:, cols] / q[cols]
    dist = 0.5 * np.abs(cond - p[:, None]).sum(axis=0)
    lhs = float(np.dot(q[cols], dist**2))
    outer = np.outer(p, q)
    nz = m > 0
    info = float(np.sum(m[nz] * np.log2(m[nz] / outer[nz])))
    rhs = math.log(2) / 2 * max(info, 0.0)
    return PinskerResult(lhs, rhs, lhs <= rhs + 1e-12)


def pinsker_check(joint: DistributionTable, p_name: str | None = None, q_name: str | None = None) -> PinskerResult:
    p_name = p_name or joint.names[0]
    q_name = q_name or joint.names[1]
    P = joint.marginal(p_name)
    Q = joint.marginal(q_name)
    rows = {u: i for i, u in enumerate(P.outcomes)}
    cols = {v: j for j, v in enumerate(Q.outcomes)}
    pi, qi = joint._positions((p_name, q_name))
    matrix = np.zeros((len(rows), len(cols)))
    for u, prob in joint.items():
        matrix[rows[(u[pi],)], cols[(u[qi],)]] += float(prob)
    return pinsker_matrix(matrix)


# =========================
# Correlated sampling
# =========================
class SharedStream:
    """Unbounded stream of (outcome index, threshold) pairs both parties read."""

    def __init__(self, size: int, seed, block: int | None = None):
        self.size = size
        self.block = block or max(4096, 4 * size)
        self._rng = np.random.default_rng(seed)
        self._blocks: list[tuple[np.ndarray, np.ndarray]] = []

    def _get(self, b: int) -> tuple[np.ndarray, np.ndarray]:
        while len(self._blocks) <= b:
            self._blocks.append((self._rng.integers(0, self.size, self.block), self._rng.random(self.block)))
        return self._blocks[b]

    def first_accept(self, probs: np.ndarray, max_blocks: int = 10_000) -> int:
        """Outcome of the first pair (u, t) with t < probs[u]."""
        for b in range(max_blocks):
            us, ts = self._get(b)
            hit = ts < probs[us]
            if hit.any():
                return int(us[np.argmax(hit)])
        raise DistributionError("No acceptance within the stream limit; is the distribution all zeros?")


def _aligned(P: DistributionTable, Q: DistributionTable) -> tuple[list, np.ndarray, np.ndarray]:
    if set(P.outcomes) != set(Q.outcomes):
        raise DistributionError("correlated sampling needs tables over the same outcomes")
    outcomes = list(P.outcomes)
    return outcomes, np.array([float(P.prob(u)) for u in outcomes]), np.array([float(Q.prob(u)) for u in outcomes])


def correlated_sample(P: DistributionTable, Q: DistributionTable, rng: np.random.Generator) -> tuple:
    """Each side takes the first shared pair it accepts under its own distribution."""
    outcomes, p, q = _aligned(P, Q)
    stream = SharedStream(len(outcomes), int(rng.integers(2**63)))
    return outcomes[stream.first_accept(p)], outcomes[stream.first_accept(q)]


def correlated_sample_batch(
    P: DistributionTable, Q: DistributionTable, rng: np.random.Generator, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    """Outcome indices (into P.outcomes) of `trials` independent correlated samples."""
    outcomes, p, q = _aligned(P, Q)
    size = len(outcomes)
    rounds = 32 * size
    per_chunk = max(1, 2_000_000 // rounds)
    out_p = np.full(trials, -1, dtype=np.int64)
    out_q = np.full(trials, -1, dtype=np.int64)
    pending = np.arange(trials)
    while pending.size:
        for start in range(0, pending.size, per_chunk):
            rows = pending[start : start + per_chunk]
            us = rng.integers(0, size, size=(rows.size, rounds))
            ts = rng.random((rows.size, rounds))
            for probs, out in ((p, out_p), (q, out_q)):
                hit = ts < probs[us]
                found = hit.any(axis=1)
                first = np.argmax(hit, axis=1)
                out[rows[found]] = us[found, first[found]]
        # rows where either side ran out of stream are redrawn from scratch
        pending = np.flatnonzero((out_p < 0) | (out_q < 0))
        out_p[pending] = -1
        out_q[pending] = -1
    return out_p, out_q


def correlated_sampling_law(P: DistributionTable, Q: DistributionTable) -> DistributionTable:
    """
    Exact joint law of the two outputs.

    With S = sum max(P, Q): Pr[(u, v)] = [u = v] min(P,Q)(u)/S
    + (P(u) - min(u)) Q(v)/S + (Q(v) - min(v)) P(u)/S.
    """
    outcomes, _, _ = _aligned(P, Q)
    lo = {u: min(P.prob(u), Q.prob(u)) for u in outcomes}
    total = sum(max(P.prob(u), Q.prob(u)) for u in outcomes)
    probs = {}
    for u in outcomes:
        for v in outcomes:
            value = (P.prob(u) - lo[u]) * Q.prob(v) + (Q.prob(v) - lo[v]) * P.prob(u)
            if u == v:
                value += lo[u]
            probs[(u, v)] = value / total
    return DistributionTable(probs, ("p", "q"))


def disagreement(law: DistributionTable) -> Fraction | float:
    return sum((p for (u, v), p in law.items() if u != v), 0)


# =========================
# Toy protocols
# =========================
@dataclass(frozen=True)
class ToyProtocol:
    """
    Deterministic two-party protocol given by explicit tables.

    Message t is sent by `first` when t is even and by the other party
    otherwise; tables[t] maps (sender's input, transcript so far) to an
    integer below 2**message_bits[t]. The party that would speak next after
    the last message reads `output`.
    """

    first: str
    message_bits: tuple[int, ...]
    alice_inputs: tuple
    bob_inputs: tuple
    tables: tuple[Mapping, ...]
    output: Mapping

    def speaker(self, t: int) -> str:
        if t % 2 == 0:
            return self.first
        return "B" if self.first == "A" else "A"

    @property
    def output_party(self) -> str:
        return self.speaker(len(self.message_bits))

    @classmethod
    def tabulate(
        cls,
        first: str,
        message_bits: Sequence[int],
        message_fns: Sequence[Callable],
        output_fn: Callable,
        alice_inputs: Iterable,
        bob_inputs: Iterable,
        cap: int = ENUMERATION_CAP,
    ) -> "ToyProtocol":
        if first not in ("A", "B"):
            raise DistributionError(f"first speaker must be 'A' or 'B', got {first!r}")
        bits = tuple(message_bits)
        inputs = {"A": tuple(alice_inputs), "B": tuple(bob_inputs)}
        proto = cls(first, bits, inputs["A"], inputs["B"], (), {})
        states = sum(len(inputs[proto.speaker(t)]) * 2 ** sum(bits[:t]) for t in range(len(bits) + 1))
        _check_cap(states, cap, "ToyProtocol.tabulate")
        tables = []
        for t, fn in enumerate(message_fns):
            table = {}
            for transcript in _transcripts(bits[:t]):
                for inp in inputs[proto.speaker(t)]:
                    value = int(fn(inp, transcript))
                    if not 0 <= value < 2 ** bits[t]:
                        raise DistributionError(f"Message {t + 1} value {value} does not fit in {bits[t]} bits")
                    table[(inp, transcript)] = value
            tables.append(table)
        output = {
            (inp, transcript): output_fn(inp, transcript)
            for transcript in _transcripts(bits)
            for inp in inputs[proto.output_party]
        }
        return cls(first, bits, inputs["A"], inputs["B"], tuple(tables), output)

    def run(self, x, y) -> tuple[tuple[int, ...], Hashable]:
        transcript: tuple[int, ...] = ()
        for t, table in enumerate(self.tables):
            own = x if self.speaker(t) == "A" else y
            transcript += (table[(own, transcript)],)
        own = x if self.output_party == "A" else y
        return transcript, self.output[(own, transcript)]


def _transcripts(bits: Sequence[int]) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(2**b) for b in bits))


def _evaluate(f, x, y):
    return f(x, y) if callable(f) else f[(x, y)]


def protocol_error(protocol: ToyProtocol, f, D: DistributionTable) -> Fraction | float:
    """Exact Pr_{(x,y)~D}[protocol output != f(x, y)]."""
    error = 0
    for (x, y), p in D.items():
        if p and protocol.run(x, y)[1] != _evaluate(f, x, y):
            error += p
    return error


def build_f_power_k(f, D: DistributionTable, k: int, cap: int = ENUMERATION_CAP):
    """
    The indexed k-fold problem: Alice holds x in X^k, Bob holds (y in Y^k, j),
    and the answer is f(x_j, y_j). D^[k] draws each (x_i, y_i) from D and j uniformly.
    """
    if k < 1:
        raise DistributionError(f"k must be >= 1, got {k}")
    support = [(u, p) for u, p in D.items() if p]
    _check_cap(len(support) ** k * k, cap, "build_f_power_k")

    def f_k(xs, bob):
        ys, j = bob
        return _evaluate(f, xs[j - 1], ys[j - 1])

    one = Fraction(1) if D.exact else 1.0
    probs = {}
    for combo in itertools.product(support, repeat=k):
        weight = one
        for _, p in combo:
            weight = weight * p
        xs = tuple(u[0] for u, _ in combo)
        ys = tuple(u[1] for u, _ in combo)
        for j in range(1, k + 1):
            probs[(xs, (ys, j))] = weight / k
    return f_k, DistributionTable(probs, ("x", "y"))


def xor_index_protocol(k: int, first_message: str = "parity") -> ToyProtocol:
    """
    Protocol for XOR^[k] on bits: Alice's first message (parity of x, x_1 or a
    constant), Bob names j, Alice answers x_j, Bob outputs x_j XOR y_j.
    """
    index_bits = max(0, math.ceil(math.log2(k))) if k > 1 else 0
    firsts = {
        "parity": (1, lambda xs, tr: sum(xs) % 2),
        "x1": (1, lambda xs, tr: xs[0]),
        "constant": (0, lambda xs, tr: 0),
    }
    if first_message not in firsts:
        raise DistributionError(f"Unknown first message {first_message!r}")
    m1, first_fn = firsts[first_message]
    xs_all = list(itertools.product((0, 1), repeat=k))
    bob_all = [(ys, j) for ys in xs_all for j in range(1, k + 1)]

    def pick(xs, tr):
        j = tr[1] + 1
        return xs[j - 1] if j <= k else xs[0]

    return ToyProtocol.tabulate(
        "A",
        (m1, index_bits, 1),
        (first_fn, lambda bob, tr: bob[1] - 1, pick),
        lambda bob, tr: tr[2] ^ bob[0][bob[1] - 1],
        xs_all,
        bob_all,
    )


def xor(x, y):
    return x ^ y


def random_first_message_protocol(k: int, m1: int, rng: np.random.Generator, xs=(0, 1), ys=(0, 1)) -> ToyProtocol:
    """Alice's first message is a random function of her k inputs; nothing else is said."""
    alice = list(itertools.product(xs, repeat=k))
    bob = [(yv, j) for yv in itertools.product(ys, repeat=k) for j in range(1, k + 1)]
    table = {x: int(v) for x, v in zip(alice, rng.integers(0, 2**m1, size=len(alice)))}
    return ToyProtocol.tabulate("A", (m1,), (lambda x, tr: table[x],), lambda inp, tr: 0, alice, bob)


# =========================
# Information chain
# =========================
@dataclass(frozen=True)
class ChainReport:
    m1: int
    entropy: float
    steps: tuple[float, ...]
    per_i: tuple[dict, ...]
    holds: bool
    max_violation: float

    STEP_NAMES = (
        "m1",
        "H(M)",
        "I(M;XY|W)",
        "sum I(M;XiYi|W)",
        "sum (I(M;XiYi|Xi W-i) + I(M;XiYi|Yi W-i))/2",
        "sum (I(M;Yi|Xi W-i) + I(M;Xi|Yi W-i))/2",
        "sum (I(MW-i;Yi|Xi) - I(W-i;Yi|Xi) + I(MW-i;Xi|Yi) - I(W-i;Xi|Yi))/2",
        "sum (I(MW-i;Yi|Xi) + I(MW-i;Xi|Yi))/2",
    )

    @property
    def sigma(self) -> float:
        return self.steps[-1]


def first_message_joint(protocol: ToyProtocol, D: DistributionTable, k: int, cap: int = ENUMERATION_CAP) -> DistributionTable:
    """Joint of X_1..X_k, Y_1..Y_k, W_1..W_k and Alice's first message M."""
    if protocol.first != "A" or not protocol.tables:
        raise DistributionError("The chain needs a protocol whose first message is Alice's")
    support = [(u, p) for u, p in D.items() if p]
    _check_cap(len(support) ** k * 2**k, cap, "information_chain_check")
    first = protocol.tables[0]
    names = tuple(f"X{i}" for i in range(1, k + 1)) + tuple(f"Y{i}" for i in range(1, k + 1))
    names += tuple(f"W{i}" for i in range(1, k + 1)) + ("M",)
    probs = {}
    half_k = Fraction(1, 2**k) if D.exact else 0.5**k
    for combo in itertools.product(support, repeat=k):
        weight = Fraction(1) if D.exact else 1.0
        for _, p in combo:
            weight = weight * p
        xs = tuple(u[0] for u, _ in combo)
        ys = tuple(u[1] for u, _ in combo)
        m = first[(xs, ())]
        for coins in itertools.product((0, 1), repeat=k):
            ws = tuple(("X", xs[i]) if c == 0 else ("Y", ys[i]) for i, c in enumerate(coins))
            key = xs + ys + ws + (m,)
            probs[key] = probs.get(key, 0) + weight * half_k
    return DistributionTable(probs, names)


def information_chain_check(protocol: ToyProtocol, D: DistributionTable, k: int, cap: int = ENUMERATION_CAP) -> ChainReport:
    """Evaluate every quantity in the chain from m1 down to the per-coordinate sum."""
    joint = first_message_joint(protocol, D, k, cap)
    X = [f"X{i}" for i in range(1, k + 1)]
    Y = [f"Y{i}" for i in range(1, k + 1)]
    W = [f"W{i}" for i in range(1, k + 1)]
    mi = lambda a, b, c=(): mutual_information(joint, a, b, c)  # noqa: E731

    per_i = []
    for i in range(k):
        rest = tuple(W[:i] + W[i + 1 :])
        xi, yi = (X[i],), (Y[i],)
        mw = ("M",) + rest
        row = {
            "I(M;XiYi|W)": mi("M", xi + yi, W),
            "I(M;XiYi|Xi W-i)": mi("M", xi + yi, xi + rest),
            "I(M;XiYi|Yi W-i)": mi("M", xi + yi, yi + rest),
            "I(M;Yi|Xi W-i)": mi("M", yi, xi + rest),
            "I(M;Xi|Yi W-i)": mi("M", xi, yi + rest),
            "I(MW-i;Yi|Xi)": mi(mw, yi, xi),
            "I(MW-i;Xi|Yi)": mi(mw, xi, yi),
            "I(W-i;Yi|Xi)": mi(rest, yi, xi) if rest else 0.0,
            "I(W-i;Xi|Yi)": mi(rest, xi, yi) if rest else 0.0,
        }
        per_i.append(row)

    m1 = protocol.message_bits[0]
    steps = (
        float(m1),
        joint_entropy(joint, "M"),
        mi("M", X + Y, W),
        math.fsum(r["I(M;XiYi|W)"] for r in per_i),
        math.fsum((r["I(M;XiYi|Xi W-i)"] + r["I(M;XiYi|Yi W-i)"]) / 2 for r in per_i),
        math.fsum((r["I(M;Yi|Xi W-i)"] + r["I(M;Xi|Yi W-i)"]) / 2 for r in per_i),
        math.fsum(
            (r["I(MW-i;Yi|Xi)"] - r["I(W-i;Yi|Xi)"] + r["I(MW-i;Xi|Yi)"] - r["I(W-i;Xi|Yi)"]) / 2 for r in per_i
        ),
        math.fsum((r["I(MW-i;Yi|Xi)"] + r["I(MW-i;Xi|Yi)"]) / 2 for r in per_i),
    )
    # steps 0..3 are inequalities, 3..7 equalities
    gaps = [steps[s + 1] - steps[s] for s in range(3)]
    gaps += [abs(steps[s + 1] - steps[s]) for s in range(3, 7)]
    violation = max(gaps)
    return ChainReport(m1, steps[1], steps, tuple(per_i), violation <= TOLERANCE, violation)


# =========================
# First-message elimination
# =========================
@dataclass(frozen=True)
class EliminationResult:
    protocol: ToyProtocol
    epsilon: Fraction | float
    delta: float
    epsilon_prime: Fraction | float
    coin: tuple[int, int]
    m1: int
    k: int
    precondition: bool
    candidates: int
    mean_error: float
    coin_seeds: int = 0

    def as_dict(self, exact: bool = False) -> dict:
        """With `exact`, both errors are written as rational strings such as "3/16"."""
        def error(value):
            return str(value) if exact and isinstance(value, Fraction) else float(value)

        return {
            "epsilon": error(self.epsilon),
            "delta": self.delta,
            "epsilon_prime": error(self.epsilon_prime),
            "coin": {"i": self.coin[0], "seed": self.coin[1]},
            # every coordinate i, but only coin_seeds draws of the shared stream each
            "coin_search": {"coordinates": self.k, "seeds_per_coordinate": self.coin_seeds, "mode": "sampled"},
            "m1": self.m1,
            "k": self.k,
            "precondition": self.precondition,
            "candidates": self.candidates,
            "mean_error": self.mean_error,
            "remaining_bits": list(self.protocol.message_bits),
        }


def default_delta(m1: int, k: int) -> float:
    """Smallest delta with m1 <= delta^2 k / (8 ln 2). Only values below 1 carry a guarantee."""
    return math.sqrt(8 * math.log(2) * m1 / k)


class _Coordinate:
    """Per-coordinate tables derived from D: A[x, w] and B[y, w] for w in {X-tagged, Y-tagged} values."""

    def __init__(self, D: DistributionTable):
        self.xs = sorted({u[0] for u in D.outcomes})
        self.ys = sorted({u[1] for u in D.outcomes})
        self.ws = [("X", x) for x in self.xs] + [("Y", y) for y in self.ys]
        self.d = np.zeros((len(self.xs), len(self.ys)))
        for (x, y), p in D.items():
            self.d[self.xs.index(x), self.ys.index(y)] += float(p)
        nx = len(self.xs)
        self.A = np.zeros((nx, len(self.ws)))
        self.B = np.zeros((len(self.ys), len(self.ws)))
        for a in range(nx):
            for b in range(len(self.ys)):
                p = self.d[a, b] / 2
                self.A[a, a] += p
                self.A[a, nx + b] += p
                self.B[b, a] += p
                self.B[b, nx + b] += p


def eliminate_first_message(
    protocol: ToyProtocol,
    f,
    D: DistributionTable,
    k: int,
    delta: float | None = None,
    seeds: int = 4,
    cap: int = ENUMERATION_CAP,
) -> EliminationResult:
    """
    Turn a protocol for f^[k] (Alice speaks first) into one for f that starts
    with Bob's message.

    For public coins (i, seed) the players embed (x, y) at coordinate i, agree
    on (m, w^-i) by correlated sampling from MW^-i|X_i=x and MW^-i|Y_i=y,
    complete their inputs from the conditional laws, and continue from the
    second message. The coordinate i is searched exhaustively; the shared
    randomness is searched over `seeds` draws only, so the fixed coin string
    is the best of k * seeds candidates, each scored by exact error over D.

    `delta` defaults to `default_delta(m1, k)`. The precondition holds only
    when delta < 1 and m1 <= delta^2 k / (8 ln 2); with delta >= 1 the
    bound eps + delta says nothing and no guarantee is claimed.
    """
    if protocol.first != "A":
        raise DistributionError("eliminate_first_message needs Alice to send the first message")
    coord = _Coordinate(D)
    nx, nw = len(coord.xs), len(coord.ws)
    m1 = protocol.message_bits[0]
    n_msgs = 2**m1
    _check_cap(nx ** max(k - 1, 0) * nw ** max(k - 1, 0) * n_msgs, cap, "eliminate_first_message")
    delta = default_delta(m1, k) if delta is None else delta

    f_k, D_k = build_f_power_k(f, D, k, cap)
    epsilon = protocol_error(protocol, f_k, D_k)

    alice_all = list(itertools.product(coord.xs, repeat=k))
    msg = np.array([protocol.tables[0][(xs, ())] for xs in alice_all]).reshape((nx,) * k)
    rest_T = np.ones((1, 1))
    for _ in range(k - 1):
        rest_T = np.kron(rest_T, coord.A)
    py = coord.d.sum(axis=0)

    best = None
    errors = []
    for i in range(1, k + 1):
        moved = np.moveaxis(msg, i - 1, 0).reshape(nx, -1)
        masks = [(moved == m).astype(float) for m in range(n_msgs)]
        F = np.stack([mask @ rest_T for mask in masks])  # (m, x_i, w^-i)
        P = {a: F[:, a, :].ravel() for a in range(nx)}
        Q = {}
        for b in range(len(coord.ys)):
            weights = coord.d[:, b] / py[b] if py[b] > 0 else np.full(nx, 1 / nx)
            Q[b] = np.tensordot(weights, F, axes=([0], [1])).ravel()
        for seed in range(seeds):
            reduced = _reduced_protocol(protocol, coord, k, i, seed, P, Q, masks, rest_T, n_msgs)
            err = protocol_error(reduced, f, D)
            errors.append(float(err))
            if best is None or err < best[0]:
                best = (err, reduced, (i, seed))
    err, reduced, coin = best
    logger.info("Eliminated first message: eps=%s eps'=%s coin=%s", float(epsilon), float(err), coin)
    return EliminationResult(
        protocol=reduced,
        epsilon=epsilon,
        delta=delta,
        epsilon_prime=err,
        coin=coin,
        m1=m1,
        k=k,
        precondition=delta < 1 and m1 <= delta**2 * k / (8 * math.log(2)) + 1e-12,
        candidates=len(errors),
        mean_error=float(np.mean(errors)),
        coin_seeds=seeds,
    )


def _reduced_protocol(protocol, coord, k, i, seed, P, Q, masks, rest_T, n_msgs) -> ToyProtocol:
    nx, nw = len(coord.xs), len(coord.ws)
    width = nw ** (k - 1)
    stream = SharedStream(n_msgs * width, (seed, i))

    alice_state = {}
    for a, x in enumerate(coord.xs):
        u = stream.first_accept(P[a])
        m, w = divmod(u, width)
        weights = masks[m][a] * rest_T[:, w]
        rng = np.random.default_rng((seed, i, 1, a))
        pick = int(rng.choice(weights.size, p=weights / weights.sum()))
        others = [coord.xs[v] for v in np.unravel_index(pick, (nx,) * (k - 1))] if k > 1 else []
        xs = tuple(others[: i - 1]) + (x,) + tuple(others[i - 1 :])
        alice_state[x] = (m, xs)

    bob_state = {}
    for b, y in enumerate(coord.ys):
        u = stream.first_accept(Q[b])
        m, w = divmod(u, width)
        rng = np.random.default_rng((seed, i, 2, b))
        others = []
        for wj in (np.unravel_index(w, (nw,) * (k - 1)) if k > 1 else []):
            col = coord.B[:, wj]
            others.append(coord.ys[int(rng.choice(len(coord.ys), p=col / col.sum()))])
        ys = tuple(others[: i - 1]) + (y,) + tuple(others[i - 1 :])
        bob_state[y] = (m, (ys, i))

    def state(party, inp):
        return alice_state[inp] if party == "A" else bob_state[inp]

    def message_fn(t):
        party = protocol.speaker(t)

        def fn(inp, tail):
            m, full = state(party, inp)
            return protocol.tables[t][(full, (m,) + tuple(tail))]

        return fn

    def output_fn(inp, tail):
        m, full = state(protocol.output_party, inp)
        return protocol.output[(full, (m,) + tuple(tail))]

    return ToyProtocol.tabulate(
        "B",
        protocol.message_bits[1:],
        [message_fn(t) for t in range(1, len(protocol.message_bits))],
        output_fn,
        coord.xs,
        coord.ys,
    )
