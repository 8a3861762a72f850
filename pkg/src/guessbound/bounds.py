"""Closed-form high-confidence bounds on the guessing curve.

Every bound exists in two flavours selected by ``target``:

``distribution_lambda``
    a bound on ``lambda_G``, the success rate of a perfect-knowledge attacker
    against the underlying distribution;
``sample_lambda``
    a bound on ``lambda(S, G)``, the fraction of the concrete sample that the
    true top-``G`` passwords cover.

The two are linked by a bounded-differences (McDiarmid) shift of
``mcdiarmid_epsilon(n, delta)``; the error probabilities of the pieces add.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .corpus import FrequencyEncoding, FrequencyTable, Partition, SampleCorpus, top_g_mass

__all__ = [
    "KINDS",
    "METHODS",
    "TARGETS",
    "BoundPoint",
    "GuessingCurve",
    "ModelGuessList",
    "SplitBoundParams",
    "load_guess_list",
    "mcdiarmid_epsilon",
    "slack_t",
    "prior_slack_t",
    "frequency_ub",
    "h_count",
    "sampling_lb",
    "prior_lb",
    "prior_lb_best",
    "extended_lb",
    "extended_counts",
    "extended_lb_curve",
    "model_curve",
]

KINDS = ("upper", "lower", "estimate")
METHODS = (
    "frequency_ub",
    "prior_lb",
    "sampling_lb",
    "extended_lb",
    "lp_lb",
    "lp_ub",
    "best",
    "model_curve",
)
TARGETS = ("distribution_lambda", "sample_lambda")


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, float(v)))


@dataclass(frozen=True)
class BoundPoint:
    """One point of a bound curve.

    ``value`` is clamped to ``[0, 1]``; ``raw_value`` keeps the formula
    output, which may be negative (a vacuous lower bound) or exceed 1.
    ``delta`` is the probability that the bound fails.  It is 0 for the
    deterministic sample-level frequency bound and 1 for a zero-slack
    diagnostic that carries no guarantee.
    """

    g: int
    value: float
    kind: str
    method: str
    delta: float
    target: str = "distribution_lambda"
    raw_value: float | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"value must lie in [0, 1], got {self.value}")
        if self.raw_value is None:
            object.__setattr__(self, "raw_value", float(self.value))

    @classmethod
    def make(cls, g, raw, kind, method, delta, target, **provenance):
        return cls(
            g=int(g),
            value=_clamp01(raw),
            kind=kind,
            method=method,
            delta=float(delta),
            target=target,
            raw_value=float(raw),
            provenance=provenance,
        )

    def violated_by(self, truth: float) -> bool:
        """True when ``truth`` lies strictly on the wrong side of the bound."""
        if self.kind == "lower":
            return self.value > truth
        if self.kind == "upper":
            return self.value < truth
        return False


@dataclass(frozen=True)
class GuessingCurve:
    """Bound points of a single method, sorted by strictly increasing ``g``."""

    points: tuple
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.g))
        object.__setattr__(self, "points", pts)
        for a, b in zip(pts, pts[1:]):
            if a.g == b.g:
                raise ValueError(f"duplicate g={a.g} in curve")
        if pts:
            sig = {(p.kind, p.method, p.target) for p in pts}
            if len(sig) != 1:
                raise ValueError(f"curve mixes kinds/methods/targets: {sorted(sig)}")

    @property
    def method(self):
        return self.points[0].method if self.points else None

    @property
    def kind(self):
        return self.points[0].kind if self.points else None

    @property
    def g(self) -> np.ndarray:
        return np.array([p.g for p in self.points], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=float)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def at(self, g: int) -> BoundPoint:
        for p in self.points:
            if p.g == g:
                return p
        raise KeyError(g)


@dataclass(frozen=True)
class ModelGuessList:
    """Guesses of an attack model in the order it would try them."""

    guesses: tuple
    source_label: str = ""

    def __post_init__(self):
        guesses = tuple(self.guesses)
        if len(set(guesses)) != len(guesses):
            raise ValueError("model guess list contains duplicates")
        object.__setattr__(self, "guesses", guesses)

    @classmethod
    def from_iterable(cls, guesses: Iterable, source_label: str = "", dedupe: bool = True):
        if dedupe:
            guesses = dict.fromkeys(guesses)
        return cls(tuple(guesses), source_label)

    def __len__(self):
        return len(self.guesses)


def load_guess_list(path, dedupe: bool = True) -> ModelGuessList:
    """Read a guess list, one token per line in rank order.

    A leading ``# source: ...`` line sets the label.  Repeated guesses keep
    their first position when ``dedupe`` is set and raise otherwise.
    """
    label = os.path.basename(os.fspath(path))
    tokens = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.rstrip(b"\n").rstrip(b"\r")
            if lineno == 1 and raw.startswith(b"# source:"):
                label = raw[len(b"# source:"):].strip().decode("utf-8", "replace")
                continue
            tokens.append(raw)
    return ModelGuessList.from_iterable(tokens, label, dedupe=dedupe)


@dataclass(frozen=True)
class SplitBoundParams:
    """Split size ``d`` and slack ``t`` of the sampling-based bounds."""

    d: int
    t: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.t < 0:
            raise ValueError("t must be non-negative")

    @property
    def delta(self) -> float:
        return math.exp(-2.0 * self.t * self.t / self.d)

    @classmethod
    def from_delta(cls, d: int, delta: float):
        return cls(int(d), slack_t(d, delta))


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def mcdiarmid_epsilon(n: int, delta: float) -> float:
    """Shift ``eps`` with ``exp(-2 n eps^2) = delta``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_delta(delta)
    return math.sqrt(-math.log(delta) / (2.0 * n))


def slack_t(d: int, delta: float) -> float:
    """Slack ``t`` with ``exp(-2 t^2 / d) = delta``."""
    if d < 1:
        raise ValueError("d must be at least 1")
    _check_delta(delta)
    return math.sqrt(0.5 * d * -math.log(delta))


def prior_slack_t(n: int, j: int, delta: float) -> float:
    """Slack ``t`` for the prior bound, solving ``exp(-2 t^2 / (n j^2)) = delta``."""
    _check_delta(delta)
    return math.sqrt(0.5 * n * j * j * -math.log(delta))


def _target_shift(target, n, delta_eps):
    """McDiarmid shift and its error probability for the requested target."""
    if target == "sample_lambda":
        return 0.0, 0.0
    if target != "distribution_lambda":
        raise ValueError(f"unknown target {target!r}")
    return mcdiarmid_epsilon(n, delta_eps), float(delta_eps)


def frequency_ub(table: FrequencyTable, g: int, delta: float, target: str = "distribution_lambda") -> BoundPoint:
    """Upper bound from the empirical guessing curve.

    On the sample itself the top-``g`` frequencies dominate any other
    ``g``-subset, so the ``sample_lambda`` version is deterministic.
    """
    mass = top_g_mass(table, g)
    if target == "sample_lambda":
        return BoundPoint.make(g, mass, "upper", "frequency_ub", 0.0, target, top_g_mass=mass)
    eps = mcdiarmid_epsilon(table.n, delta)
    return BoundPoint.make(g, mass + eps, "upper", "frequency_ub", delta, target, top_g_mass=mass, epsilon=eps)


def h_count(partition: Partition, g: int) -> int:
    """Number of ``D2`` samples whose password is in ``T(D1, g)``."""
    if g < 0:
        raise ValueError("g must be non-negative")
    return int(np.searchsorted(partition.sorted_d2_ranks, int(g), side="left"))


def _split_bound(count, g, params, method, target, n, delta_eps, **prov):
    eps, d_eps = 0.0, 0.0
    if target == "sample_lambda":
        if delta_eps is None:
            raise ValueError("target=sample_lambda needs delta_eps for the McDiarmid shift")
        eps, d_eps = mcdiarmid_epsilon(n, delta_eps), float(delta_eps)
    elif target != "distribution_lambda":
        raise ValueError(f"unknown target {target!r}")
    raw = (count - params.t) / params.d - eps
    return BoundPoint.make(
        g, raw, "lower", method, params.delta + d_eps, target,
        h=int(count), t=params.t, d=params.d, epsilon=eps,
        delta_split=params.delta, delta_eps=d_eps, **prov,
    )


def sampling_lb(
    partition: Partition,
    g: int,
    params: SplitBoundParams,
    target: str = "distribution_lambda",
    delta_eps: float | None = None,
) -> BoundPoint:
    """Lower bound ``(h - t) / d`` from held-out samples.

    The ``sample_lambda`` version subtracts ``mcdiarmid_epsilon(n, delta_eps)``
    and adds ``delta_eps`` to the error probability.
    """
    if params.d != partition.d:
        raise ValueError(f"params.d={params.d} does not match partition.d={partition.d}")
    return _split_bound(h_count(partition, g), g, params, "sampling_lb", target, partition.n, delta_eps,
                        seed=partition.seed)


def _check_prior_args(enc, L, j):
    if L < 1:
        raise ValueError(f"L must be at least 1 (bound needs G >= N), got {L}")
    if j < 2:
        raise ValueError(f"j must be at least 2, got {j}")
    if enc.n < 1:
        raise ValueError("empty frequency encoding")


def _prior_terms(enc: FrequencyEncoding, L: float, j_values: np.ndarray):
    """Head mass sum_{f_i >= j} f_i and the penalty N / ((j-1)! L^(j-1)) for each j."""
    ks = np.fromiter(enc.f_of_f.keys(), dtype=np.int64)
    mass = ks * np.fromiter(enc.f_of_f.values(), dtype=np.int64)
    order = np.argsort(ks)
    ks, mass = ks[order], mass[order]
    tail = np.concatenate((np.cumsum(mass[::-1])[::-1], [0]))
    head = tail[np.searchsorted(ks, j_values, side="left")].astype(float)
    log_penalty = math.log(enc.n) - (gammaln(j_values) + (j_values - 1) * math.log(L))
    penalty = np.exp(np.minimum(log_penalty, 700.0))
    return head, penalty


def prior_lb(
    enc: FrequencyEncoding,
    L: float,
    j: int,
    t: float,
    delta_eps: float | None = None,
    target: str = "distribution_lambda",
) -> BoundPoint:
    """Lower bound at ``G = ceil(N L)`` from passwords seen at least ``j`` times.

    Fails with probability ``exp(-2 t^2 / (N j^2))``, plus ``delta_eps`` for
    the ``distribution_lambda`` version which also subtracts the McDiarmid
    shift.
    """
    _check_prior_args(enc, L, j)
    if t < 0:
        raise ValueError("t must be non-negative")
    n = enc.n
    head, penalty = _prior_terms(enc, L, np.array([j]))
    if target == "distribution_lambda" and delta_eps is None:
        raise ValueError("target=distribution_lambda needs delta_eps")
    eps, d_eps = _target_shift(target, n, delta_eps)
    delta_t = math.exp(-2.0 * t * t / (n * j * j))
    raw = (head[0] - penalty[0] - t) / n - eps
    return BoundPoint.make(
        math.ceil(n * L), raw, "lower", "prior_lb", delta_t + d_eps, target,
        j=int(j), L=float(L), t=float(t), epsilon=eps, delta_t=delta_t, delta_eps=d_eps,
    )


def prior_lb_best(
    enc: FrequencyEncoding,
    L: float,
    delta_t: float | None = None,
    delta_eps: float | None = None,
    target: str = "distribution_lambda",
    t: float | None = None,
    j_range: tuple = (2, 1000),
) -> BoundPoint:
    """Best prior bound over ``j`` in ``j_range`` (inclusive).

    With ``delta_t`` set, ``t`` is recomputed for every ``j`` so that each
    candidate fails with probability ``delta_t``.  With a fixed ``t`` the
    failure probability varies with ``j`` and is reported for the winner.
    Ties go to the smallest ``j``.
    """
    if (delta_t is None) == (t is None):
        raise ValueError("give exactly one of delta_t and t")
    lo, hi = int(j_range[0]), int(j_range[1])
    _check_prior_args(enc, L, lo)
    if hi < lo:
        raise ValueError("empty j range")
    if target == "distribution_lambda" and delta_eps is None:
        raise ValueError("target=distribution_lambda needs delta_eps")
    n = enc.n
    js = np.arange(lo, hi + 1)
    head, penalty = _prior_terms(enc, L, js)
    if delta_t is not None:
        _check_delta(delta_t)
        ts = np.sqrt(0.5 * n * js.astype(float) ** 2 * -math.log(delta_t))
    else:
        if t < 0:
            raise ValueError("t must be non-negative")
        ts = np.full(js.size, float(t))
    raw = (head - penalty - ts) / n
    k = int(np.argmax(raw))
    point = prior_lb(enc, L, int(js[k]), float(ts[k]), delta_eps, target)
    point.provenance["j_range"] = (lo, hi)
    return point


def _lookup(vocab, token) -> int:
    i = vocab.id_of(token)
    if i < 0:
        if isinstance(token, str):
            i = vocab.id_of(token.encode("utf-8", "surrogateescape"))
        elif isinstance(token, bytes):
            i = vocab.id_of(token.decode("utf-8", "surrogateescape"))
    return i


def _novel_positions(partition: Partition, model: ModelGuessList) -> np.ndarray:
    """Sorted positions, within the model guesses absent from ``D1``, of the ``D2`` samples unseen in ``D1``."""
    vocab = partition.d1.vocab
    ids = np.fromiter((_lookup(vocab, tok) for tok in model.guesses), dtype=np.int64, count=len(model))
    known = ids >= 0
    fresh = np.ones(ids.size, dtype=bool)
    fresh[known] = partition.d1.ranks_of(ids[known]) < 0
    novel_ids = ids[fresh]
    pos_of = {int(i): k for k, i in enumerate(novel_ids) if i >= 0}
    unseen = partition.d2.ids[partition.d2_ranks < 0]
    pos = np.fromiter((pos_of.get(int(i), -1) for i in unseen), dtype=np.int64, count=unseen.size)
    return np.sort(pos[pos >= 0])


def extended_counts(partition: Partition, model: ModelGuessList, gs: Sequence[int]) -> np.ndarray:
    """``h'`` counts of the combined guesser (``D1`` by frequency, then fresh model guesses) at each ``g``."""
    gs = np.asarray(gs, dtype=np.int64)
    k = partition.d1.distinct
    h_all = partition.sorted_d2_ranks.size
    novel = _novel_positions(partition, model)
    out = np.searchsorted(partition.sorted_d2_ranks, np.minimum(gs, k), side="left")
    extra = np.searchsorted(novel, np.maximum(gs - k, 0), side="left")
    return np.where(gs > k, h_all + extra, out).astype(np.int64)


def extended_lb(
    partition: Partition,
    model: ModelGuessList,
    g: int,
    params: SplitBoundParams,
    target: str = "distribution_lambda",
    delta_eps: float | None = None,
) -> BoundPoint:
    """Sampling bound for the guesser that extends ``T(D1, .)`` with a model's guesses."""
    if params.d != partition.d:
        raise ValueError(f"params.d={params.d} does not match partition.d={partition.d}")
    count = int(extended_counts(partition, model, [g])[0])
    return _split_bound(count, g, params, "extended_lb", target, partition.n, delta_eps,
                        seed=partition.seed, model=model.source_label)


def extended_lb_curve(
    partition: Partition,
    model: ModelGuessList,
    gs: Sequence[int],
    params: SplitBoundParams,
    target: str = "distribution_lambda",
    delta_eps: float | None = None,
) -> list:
    """:func:`extended_lb` at every ``g`` of ``gs`` with a single pass over the model."""
    if params.d != partition.d:
        raise ValueError(f"params.d={params.d} does not match partition.d={partition.d}")
    counts = extended_counts(partition, model, gs)
    return [
        _split_bound(int(h), int(g), params, "extended_lb", target, partition.n, delta_eps,
                     seed=partition.seed, model=model.source_label)
        for g, h in zip(gs, counts)
    ]


def model_curve(d2: SampleCorpus, model: ModelGuessList, gs: Sequence[int]) -> np.ndarray:
    """Fraction of ``d2`` samples the model cracks within ``g`` guesses, for each ``g``."""
    rank = {}
    for pos, tok in enumerate(model.guesses, start=1):
        i = _lookup(d2.vocab, tok)
        if i >= 0:
            rank.setdefault(i, pos)
    numbers = np.fromiter((rank.get(int(i), 0) for i in d2.ids), dtype=np.int64, count=d2.n)
    cracked = np.sort(numbers[numbers > 0])
    gs = np.asarray(gs, dtype=np.int64)
    return np.searchsorted(cracked, gs, side="right") / max(d2.n, 1)
