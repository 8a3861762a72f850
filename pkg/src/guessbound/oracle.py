"""Synthetic ground truth: known distributions, samplers and the coverage harness.

Real breach corpora cannot ship with the package, so the statistical
guarantees are checked here instead: draw samples from a distribution whose
guessing curve is known exactly, compute every bound and count how often it
lands on the wrong side of the truth.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import bounds as B
from .corpus import IndexedLabels, SampleCorpus, frequency_encoding, partition
from .meshlp import Mesh, lp_lower_bound, lp_upper_bound
from .schedule import DerivedSchedule, Schedule, derive_schedule

__all__ = [
    "KnownDistribution",
    "make_uniform",
    "make_zipf",
    "make_mesh_aligned",
    "aligned_histogram",
    "round_to_mesh",
    "exact_lambda",
    "sample",
    "sample_counts",
    "cdf_zipf",
    "CDF_ZIPF_PARAMS",
    "CoverageReport",
    "coverage_trial",
    "COVERAGE_METHODS",
]

MASS_TOL = 1e-9

# (y, r) fits from prior work for lambda_G ~ y G^r
CDF_ZIPF_PARAMS = {
    "rockyou": (0.0374, 0.1872),
    "yahoo": (0.03315, 0.1811),
    "000webhost": (0.0059, 0.2816),
    "battlefield": (0.0103, 0.2949),
    "csdn": (0.0588, 0.1486),
}


@dataclass(frozen=True, eq=False)
class KnownDistribution:
    """Non-increasing probability vector ``p_1 >= ... >= p_k > 0``.

    Password ``i`` (0-based) is the token ``labels[i]``.  Probabilities must
    sum to 1 within ``1e-9``; the constructors below normalise to machine
    precision except for mesh-aligned distributions, whose values are kept
    exactly on the mesh.
    """

    probs: np.ndarray
    name: str = ""

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("need a non-empty probability vector")
        if np.any(p <= 0):
            raise ValueError("probabilities must be positive")
        if np.any(np.diff(p) > 0):
            raise ValueError("probabilities must be non-increasing")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return int(self.probs.size)

    @cached_property
    def labels(self) -> IndexedLabels:
        return IndexedLabels(self.k)

    @cached_property
    def curve(self) -> np.ndarray:
        """``curve[g]`` is ``lambda_g`` for ``g = 0..k``."""
        c = np.concatenate(([0.0], np.cumsum(self.probs)))
        c[-1] = 1.0
        c.setflags(write=False)
        return c

    @cached_property
    def _alias(self):
        """Vose alias table for O(1) draws."""
        k = self.k
        scaled = self.probs * (k / self.probs.sum())
        prob = np.ones(k)
        alias = np.arange(k)
        small = list(np.nonzero(scaled < 1.0)[0][::-1])
        large = list(np.nonzero(scaled >= 1.0)[0][::-1])
        scaled = scaled.copy()
        while small and large:
            s, g = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        return prob, alias

    def histogram(self, mesh: Mesh) -> np.ndarray:
        """Number of passwords at each mesh value (relative match ``1e-9``).

        Probabilities below ``x_l`` are allowed if they carry less than
        ``x_l`` in total; they are the residue a mesh-aligned histogram
        cannot represent.
        """
        x = mesh.values
        above = self.probs >= x[-1] * (1 - 1e-9)
        if self.probs[~above].sum() >= x[-1]:
            raise ValueError("distribution puts at least x_l of mass below the mesh")
        p = self.probs[above]
        pos = np.searchsorted(-x, -p * (1 + 1e-9), side="left")
        pos = np.minimum(pos, x.size - 1)
        if not np.all(np.abs(x[pos] - p) <= 1e-9 * p):
            raise ValueError("distribution is not aligned with the mesh")
        return np.bincount(pos, minlength=x.size)


def make_uniform(k: int) -> KnownDistribution:
    if k < 1:
        raise ValueError("k must be at least 1")
    return KnownDistribution(np.full(k, 1.0 / k), f"uniform({k})")


def make_zipf(k: int, s: float) -> KnownDistribution:
    """``p_i`` proportional to ``i^-s`` for ``i = 1..k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if s < 0:
        raise ValueError("exponent must be non-negative")
    w = np.arange(1, k + 1, dtype=float) ** -float(s)
    return KnownDistribution(w / w.sum(), f"zipf({k},{s:g})")


def make_mesh_aligned(mesh: Mesh, histogram) -> KnownDistribution:
    """Distribution with exactly ``histogram[j]`` passwords of probability ``mesh.values[j]``.

    The histogram mass must lie in ``(1 - x_l, 1]``: mesh values are not
    commensurate, so a shortfall below ``x_l`` is carried by one extra
    password under the mesh floor.
    """
    h = np.asarray(histogram)
    if h.shape != mesh.values.shape:
        raise ValueError("histogram must have one entry per mesh value")
    if np.any(h < 0) or np.any(h != np.round(h)):
        raise ValueError("histogram entries must be non-negative integers")
    h = h.astype(np.int64)
    rest = 1.0 - float(np.dot(h, mesh.values))
    if not -MASS_TOL <= rest < mesh.x_l:
        raise ValueError(f"histogram carries mass {1.0 - rest!r}; need 1 - x_l < mass <= 1")
    probs = np.repeat(mesh.values, h)
    if rest > MASS_TOL:
        probs = np.append(probs, rest)
    return KnownDistribution(probs, f"mesh-aligned(q={mesh.q:g},l={mesh.l})")


def aligned_histogram(mesh: Mesh, dist: KnownDistribution) -> np.ndarray:
    """Integer mesh histogram close to ``dist`` with total mass 1 up to ``x_l``.

    Every probability is rounded down onto the mesh; the mass this loses is
    handed back greedily, largest mesh value first.
    """
    x = mesh.values
    pos = np.searchsorted(-x, -dist.probs, side="left")
    keep = pos < x.size
    h = np.bincount(pos[keep], minlength=x.size).astype(np.int64)
    rest = 1.0 - float(np.dot(h, x))
    for j in range(x.size):
        if rest < x[-1]:
            break
        extra = int(rest // x[j])
        if extra:
            h[j] += extra
            rest -= extra * x[j]
    return h


def round_to_mesh(dist: KnownDistribution, mesh: Mesh, direction: str):
    """Mesh histogram and tail mass of ``dist`` after rounding onto the mesh.

    ``direction='down'`` maps each probability ``>= x_l`` to the largest mesh
    value not above it; smaller probabilities form the tail mass ``p``.
    ``direction='up'`` maps each probability ``>= x_l / q`` to the smallest
    mesh value not below it.
    """
    x, q = mesh.values, mesh.q
    p = dist.probs
    if direction == "down":
        inside = p >= x[-1] * (1 - 1e-12)
        pos = np.searchsorted(-x, -p[inside] * (1 + 1e-12), side="left")
    elif direction == "up":
        inside = p >= x[-1] / q
        if np.any(p > x[0] * (1 + 1e-12)):
            raise ValueError("a probability exceeds the top mesh value; it cannot be rounded up")
        pos = np.searchsorted(-x, -p[inside] * (1 - 1e-12), side="right") - 1
        pos = np.maximum(pos, 0)
    else:
        raise ValueError("direction must be 'down' or 'up'")
    h = np.bincount(pos, minlength=x.size).astype(np.int64)
    tail = float(p[~inside].sum())
    return h, tail


def exact_lambda(dist: KnownDistribution, g: int) -> float:
    """Mass of the ``g`` most likely passwords."""
    if g < 0:
        raise ValueError("g must be non-negative")
    return float(dist.curve[min(int(g), dist.k)])


def sample(dist: KnownDistribution, n: int, seed=None) -> SampleCorpus:
    """``n`` independent draws (alias method, ``numpy.random.default_rng(seed)``)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    prob, alias = dist._alias
    cols = rng.integers(0, dist.k, size=n)
    coin = rng.random(n)
    ids = np.where(coin < prob[cols], cols, alias[cols])
    return SampleCorpus(ids, dist.labels)


def sample_counts(dist: KnownDistribution, n: int, seed=None):
    """Frequency table of ``n`` draws without materialising the samples."""
    from .corpus import FrequencyTable

    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, dist.probs / dist.probs.sum())
    ids = np.nonzero(counts)[0]
    return FrequencyTable._from_id_counts(ids, counts[ids], dist.labels)


def cdf_zipf(y: float, r: float, g) -> float:
    """The CDF-Zipf model ``min(y g^r, 1)``."""
    if y <= 0 or r < 0:
        raise ValueError("need y > 0 and r >= 0")
    g = np.asarray(g, dtype=float)
    if np.any(g < 1):
        raise ValueError("g must be at least 1")
    out = np.minimum(y * g**r, 1.0)
    return float(out) if out.ndim == 0 else out


COVERAGE_METHODS = ("frequency_ub", "sampling_lb", "prior_lb", "lp_lb", "lp_ub")


def _threshold(delta, trials):
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


@dataclass
class CoverageReport:
    """Violation counts of each bound over repeated (sample, split) draws.

    ``violations[m][g]`` counts trials where method ``m`` was strictly on the
    wrong side of ``lambda_g``; ``any_violations[m]`` counts trials with a
    violation at some ``g``.  ``lp_bracket`` counts trials where the LP lower
    or upper bound failed.
    """

    distribution: str
    n: int
    trials: int
    base_seed: int
    seeds: list
    methods: list
    deltas: dict
    violations: dict
    any_violations: dict
    bracket_widths: dict = field(default_factory=dict)
    trial_stats: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    schedule: dict = field(default_factory=dict)

    def rates(self, method) -> dict:
        return {g: c / self.trials for g, c in self.violations[method].items()}

    def max_rate(self, method) -> float:
        return max(self.rates(method).values(), default=0.0)

    def any_rate(self, method) -> float:
        return self.any_violations[method] / self.trials

    def threshold(self, method) -> float:
        return _threshold(self.deltas[method], self.trials)

    def passed(self, method) -> bool:
        return self.max_rate(method) <= self.threshold(method)

    def summary_lines(self):
        for m in self.violations:
            worst = self.max_rate(m)
            yield (
                f"{'PASS' if self.passed(m) else 'FAIL'} {m}: worst per-G violation rate {worst:.4f} "
                f"(any-G {self.any_rate(m):.4f}) vs threshold {self.threshold(m):.4f} "
                f"[delta={self.deltas[m]:.5g}, trials={self.trials}]"
            )

    def to_dict(self, with_traces: bool = False) -> dict:
        d = asdict(self)
        d["violations"] = {m: {str(g): c for g, c in v.items()} for m, v in self.violations.items()}
        d["bracket_widths"] = {str(g): w for g, w in self.bracket_widths.items()}
        d["rates"] = {m: {str(g): r for g, r in self.rates(m).items()} for m in self.violations}
        d["thresholds"] = {m: self.threshold(m) for m in self.violations}
        d["passed"] = {m: self.passed(m) for m in self.violations}
        if not with_traces:
            d.pop("traces")
        return d

    def to_json(self, with_traces: bool = False) -> str:
        return json.dumps(self.to_dict(with_traces), indent=2, sort_keys=True)

    def write_traces_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed", "method", "g", "value", "truth", "violated"])
        for row in self.traces:
            w.writerow([row["trial"], row["seed"], row["method"], row["g"], repr(row["value"]),
                        repr(row["truth"]), int(row["violated"])])


def coverage_trial(
    dist: KnownDistribution,
    n: int,
    g_grid: Sequence[int],
    methods: Sequence[str] = ("frequency_ub", "sampling_lb", "prior_lb"),
    trials: int = 100,
    base_seed: int = 0,
    schedule: Schedule | None = None,
    prior_L: Sequence[float] = (1, 2, 4),
    solver=None,
    workers: int | None = None,
    keep_traces: bool = False,
    progress=None,
) -> CoverageReport:
    """Run ``trials`` independent experiments and count bound violations.

    Trial ``t`` draws its sample with seed ``base_seed + t`` and splits it
    with seed ``[base_seed + t, 1]``.  Prior bounds are evaluated at
    ``G = ceil(n L)`` for each ``L`` in ``prior_L``; all other methods at
    every point of ``g_grid``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    methods = list(dict.fromkeys(methods))
    unknown = set(methods) - set(COVERAGE_METHODS)
    if unknown:
        raise ValueError(f"unsupported coverage methods: {sorted(unknown)}")
    grid = sorted({int(g) for g in g_grid})
    lp_wanted = [m for m in methods if m in ("lp_lb", "lp_ub")]
    ds: DerivedSchedule = derive_schedule(n, schedule, need_lp=bool(lp_wanted))

    deltas = {
        "frequency_ub": ds.delta1,
        "sampling_lb": ds.split.delta,
        "prior_lb": ds.delta1 + ds.schedule.delta2,
        "lp_lb": ds.lp.delta if lp_wanted else None,
        "lp_ub": ds.lp.delta if lp_wanted else None,
    }
    deltas = {m: deltas[m] for m in methods}
    g_of = {m: ([math.ceil(n * L) for L in prior_L] if m == "prior_lb" else grid) for m in methods}
    violations = {m: {g: 0 for g in g_of[m]} for m in methods}
    any_v = {m: 0 for m in methods}
    if len(lp_wanted) == 2:
        deltas["lp_bracket"] = 2 * ds.lp.delta
        violations["lp_bracket"] = {g: 0 for g in grid}
        any_v["lp_bracket"] = 0
    width_sum = {g: 0.0 for g in grid} if len(lp_wanted) == 2 else {}
    seeds, stats, traces = [], [], []
    truth = {g: exact_lambda(dist, g) for m in methods for g in g_of[m]}

    for trial in range(trials):
        seed = base_seed + trial
        seeds.append(seed)
        table = sample(dist, n, seed).frequency_table()
        enc = frequency_encoding(table)
        points = {m: {} for m in methods}
        stat = {"trial": trial, "seed": seed, "distinct": enc.distinct, "unique": enc.unique}

        if "frequency_ub" in methods:
            for g in grid:
                points["frequency_ub"][g] = B.frequency_ub(table, g, ds.delta1)
        if "sampling_lb" in methods:
            part = partition(table, ds.split.d, seed=[seed, 1])
            for g in grid:
                points["sampling_lb"][g] = B.sampling_lb(part, g, ds.split)
            stat["sampling_plateau"] = B.sampling_lb(part, part.d1.distinct, ds.split).raw_value
            stat["distinct_d1"] = part.d1.distinct
        if "prior_lb" in methods:
            for L, g in zip(prior_L, g_of["prior_lb"]):
                points["prior_lb"][g] = B.prior_lb_best(
                    enc, L, delta_t=ds.schedule.delta2, delta_eps=ds.delta1, j_range=ds.schedule.prior_j_range
                )
        for m in lp_wanted:
            fn = lp_lower_bound if m == "lp_lb" else lp_upper_bound
            for g in grid:
                points[m][g] = fn(g, ds.mesh, enc, ds.lp, solver=solver, workers=workers)

        any_hit = {m: False for m in violations}
        for m in methods:
            for g, pt in points[m].items():
                bad = pt.violated_by(truth[g])
                if bad:
                    violations[m][g] += 1
                    any_hit[m] = True
                if keep_traces:
                    traces.append({"trial": trial, "seed": seed, "method": m, "g": g,
                                   "value": pt.value, "truth": truth[g], "violated": bad})
        if "lp_bracket" in violations:
            for g in grid:
                lo, hi = points["lp_lb"][g], points["lp_ub"][g]
                if lo.violated_by(truth[g]) or hi.violated_by(truth[g]):
                    violations["lp_bracket"][g] += 1
                    any_hit["lp_bracket"] = True
                width_sum[g] += hi.value - lo.value
            above = [g for g in grid if g > enc.distinct]
            stat["lp_lb_beyond_distinct"] = max((points["lp_lb"][g].value for g in above), default=None)
        for m, hit in any_hit.items():
            any_v[m] += hit
        stats.append(stat)
        if progress is not None:
            progress(trial + 1, trials)

    return CoverageReport(
        distribution=dist.name,
        n=n,
        trials=trials,
        base_seed=base_seed,
        seeds=seeds,
        methods=methods,
        deltas=deltas,
        violations=violations,
        any_violations=any_v,
        bracket_widths={g: w / trials for g, w in width_sum.items()},
        trial_stats=stats,
        traces=traces,
        schedule=ds.summary(),
    )
