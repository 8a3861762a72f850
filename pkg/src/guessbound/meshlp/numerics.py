"""Probability mesh, log-space binomial pdf and the LP slack parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

__all__ = ["Mesh", "build_mesh", "bpdf", "log_bpdf", "derive_eps3", "eps2_from_delta", "LpParams"]

UNDERFLOW_LOG = -700.0
MESH_FLOOR_FACTOR = 1e4
EXACT_BINOM_TERMS = 100_000


@dataclass(frozen=True, eq=False)
class Mesh:
    """Geometric grid ``x_1 > ... > x_l`` with ``x_i = q^(l-i) x_l`` and ``x_l = 1/(1e4 n_ref)``."""

    values: np.ndarray
    q: float
    n_ref: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def l(self) -> int:
        return int(self.values.size)

    @property
    def x_l(self) -> float:
        return float(self.values[-1])

    def __len__(self):
        return self.l


def build_mesh(n: int, q: float) -> Mesh:
    if n < 1:
        raise ValueError("n must be at least 1")
    if not q > 1.0:
        raise ValueError(f"mesh ratio q must exceed 1, got {q}")
    x_l = 1.0 / (MESH_FLOOR_FACTOR * n)
    ln_q = math.log(q)
    r = -math.log(x_l) / ln_q
    # ln(1/x_l)/ln(q) can land a hair off an integer; snap so that q^(l-1) x_l <= 1 stays exact.
    k = round(r)
    l = (k if abs(r - k) < 1e-9 * max(1.0, r) else math.floor(r)) + 1
    values = x_l * np.exp(np.arange(l - 1, -1, -1, dtype=float) * ln_q)
    values[-1] = x_l
    return Mesh(values, float(q), int(n))


def _log_binom(n: int, i: int) -> float:
    if i < 0 or i > n:
        raise ValueError(f"need 0 <= i <= n, got i={i}, n={n}")
    i = min(i, n - i)
    if i <= EXACT_BINOM_TERMS:
        # term-by-term sum avoids the cancellation in gammaln(n+1) - gammaln(n-i+1)
        k = np.arange(1, i + 1, dtype=float)
        return float(np.sum(np.log1p((n - i) / k)))
    return float(gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1))


def log_bpdf(i: int, n: int, x):
    """Natural log of ``C(n, i) x^i (1-x)^(n-i)``; ``-inf`` where the pdf is exactly 0."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        return _log_binom(int(n), int(i)) + xlogy(i, x) + xlog1py(n - i, -x)


def bpdf(i: int, n: int, x):
    """Binomial pdf evaluated in log space; values below ``exp(-700)`` flush to 0."""
    lv = log_bpdf(i, n, x)
    out = np.where(lv < UNDERFLOW_LOG, 0.0, np.exp(np.maximum(lv, UNDERFLOW_LOG)))
    return float(out) if out.ndim == 0 else out


def derive_eps3(q: float, xhat: float, n: int, i: int) -> float:
    """Slack factor ``q^-(i+1) ((1-x)/(1-q x))^(n-i) - 1`` for rounding to the mesh."""
    if not q > 1.0:
        raise ValueError("q must exceed 1")
    if not q * xhat < 1.0:
        raise ValueError(f"need q*xhat < 1, got {q * xhat}")
    if xhat < (i + 1) / (n + 1):
        raise ValueError(f"xhat={xhat} must be at least (i+1)/(n+1)={(i + 1) / (n + 1)}")
    log_ratio = -(i + 1) * math.log(q) + (n - i) * (math.log1p(-xhat) - math.log1p(-q * xhat))
    eps3 = math.expm1(log_ratio)
    if not 0.0 < eps3 < 1.0:
        raise ValueError(
            f"eps3={eps3:.6g} for i={i} lies outside (0, 1); choose a smaller xhat (or a smaller q)"
            if eps3 >= 1.0
            else f"eps3={eps3:.6g} for i={i} lies outside (0, 1); choose a larger xhat"
        )
    return eps3


def eps2_from_delta(n: int, i: int, delta: float) -> float:
    """Band width with ``exp(-2 (n-i)^2 eps^2 / (n (i+1)^2)) = delta``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(n * (i + 1) ** 2 * -math.log(delta) / (2.0 * (n - i) ** 2))


def _band_delta(n, eps2):
    return 2.0 * sum(
        math.exp(-2.0 * (n - i) ** 2 * e * e / (n * (i + 1) ** 2)) for i, e in enumerate(eps2)
    )


@dataclass(frozen=True)
class LpParams:
    """Good-Turing band widths ``eps2`` and mesh-rounding slack ``eps3`` for ``i = 0..i_max``.

    ``xhat3`` and ``eps3`` are only needed by the final programs; the
    mesh-consistent programs leave them empty.
    """

    n: int
    eps2: tuple
    xhat3: tuple = ()
    eps3: tuple = ()
    q: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "eps2", tuple(float(e) for e in self.eps2))
        object.__setattr__(self, "xhat3", tuple(float(e) for e in self.xhat3))
        object.__setattr__(self, "eps3", tuple(float(e) for e in self.eps3))
        if not self.eps2:
            raise ValueError("need at least one band (i_max >= 0)")
        if any(not 0.0 <= e <= 1.0 for e in self.eps2):
            raise ValueError("eps2 entries must lie in [0, 1]")
        if self.n <= self.i_max + 1:
            raise ValueError("n must exceed i_max + 1")
        if self.xhat3 and len(self.xhat3) != len(self.eps2):
            raise ValueError("xhat3 must have one entry per band")
        if self.eps3 and len(self.eps3) != len(self.eps2):
            raise ValueError("eps3 must have one entry per band")

    @property
    def i_max(self) -> int:
        return len(self.eps2) - 1

    @property
    def delta(self) -> float:
        """Failure probability of the band constraints (two-sided union bound)."""
        return _band_delta(self.n, self.eps2)

    @property
    def has_rounding(self) -> bool:
        return bool(self.eps3)

    @classmethod
    def from_deltas(cls, n: int, q: float | None, delta4, xhat_multipliers=None):
        """Parameters whose ``i``-th band fails with probability ``2 delta4[i]``.

        ``xhat_multipliers`` are scaled by ``1/n``; omit them (and ``q``) for
        the mesh-consistent programs.
        """
        eps2 = tuple(eps2_from_delta(n, i, d) for i, d in enumerate(delta4))
        if xhat_multipliers is None:
            return cls(n, eps2, q=q)
        if len(xhat_multipliers) != len(eps2):
            raise ValueError("need one xhat multiplier per band")
        xhat = tuple(m / n for m in xhat_multipliers)
        eps3 = tuple(derive_eps3(q, x, n, i) for i, x in enumerate(xhat))
        return cls(n, eps2, xhat, eps3, q)
