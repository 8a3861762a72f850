"""Default error-probability schedule and the parameters derived from it.

Every bound is tuned to fail with probability at most 0.01:

* the frequency upper bound spends ``delta1`` on the McDiarmid shift;
* the sampling and extended bounds spend ``delta3 = 0.01 - delta1`` on the
  split slack ``t``;
* the prior bound spends ``delta1`` on the shift and ``delta2 = 0.01 - delta1``
  on its slack (recomputed for every ``j``);
* the LP bounds spend ``2 * sum(delta4)`` on the Good-Turing bands.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

from .bounds import SplitBoundParams, mcdiarmid_epsilon
from .meshlp import LpParams, Mesh, build_mesh

__all__ = ["Schedule", "DerivedSchedule", "derive_schedule", "default_schedule", "AUDIT_TOL"]

AUDIT_TOL = 1e-12


@dataclass(frozen=True)
class Schedule:
    delta1: float = 0.00009
    d: int = 25000
    delta3: float | None = None
    delta2: float | None = None
    q: float = 1.002
    i_max: int = 4
    delta4: tuple = (0.00009, 0.000165, 0.00175, 0.00175, 0.0012)
    xhat3_multipliers: tuple = (7.0, 11.0, 14.0, 16.3, 18.5)
    prior_j_range: tuple = (2, 1000)
    target_confidence: float = 0.99

    def __post_init__(self):
        budget = 1.0 - self.target_confidence
        if self.delta3 is None:
            object.__setattr__(self, "delta3", budget - self.delta1)
        if self.delta2 is None:
            object.__setattr__(self, "delta2", budget - self.delta1)
        object.__setattr__(self, "delta4", tuple(float(v) for v in self.delta4))
        object.__setattr__(self, "xhat3_multipliers", tuple(float(v) for v in self.xhat3_multipliers))
        object.__setattr__(self, "prior_j_range", tuple(int(v) for v in self.prior_j_range))
        if len(self.delta4) != self.i_max + 1 or len(self.xhat3_multipliers) != self.i_max + 1:
            raise ValueError(f"delta4 and xhat3_multipliers need i_max + 1 = {self.i_max + 1} entries")
        for name in ("delta1", "delta2", "delta3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not self.q > 1.0:
            raise ValueError("q must exceed 1")
        if self.d < 1:
            raise ValueError("d must be positive")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        if "i_max" in kw and kw["i_max"] != self.i_max:
            k = kw["i_max"] + 1
            kw.setdefault("delta4", (self.delta4 + (self.delta4[-1],) * k)[:k])
            kw.setdefault("xhat3_multipliers", (self.xhat3_multipliers + (self.xhat3_multipliers[-1],) * k)[:k])
        return replace(self, **kw)

    def audit(self) -> dict:
        """Total failure probability of every bound family."""
        return {
            "frequency_ub": self.delta1,
            "sampling_lb": self.delta3,
            "extended_lb": self.delta3,
            "prior_lb": self.delta1 + self.delta2,
            "lp_lb": 2.0 * sum(self.delta4),
            "lp_ub": 2.0 * sum(self.delta4),
        }

    def check(self) -> dict:
        budget = 1.0 - self.target_confidence
        totals = self.audit()
        over = {m: v for m, v in totals.items() if v > budget + AUDIT_TOL}
        if over:
            raise ValueError(f"schedule exceeds the error budget {budget:g}: {over}")
        return totals


@dataclass(frozen=True, eq=False)
class DerivedSchedule:
    """A schedule specialised to a sample size ``n``."""

    n: int
    schedule: Schedule
    epsilon1: float
    split: SplitBoundParams
    lp: LpParams | None
    audit: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def delta1(self) -> float:
        return self.schedule.delta1

    @cached_property
    def mesh(self) -> Mesh:
        return build_mesh(self.n, self.schedule.q)

    def summary(self) -> dict:
        s = asdict(self.schedule)
        s.update(
            n=self.n,
            epsilon1=self.epsilon1,
            t=self.split.t,
            d_effective=self.split.d,
            eps2=list(self.lp.eps2) if self.lp else None,
            eps3=list(self.lp.eps3) if self.lp else None,
            xhat3=list(self.lp.xhat3) if self.lp else None,
            audit=self.audit,
            notes=list(self.notes),
        )
        return s


def derive_schedule(n: int, schedule: Schedule | None = None, need_lp: bool = True) -> DerivedSchedule:
    """Derive ``eps1``, ``t``, ``eps2`` and ``eps3`` for a sample of size ``n``.

    When ``n <= d`` the split falls back to ``d = n // 4`` and a note says so.
    With ``need_lp=False`` LP parameters that cannot be derived (tiny ``n``)
    leave ``lp`` as ``None`` instead of raising.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    sch = schedule or Schedule()
    audit = sch.check()
    notes = []
    d = sch.d
    if d >= n:
        d = max(1, n // 4)
        notes.append(f"split size {sch.d} >= n={n}; using d={d}")
    try:
        lp = LpParams.from_deltas(n, sch.q, sch.delta4, sch.xhat3_multipliers)
    except ValueError as exc:
        if need_lp:
            raise ValueError(f"cannot derive LP parameters for n={n}, q={sch.q}: {exc}") from exc
        lp = None
        notes.append(f"no LP parameters for n={n}, q={sch.q}: {exc}")
    return DerivedSchedule(
        n=n,
        schedule=sch,
        epsilon1=mcdiarmid_epsilon(n, sch.delta1),
        split=SplitBoundParams.from_delta(d, sch.delta3),
        lp=lp,
        audit=audit,
        notes=tuple(notes),
    )


def default_schedule(n: int) -> DerivedSchedule:
    return derive_schedule(n, Schedule())
