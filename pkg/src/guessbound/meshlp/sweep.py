"""LP bounds on the guessing curve and the IID consistency check.

A bound needs the optimum over every block index ``idx``; instances are
independent, so the ``idx`` range is cut into contiguous chunks that are
swept (warm-started) in parallel.  ``GUESSBOUND_THREADS`` caps the number
of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..bounds import BoundPoint, mcdiarmid_epsilon
from ..corpus import FrequencyEncoding
from .numerics import LpParams, Mesh
from .programs import LpTemplate
from .solvers import FAILURE, INFEASIBLE, OPTIMAL, LpOutcome, default_solver

__all__ = [
    "LpSolveError",
    "InconsistentSampleError",
    "IidVerdict",
    "worker_count",
    "sweep_template",
    "lp_lower_bound",
    "lp_upper_bound",
    "lp1_bound",
    "check_iid_consistency",
]


class LpSolveError(RuntimeError):
    """The solver failed numerically on some instances even after the retry."""

    def __init__(self, message, idxs):
        super().__init__(f"{message}; failing idx: {idxs}")
        self.idxs = list(idxs)


class InconsistentSampleError(RuntimeError):
    """Every ``idx`` instance is infeasible: the sample does not look IID."""

    def __init__(self, g, task, rows=None):
        self.g, self.task, self.rows = g, task, rows
        super().__init__(
            f"no feasible {task} program at G={g}; the frequency counts are inconsistent with IID sampling"
        )


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GUESSBOUND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"GUESSBOUND_THREADS must be an integer, got {env!r}") from None
    return 1


def sweep_template(template: LpTemplate, solver=None, idxs=None, workers: int | None = None) -> dict:
    """Solve every ``idx`` instance; returns ``{idx: LpOutcome}``.

    Instances that :meth:`LpTemplate.exceeds_capacity` rules out are marked
    infeasible without a solve.
    """
    solver = default_solver() if solver is None else solver
    idxs = list(template.idx_range if idxs is None else idxs)
    out = {i: LpOutcome(INFEASIBLE, info={"capacity": True}) for i in idxs if template.exceeds_capacity(i)}
    idxs = [i for i in idxs if i not in out]
    workers = min(worker_count(workers), max(1, len(idxs)))
    if workers == 1:
        out.update(zip(idxs, solver.sweep(template, idxs)))
        return out
    chunks = [list(c) for c in np.array_split(np.asarray(idxs), workers) if len(c)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: solver.sweep(template, [int(i) for i in c]), chunks))
    for chunk, res in zip(chunks, parts):
        out.update(zip((int(i) for i in chunk), res))
    return out


def _extreme(outcomes: dict, template: LpTemplate, pick):
    failed = [i for i, o in outcomes.items() if o.status == FAILURE]
    if failed:
        raise LpSolveError(f"{template.task} program failed at G={template.g}", failed)
    ok = {i: o.value for i, o in outcomes.items() if o.status == OPTIMAL}
    if not ok:
        rows = next((o.info.get("infeasible_rows") for o in outcomes.values() if o.info.get("infeasible_rows")), None)
        raise InconsistentSampleError(template.g, template.task, rows)
    best = pick(ok, key=ok.get)
    return best, ok[best], len(outcomes) - len(ok)


def _lp_bound(kind, g, mesh, enc, params, solver, target, delta_eps, idxs, workers):
    method = "lp_lb" if kind == "lower" else "lp_ub"
    bkind = "lower" if kind == "lower" else "upper"
    if target not in ("distribution_lambda", "sample_lambda"):
        raise ValueError(f"unknown target {target!r}")
    eps, d_eps = 0.0, 0.0
    if target == "sample_lambda":
        if delta_eps is None:
            raise ValueError("target=sample_lambda needs delta_eps")
        eps, d_eps = mcdiarmid_epsilon(enc.n, delta_eps), float(delta_eps)
    shift = -eps if kind == "lower" else eps
    if g == 0:
        return BoundPoint.make(0, shift, bkind, method, params.delta + d_eps, target, idx=None)
    template = LpTemplate(kind, g, mesh, enc, params)
    outcomes = sweep_template(template, solver, idxs, workers)
    idx, value, skipped = _extreme(outcomes, template, min if kind == "lower" else max)
    return BoundPoint.make(
        g, value + shift, bkind, method, params.delta + d_eps, target,
        idx=int(idx), lp_value=float(value), skipped_infeasible=int(skipped), q=mesh.q, l=mesh.l,
        epsilon=eps, delta_bands=params.delta, delta_eps=d_eps,
    )


def lp_lower_bound(g, mesh: Mesh, enc: FrequencyEncoding, params: LpParams, solver=None,
                   target="distribution_lambda", delta_eps=None, idxs=None, workers=None) -> BoundPoint:
    """Smallest optimum of the lower-bound program over all ``idx``; infeasible instances are skipped."""
    return _lp_bound("lower", g, mesh, enc, params, solver, target, delta_eps, idxs, workers)


def lp_upper_bound(g, mesh: Mesh, enc: FrequencyEncoding, params: LpParams, solver=None,
                   target="distribution_lambda", delta_eps=None, idxs=None, workers=None) -> BoundPoint:
    """Largest optimum of the upper-bound program over all ``idx``."""
    return _lp_bound("upper", g, mesh, enc, params, solver, target, delta_eps, idxs, workers)


def lp1_bound(g, b, mesh, enc, params, solver=None, with_tail=False, idxs=None, workers=None):
    """Bound from the mesh-consistent programs, valid when every probability lies on the mesh.

    Returns ``(value, idx)``; ``b=1`` gives the lower bound, ``b=-1`` the
    upper bound.  ``with_tail`` selects the variant with tail mass ``p``.
    """
    if g == 0:
        return 0.0, None
    template = LpTemplate("lp1a" if with_tail else "lp1", g, mesh, enc, params, b)
    outcomes = sweep_template(template, solver, idxs, workers)
    idx, value, _ = _extreme(outcomes, template, min)
    return abs(value), int(idx)


@dataclass
class IidVerdict:
    consistent: bool
    report: dict = field(default_factory=dict)

    def __bool__(self):
        return self.consistent


def check_iid_consistency(enc: FrequencyEncoding, mesh: Mesh, params: LpParams, solver=None) -> IidVerdict:
    """Feasibility of the Good-Turing and mass constraints of both final programs.

    An IID sample satisfies them with probability at least ``1 - params.delta``
    for each program.  Infeasibility is only declared after the solver's
    retry at a looser tolerance also fails.
    """
    if enc.n < 1:
        raise ValueError("empty sample")
    solver = default_solver() if solver is None else solver
    report = {"n": enc.n, "q": mesh.q, "l": mesh.l, "delta": params.delta, "programs": {}}
    consistent = True
    for task in ("lower", "upper"):
        problem = LpTemplate(task, 0, mesh, enc, params).feasibility_problem()
        out = solver.solve(problem)
        if out.status == FAILURE:
            raise LpSolveError(f"feasibility solve of the {task} program failed", [])
        entry = {"status": out.status}
        if out.status == INFEASIBLE:
            consistent = False
            if out.info.get("infeasible_rows"):
                entry["infeasible_rows"] = out.info["infeasible_rows"]
        report["programs"][task] = entry
    return IidVerdict(consistent, report)
