"""Solver back ends behind a small contract.

A solver turns an :class:`LpProblem` into an :class:`LpOutcome` whose status
is ``optimal``, ``infeasible`` or ``numerical_failure``.  Both back ends
wrap HiGHS: :class:`HighsSolver` talks to it directly and can warm-start a
whole ``idx`` sweep, :class:`ScipySolver` goes through ``scipy.optimize``
and serves as an independent cross-check.

Infeasibility is only reported after a second attempt at a looser primal
feasibility tolerance, so rounding noise cannot masquerade as evidence
against the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .programs import LpProblem, LpTemplate

__all__ = ["LpOutcome", "HighsSolver", "ScipySolver", "default_solver"]

OPTIMAL, INFEASIBLE, FAILURE = "optimal", "infeasible", "numerical_failure"


@dataclass
class LpOutcome:
    status: str
    value: float | None = None
    solution: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class HighsSolver:
    """HiGHS dual simplex via ``highspy``.

    ``primal_tol`` bounds row residuals of the scaled rows; the retry uses
    ``retry_tol``.  The dual tolerance is tight because mesh objective
    coefficients go down to ``1e-4 / N``.
    """

    name = "highs"

    def __init__(self, primal_tol: float = 1e-9, retry_tol: float = 1e-8, dual_tol: float = 1e-10,
                 time_limit: float | None = None):
        import highspy  # noqa: F401  (fail early when the back end is missing)

        self.primal_tol = primal_tol
        self.retry_tol = retry_tol
        self.dual_tol = dual_tol
        self.time_limit = time_limit

    def _new(self):
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", self.primal_tol)
        h.setOptionValue("dual_feasibility_tolerance", self.dual_tol)
        h.setOptionValue("threads", 1)
        if self.time_limit is not None:
            h.setOptionValue("time_limit", float(self.time_limit))
        return h

    @staticmethod
    def _pass(h, problem: LpProblem):
        import highspy
        from scipy import sparse

        A, lo, hi, cost, col_lo, col_hi = problem.solver_form()
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_ = problem.num_cols
        lp.num_row_ = problem.num_rows
        lp.col_cost_ = cost
        lp.col_lower_ = col_lo
        lp.col_upper_ = np.where(np.isfinite(col_hi), col_hi, inf)
        lp.row_lower_ = np.where(np.isfinite(lo), lo, -inf)
        lp.row_upper_ = np.where(np.isfinite(hi), hi, inf)
        lp.sense_ = highspy.ObjSense.kMaximize if problem.sense == "max" else highspy.ObjSense.kMinimize
        csc = sparse.csc_matrix(A)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        h.passModel(lp)

    # fallback ladder after a non-optimal warm solve: fresh primal simplex, then interior point
    # "count_form" solves with the raw count columns instead of block masses
    FALLBACKS = (
        {"simplex_scale_strategy": 0},
        {"count_form": True},
        {"presolve": "off", "simplex_strategy": 4},
        {"dual_feasibility_tolerance": 1e-7},
        {"solver": "ipm", "run_crossover": "on"},
    )

    def _run(self, h, problem: LpProblem, build=None) -> LpOutcome:
        """Solve; anything but optimality is re-examined at the looser tolerance.

        A proven infeasibility is re-checked in place.  Undecided solves are
        retried on fresh models so the warm basis of ``h`` survives for the
        next instance of a sweep.  An instance counts as infeasible
        only when a retry proves it; a retry that cannot decide leaves a
        ``numerical_failure``.  ``build`` rebuilds the instance that ``h``
        holds when ``problem`` is only a stand-in with the same row names.
        """
        first = self._attempt(h, problem, self.primal_tol)
        if first.status == OPTIMAL:
            return first
        if first.status == INFEASIBLE:
            # a proven infeasibility only needs re-checking at the looser tolerance
            h.setOptionValue("primal_feasibility_tolerance", self.retry_tol)
            out = self._attempt(h, problem, self.retry_tol)
            h.setOptionValue("primal_feasibility_tolerance", self.primal_tol)
            out.info["retried"] = True
            out.info["first_status"] = first.info.get("highs_status")
            if out.status != FAILURE:
                return out
        if build is not None:
            problem = build()
        for opts in self.FALLBACKS:
            fresh = self._new()
            fresh.setOptionValue("primal_feasibility_tolerance", self.retry_tol)
            form = problem
            for k, v in opts.items():
                if k == "count_form":
                    form = replace(problem, col_scale=np.ones(problem.num_cols))
                else:
                    fresh.setOptionValue(k, v)
            self._pass(fresh, form)
            out = self._attempt(fresh, form, self.retry_tol)
            if out.status == OPTIMAL and "dual_feasibility_tolerance" in opts:
                # polish from the loose optimum so the reported value is not short of the true optimum
                fresh.setOptionValue("dual_feasibility_tolerance", self.dual_tol)
                polished = self._attempt(fresh, form, self.retry_tol)
                out = polished if polished.status == OPTIMAL else out
                out.info["polished"] = polished.status == OPTIMAL
            out.info["fallback"] = opts
            if out.status != FAILURE:
                break
        out.info["retried"] = True
        out.info["first_status"] = first.info.get("highs_status")
        return out

    def _attempt(self, h, problem, tol) -> LpOutcome:
        import highspy

        MS = highspy.HighsModelStatus
        try:
            h.run()
        except Exception as exc:  # pragma: no cover - defensive, highspy raises rarely
            return LpOutcome(FAILURE, info={"error": str(exc), "tol": tol})
        st = h.getModelStatus()
        info = {"tol": tol, "iterations": int(h.getInfo().simplex_iteration_count), "highs_status": str(st)}
        if st == MS.kOptimal:
            sol = np.array(h.getSolution().col_value, dtype=float) * problem.col_scale
            return LpOutcome(OPTIMAL, float(h.getInfo().objective_function_value), sol, info)
        if st in (MS.kInfeasible, MS.kUnboundedOrInfeasible):
            rows = self._certificate_rows(h, problem)
            if rows is not None:
                info["infeasible_rows"] = rows
            return LpOutcome(INFEASIBLE, info=info)
        return LpOutcome(FAILURE, info=info)

    @staticmethod
    def _certificate_rows(h, problem):
        try:
            res = h.getDualRay()
        except Exception:  # pragma: no cover - depends on highspy build
            return None
        # (has_ray, ray) in older highspy, (status, has_ray, ray) in newer ones
        has_ray, ray = res[-2], res[-1]
        if not has_ray:
            return None
        ray = np.asarray(ray, dtype=float)
        if ray.size != problem.num_rows:
            return None
        top = float(np.max(np.abs(ray), initial=0.0))
        if top == 0.0:
            return None
        return [problem.row_names[k] for k in np.nonzero(np.abs(ray) > 1e-9 * top)[0]]

    def solve(self, problem: LpProblem) -> LpOutcome:
        h = self._new()
        self._pass(h, problem)
        out = self._run(h, problem)
        if out.status == INFEASIBLE and "infeasible_rows" not in out.info:
            # presolve proves infeasibility without a dual ray; one more pass without it names the rows
            fresh = self._new()
            fresh.setOptionValue("presolve", "off")
            fresh.setOptionValue("primal_feasibility_tolerance", self.retry_tol)
            self._pass(fresh, problem)
            again = self._attempt(fresh, problem, self.retry_tol)
            if again.status == INFEASIBLE and "infeasible_rows" in again.info:
                out.info["infeasible_rows"] = again.info["infeasible_rows"]
        return out

    def sweep(self, template: LpTemplate, idxs) -> list:
        """Solve ``template.problem(idx)`` for every ``idx``, warm-starting from the previous basis."""
        idxs = list(idxs)
        if not idxs:
            return []
        import highspy

        inf = highspy.kHighsInf
        first = template.problem(idxs[0])
        scale = first.row_scale.copy()
        cs = first.col_scale
        last = first.num_rows - 1
        h = self._new()
        self._pass(h, first)
        outcomes = [self._run(h, first)]
        prev = idxs[0]
        for idx in idxs[1:]:
            coeffs, costs, link_hi = template.transition(prev, idx)
            scale[last] = template.link_scale(idx)
            for row, col, val in coeffs:
                r = last if row == -1 else row
                h.changeCoeff(r, col, val * scale[r] * cs[col])
            for col, val in costs:
                h.changeColCost(col, val * cs[col])
            h.changeRowBounds(last, -inf, link_hi * scale[last])
            outcomes.append(self._run(h, first, build=lambda i=idx: template.problem(i)))
            prev = idx
        return outcomes


class ScipySolver:
    """``scipy.optimize.linprog`` with the HiGHS dual simplex, one fresh solve per problem."""

    name = "scipy"

    def __init__(self, primal_tol: float = 1e-9, retry_tol: float = 1e-8, dual_tol: float = 1e-10):
        self.primal_tol = primal_tol
        self.retry_tol = retry_tol
        self.dual_tol = dual_tol

    def _attempt(self, problem, tol, method="highs-ds"):
        from scipy.optimize import linprog

        A, lo, hi, cost, col_lo, col_hi = problem.solver_form()
        eq = lo == hi
        ub_rows, ub_rhs = [], []
        for k in np.nonzero(~eq)[0]:
            if np.isfinite(hi[k]):
                ub_rows.append(A[k])
                ub_rhs.append(hi[k])
            if np.isfinite(lo[k]):
                ub_rows.append(-A[k])
                ub_rhs.append(-lo[k])
        sign = -1.0 if problem.sense == "max" else 1.0
        bounds = [(l_, None if not math.isfinite(u_) else u_) for l_, u_ in zip(col_lo, col_hi)]
        res = linprog(
            sign * cost,
            A_ub=np.array(ub_rows) if ub_rows else None,
            b_ub=np.array(ub_rhs) if ub_rows else None,
            A_eq=A[eq] if eq.any() else None,
            b_eq=lo[eq] if eq.any() else None,
            bounds=bounds,
            method=method,
            options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": self.dual_tol},
        )
        info = {"tol": tol, "method": method, "message": res.message}
        if res.status == 0:
            return LpOutcome(OPTIMAL, sign * float(res.fun), np.asarray(res.x, dtype=float) * problem.col_scale, info)
        if res.status == 2:
            return LpOutcome(INFEASIBLE, info=info)
        return LpOutcome(FAILURE, info=info)

    def solve(self, problem: LpProblem) -> LpOutcome:
        out = self._attempt(problem, self.primal_tol)
        if out.status == OPTIMAL:
            return out
        counts = replace(problem, col_scale=np.ones(problem.num_cols))
        for form, method in ((problem, "highs-ds"), (counts, "highs-ds"), (problem, "highs-ipm")):
            out = self._attempt(form, self.retry_tol, method)
            out.info["retried"] = True
            if out.status != FAILURE:
                break
        return out

    def sweep(self, template: LpTemplate, idxs) -> list:
        return [self.solve(template.problem(idx)) for idx in idxs]


def default_solver(primal_tol: float = 1e-9) -> HighsSolver:
    return HighsSolver(primal_tol=primal_tol, retry_tol=10 * primal_tol)
