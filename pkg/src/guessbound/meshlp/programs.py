"""Linear programs over a probability mesh.

Four programs share one layout.  Columns are ``h_1..h_l`` (number of
passwords at each mesh value), then ``c`` (guesses spent inside block
``idx``), then ``p`` (mass below the mesh floor) except in the plain
mesh-consistent program, which has no ``p``.  Rows are

* ``guesses``: ``sum_{j<idx} h_j + c = G``;
* two Good-Turing rows per ``i <= i_max`` (a single ranged row in the plain
  program), tying ``sum_j h_j x_j bpdf(i, N, x_j)`` to
  ``(i+1) F_{i+1} / (N-i)``;
* the mass row(s) on ``sum_j h_j x_j``;
* ``link``: ``c - h_idx <= 0`` (``c <= G`` when ``idx = l + 1``).

Rows are stored unscaled.  ``row_scale`` holds the factor the solvers apply
(``N/(i+1)`` on the Good-Turing rows, ``1/G`` on the guess row, ``x_idx`` on
the link row) so that residuals and certificates map back to the rows
written here.  ``col_scale`` makes the solver work with the mass
``h_j x_j`` of each block instead of the count ``h_j``, which ranges up to
``1/x_l``; without it reduced-cost round-off is multiplied by counts of
order ``1e4 N`` and warm-started optima drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..corpus import FrequencyEncoding
from .numerics import LpParams, Mesh, bpdf

__all__ = [
    "TASKS",
    "LpProblem",
    "LpTemplate",
    "build_lp1",
    "build_lp1a",
    "build_lp_lower",
    "build_lp_upper",
    "write_lp",
]

TASKS = ("lp1", "lp1a", "lower", "upper")
INF = math.inf


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Boxed-row linear program ``opt c.x  s.t.  row_lo <= A x <= row_hi, col_lo <= x <= col_hi``."""

    objective: np.ndarray
    sense: str
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    col_names: tuple
    row_names: tuple
    row_scale: np.ndarray
    meta: dict = field(default_factory=dict)
    col_scale: np.ndarray | None = None

    def __post_init__(self):
        m, n = self.A.shape
        if self.objective.shape != (n,) or len(self.col_names) != n:
            raise ValueError("objective/column dimensions do not match A")
        if self.col_lo.shape != (n,) or self.col_hi.shape != (n,):
            raise ValueError("column bounds do not match A")
        if self.row_lo.shape != (m,) or self.row_hi.shape != (m,) or len(self.row_names) != m:
            raise ValueError("row bounds do not match A")
        if self.row_scale.shape != (m,):
            raise ValueError("row_scale does not match A")
        if self.col_scale is None:
            object.__setattr__(self, "col_scale", np.ones(n))
        if self.col_scale.shape != (n,) or np.any(self.col_scale <= 0):
            raise ValueError("col_scale must be positive with one entry per column")
        if np.any(self.row_lo > self.row_hi):
            bad = [self.row_names[k] for k in np.nonzero(self.row_lo > self.row_hi)[0]]
            raise ValueError(f"row lower bound exceeds upper bound: {bad}")
        if np.any(self.col_lo > self.col_hi):
            raise ValueError("column lower bound exceeds upper bound")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_cols(self) -> int:
        return self.A.shape[1]

    def scaled(self):
        """Row matrix and row bounds after applying ``row_scale``."""
        s = self.row_scale
        return self.A * s[:, None], self.row_lo * s, self.row_hi * s

    def solver_form(self):
        """Fully scaled model ``(A, row_lo, row_hi, cost, col_lo, col_hi)`` in ``y = x / col_scale``."""
        A, lo, hi = self.scaled()
        cs = self.col_scale
        return A * cs[None, :], lo, hi, self.objective * cs, self.col_lo / cs, self.col_hi / cs

    def violation(self, x, scaled: bool = True) -> float:
        """Largest bound violation of ``x`` over rows and columns."""
        x = np.asarray(x, dtype=float)
        if scaled:
            A, lo, hi = self.scaled()
        else:
            A, lo, hi = self.A, self.row_lo, self.row_hi
        ax = A @ x
        worst = max(
            float(np.max(lo - ax, initial=0.0)),
            float(np.max(ax - hi, initial=0.0)),
            float(np.max(self.col_lo - x, initial=0.0)),
            float(np.max(x - self.col_hi, initial=0.0)),
        )
        return worst

    def objective_value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))


class LpTemplate:
    """All instances of one program for fixed ``(G, mesh, F, params)``, indexed by ``idx``.

    Only the guess row, the link row, the objective and the bound on ``c``
    change with ``idx``; solvers use :meth:`transition` to update a warm
    model in place.
    """

    def __init__(self, task: str, g: int, mesh: Mesh, enc: FrequencyEncoding, params: LpParams, b: int = 1):
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}")
        if b not in (1, -1):
            raise ValueError("b must be +1 or -1")
        if task in ("lower", "upper") and not params.has_rounding:
            raise ValueError("the final programs need LpParams with xhat3/eps3")
        if task in ("lower", "upper") and params.q is not None and not math.isclose(params.q, mesh.q):
            raise ValueError(f"LpParams were derived for q={params.q} but the mesh uses q={mesh.q}")
        if g < 0:
            raise ValueError("G must be non-negative")
        if enc.n != params.n:
            raise ValueError(f"LpParams were derived for n={params.n} but the sample has n={enc.n}")
        self.task = task
        self.g = int(g)
        self.mesh = mesh
        self.enc = enc
        self.params = params
        self.b = b if task in ("lp1", "lp1a") else (1 if task == "lower" else -1)
        self.l = mesh.l
        self.has_p = task != "lp1"
        self.c_col = self.l
        self.p_col = self.l + 1 if self.has_p else None
        self.num_cols = self.l + (2 if self.has_p else 1)
        self._build_static_rows()

    @property
    def idx_range(self) -> range:
        """Admissible ``idx`` values (1-based)."""
        return range(1, self.l + 1) if self.task == "lp1" else range(1, self.l + 2)

    @property
    def sense(self) -> str:
        return "max" if self.task == "upper" else "min"

    @cached_property
    def col_names(self) -> tuple:
        names = [f"h{j}" for j in range(1, self.l + 1)] + ["c"]
        if self.has_p:
            names.append("p")
        return tuple(names)

    def _row(self, h_coef, p_coef=0.0):
        r = np.zeros(self.num_cols)
        r[: self.l] = h_coef
        if p_coef:
            r[self.p_col] = p_coef
        return r

    def _build_static_rows(self):
        n, x, q = self.enc.n, self.mesh.values, self.mesh.q
        x_l = self.mesh.x_l
        P = self.params
        rows, lo, hi, names, scale = [], [], [], [], []

        def add(name, coef, rlo, rhi, s):
            rows.append(coef)
            lo.append(rlo)
            hi.append(rhi)
            names.append(name)
            scale.append(s)

        for i in range(P.i_max + 1):
            a = (i + 1) * self.enc[i + 1] / (n - i)
            u = (i + 1) / (n - i)
            e2 = P.eps2[i]
            S = x * bpdf(i, n, x)
            s = n / (i + 1)
            if self.task == "lp1":
                add(f"gt{i}", self._row(S), a - e2 - u, a + e2, s)
            elif self.task == "lp1a":
                b_l = bpdf(i, n, x_l)
                add(f"gt{i}_lo", self._row(S, 1.0 if i == 0 else b_l), a - e2 - u, INF, s)
                add(f"gt{i}_hi", self._row(S, b_l if i == 0 else 0.0), -INF, a + e2, s)
            elif self.task == "lower":
                e3, xh = P.eps3[i], P.xhat3[i]
                b_ql = bpdf(i, n, q * x_l)
                qi = q ** -(i + 1)
                p_lo = qi * (1.0 if i == 0 else b_ql)
                add(f"gt{i}_lo", self._row(S, p_lo), qi * (a - e2 - u), INF, s)
                p_hi = (1 + e3) * b_ql if i == 0 else 0.0
                add(f"gt{i}_hi", self._row(S, p_hi), -INF, (1 + e3) * (a + e2) + bpdf(i, n, xh), s)
            else:
                e3, xh = P.eps3[i], P.xhat3[i]
                b_l = bpdf(i, n, x_l)
                p_lo = (1.0 if i == 0 else b_l) / (1 + e3)
                add(f"gt{i}_lo", self._row(S, p_lo), (a - e2 - u - bpdf(i, n, q * xh)) / (1 + e3), INF, s)
                qi = q ** (i + 1)
                p_hi = qi * b_l if i == 0 else 0.0
                add(f"gt{i}_hi", self._row(S, p_hi), -INF, qi * (a + e2), s)

        if self.task == "lp1":
            add("mass", self._row(x), 1.0, 1.0, 1.0)
        elif self.task == "lp1a":
            add("mass", self._row(x, 1.0), 1.0, 1.0, 1.0)
        elif self.task == "lower":
            add("mass_lo", self._row(x, 1.0 / q), 1.0 / q, INF, 1.0)
            add("mass_hi", self._row(x, 1.0), -INF, 1.0, 1.0)
        else:
            add("mass_lo", self._row(x, 1.0), 1.0, INF, 1.0)
            add("mass_hi", self._row(x, q), -INF, q, 1.0)

        self.static_A = np.array(rows)
        self.static_lo = np.array(lo, dtype=float)
        self.static_hi = np.array(hi, dtype=float)
        self.static_names = tuple(names)
        self.static_scale = np.array(scale, dtype=float)

    @property
    def mass_cap(self) -> float:
        """Largest total mesh mass ``sum_j h_j x_j`` the mass rows allow."""
        return self.mesh.q if self.task == "upper" else 1.0

    def exceeds_capacity(self, idx: int) -> bool:
        """True when instance ``idx`` is infeasible on mass grounds alone.

        The ``G`` guesses of instance ``idx <= l`` all sit at mesh values
        ``>= x_idx``, so they carry mass at least ``G x_idx``; that cannot
        exceed the mass the program allows.
        """
        return idx <= self.l and self.g * self.mesh.values[idx - 1] > self.mass_cap * (1 + 1e-9)

    # idx-dependent pieces
    def x_idx(self, idx: int) -> float:
        if not (1 <= idx <= self.l + 1) or (idx == self.l + 1 and self.task == "lp1"):
            raise ValueError(f"idx={idx} outside {self.idx_range}")
        if idx <= self.l:
            return float(self.mesh.values[idx - 1])
        # beyond the mesh: the unguessed block counts as 0 for lower bounds, x_l for upper bounds
        return 0.0 if self.b == 1 else self.mesh.x_l

    def guess_row(self, idx: int) -> np.ndarray:
        r = np.zeros(self.num_cols)
        r[: idx - 1] = 1.0
        r[self.c_col] = 1.0
        return r

    def link_row(self, idx: int):
        r = np.zeros(self.num_cols)
        r[self.c_col] = 1.0
        if idx <= self.l:
            r[idx - 1] = -1.0
            return r, 0.0
        return r, float(self.g)

    def objective(self, idx: int) -> np.ndarray:
        c = np.zeros(self.num_cols)
        c[: idx - 1] = self.mesh.values[: idx - 1]
        c[self.c_col] = self.x_idx(idx)
        return c * self.b if self.task in ("lp1", "lp1a") else c

    @cached_property
    def col_scale(self) -> np.ndarray:
        cs = np.ones(self.num_cols)
        cs[: self.l] = 1.0 / self.mesh.values
        cs[self.c_col] = max(self.g, 1)
        return cs

    def link_scale(self, idx: int) -> float:
        return float(self.mesh.values[idx - 1]) if idx <= self.l else 1.0 / max(self.g, 1)

    def col_bounds(self):
        lo = np.zeros(self.num_cols)
        hi = np.full(self.num_cols, INF)
        if self.has_p:
            hi[self.p_col] = 1.0
        return lo, hi

    def problem(self, idx: int) -> LpProblem:
        obj = self.objective(idx)
        link, link_hi = self.link_row(idx)
        A = np.vstack([self.guess_row(idx), self.static_A, link])
        row_lo = np.concatenate([[self.g], self.static_lo, [-INF]])
        row_hi = np.concatenate([[self.g], self.static_hi, [link_hi]])
        scale = np.concatenate([[1.0 / max(self.g, 1)], self.static_scale, [self.link_scale(idx)]])
        col_lo, col_hi = self.col_bounds()
        return LpProblem(
            objective=obj,
            sense=self.sense,
            A=A,
            row_lo=row_lo,
            row_hi=row_hi,
            col_lo=col_lo,
            col_hi=col_hi,
            col_names=self.col_names,
            row_names=("guesses",) + self.static_names + ("link",),
            row_scale=scale,
            meta={"g": self.g, "idx": idx, "task": self.task, "b": self.b},
            col_scale=self.col_scale,
        )

    def feasibility_problem(self) -> LpProblem:
        """Only the Good-Turing and mass rows, with a zero objective."""
        col_lo, col_hi = self.col_bounds()
        return LpProblem(
            objective=np.zeros(self.num_cols),
            sense="min",
            A=self.static_A.copy(),
            row_lo=self.static_lo.copy(),
            row_hi=self.static_hi.copy(),
            col_lo=col_lo,
            col_hi=col_hi,
            col_names=self.col_names,
            row_names=self.static_names,
            row_scale=self.static_scale.copy(),
            meta={"g": None, "idx": None, "task": self.task, "b": self.b},
            col_scale=self.col_scale,
        )

    def transition(self, old: int, new: int):
        """Entries that change when moving from instance ``old`` to ``new``.

        Returns ``(coeffs, costs, link_hi)`` in unscaled terms: ``coeffs``
        lists ``(row, col, value)`` with row 0 the guess row and row -1 the
        link row (whose nonzeros are always all listed, since its scale
        moves with ``idx``), ``costs`` lists ``(col, value)`` and
        ``link_hi`` is the new upper bound of the link row.
        """
        coeffs, costs = [], []
        lo, hi = sorted((old, new))
        vals = self.mesh.values
        sign = self.b if self.task in ("lp1", "lp1a") else 1
        for j in range(lo - 1, hi - 1):
            on = j < new - 1
            coeffs.append((0, j, 1.0 if on else 0.0))
            costs.append((j, sign * vals[j] if on else 0.0))
        if old <= self.l:
            coeffs.append((-1, old - 1, 0.0))
        if new <= self.l:
            coeffs.append((-1, new - 1, -1.0))
        coeffs.append((-1, self.c_col, 1.0))
        costs.append((self.c_col, sign * self.x_idx(new)))
        return coeffs, costs, self.link_row(new)[1]


def build_lp1(g, b, mesh, enc, idx, params) -> LpProblem:
    """Mesh-consistent program without tail mass; ``b=1`` for lower bounds, ``b=-1`` for upper."""
    return LpTemplate("lp1", g, mesh, enc, params, b).problem(idx)


def build_lp1a(g, b, mesh, enc, idx, params) -> LpProblem:
    """Mesh-consistent program with tail mass ``p`` below the mesh floor."""
    return LpTemplate("lp1a", g, mesh, enc, params, b).problem(idx)


def build_lp_lower(g, mesh, enc, idx, params) -> LpProblem:
    """Final lower-bound program for arbitrary distributions (rounding down to the mesh)."""
    return LpTemplate("lower", g, mesh, enc, params).problem(idx)


def build_lp_upper(g, mesh, enc, idx, params) -> LpProblem:
    """Final upper-bound program for arbitrary distributions (rounding up to the mesh)."""
    return LpTemplate("upper", g, mesh, enc, params).problem(idx)


def _fmt(v: float) -> str:
    return repr(float(v))


def _expr(coefs, names, width=8):
    terms = [f"{'-' if v < 0 else '+'} {_fmt(abs(v))} {names[k]}" for k, v in enumerate(coefs) if v != 0.0]
    if not terms:
        return "0 " + names[0]
    first = terms[0][2:] if terms[0].startswith("+") else "-" + terms[0][2:]
    lines, cur = [], [first]
    for t in terms[1:]:
        if len(cur) >= width:
            lines.append(" ".join(cur))
            cur = []
        cur.append(t)
    lines.append(" ".join(cur))
    return "\n   ".join(lines)


def write_lp(problem: LpProblem, fh) -> None:
    """Write ``problem`` in CPLEX LP text format (ranged rows become ``_lo``/``_hi`` pairs)."""
    names = problem.col_names
    meta = " ".join(f"{k}={v}" for k, v in problem.meta.items())
    fh.write(f"\\ {meta}\n")
    fh.write("Minimize\n" if problem.sense == "min" else "Maximize\n")
    fh.write(f" obj: {_expr(problem.objective, names)}\n")
    fh.write("Subject To\n")
    for name, coefs, lo, hi in zip(problem.row_names, problem.A, problem.row_lo, problem.row_hi):
        e = _expr(coefs, names)
        if lo == hi:
            fh.write(f" {name}: {e} = {_fmt(lo)}\n")
            continue
        if np.isfinite(lo) and np.isfinite(hi):
            fh.write(f" {name}_lo: {e} >= {_fmt(lo)}\n")
            fh.write(f" {name}_hi: {e} <= {_fmt(hi)}\n")
        elif np.isfinite(lo):
            fh.write(f" {name}: {e} >= {_fmt(lo)}\n")
        elif np.isfinite(hi):
            fh.write(f" {name}: {e} <= {_fmt(hi)}\n")
    fh.write("Bounds\n")
    for name, lo, hi in zip(names, problem.col_lo, problem.col_hi):
        if np.isfinite(hi):
            fh.write(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}\n")
        elif lo != 0.0:
            fh.write(f" {name} >= {_fmt(lo)}\n")
    fh.write("End\n")
