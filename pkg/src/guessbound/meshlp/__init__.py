"""Histogram-recovery linear programs over a geometric probability mesh."""

from .numerics import LpParams, Mesh, bpdf, build_mesh, derive_eps3, eps2_from_delta, log_bpdf
from .programs import (
    LpProblem,
    LpTemplate,
    build_lp1,
    build_lp1a,
    build_lp_lower,
    build_lp_upper,
    write_lp,
)
from .solvers import HighsSolver, LpOutcome, ScipySolver, default_solver
from .sweep import (
    IidVerdict,
    InconsistentSampleError,
    LpSolveError,
    check_iid_consistency,
    lp1_bound,
    lp_lower_bound,
    lp_upper_bound,
    sweep_template,
    worker_count,
)

__all__ = [
    "LpParams",
    "Mesh",
    "bpdf",
    "build_mesh",
    "derive_eps3",
    "eps2_from_delta",
    "log_bpdf",
    "LpProblem",
    "LpTemplate",
    "build_lp1",
    "build_lp1a",
    "build_lp_lower",
    "build_lp_upper",
    "write_lp",
    "HighsSolver",
    "LpOutcome",
    "ScipySolver",
    "default_solver",
    "IidVerdict",
    "InconsistentSampleError",
    "LpSolveError",
    "check_iid_consistency",
    "lp1_bound",
    "lp_lower_bound",
    "lp_upper_bound",
    "sweep_template",
    "worker_count",
]
