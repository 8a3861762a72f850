"""Command-line interface.

Subcommands::

    guessbound analyze        bounds on a corpus over a G grid
    guessbound simulate       coverage run on a synthetic distribution
    guessbound check-iid      LP feasibility verdict on a corpus
    guessbound compare-model  model curve against the sampling bounds

Exit codes: 0 success, 1 error, 2 negative verdict (sample inconsistent with
IID sampling, or a failed coverage check under ``--strict``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import bounds as B
from .bounds import BoundPoint, GuessingCurve, load_guess_list
from .corpus import CorpusFormatError, FORMATS, SampleCorpus, frequency_encoding, load_corpus, partition
from .meshlp import (
    HighsSolver,
    InconsistentSampleError,
    LpSolveError,
    LpTemplate,
    check_iid_consistency,
    lp_lower_bound,
    lp_upper_bound,
    worker_count,
    write_lp,
)
from .schedule import Schedule, derive_schedule

__all__ = [
    "CSV_HEADER",
    "ANALYZE_METHODS",
    "default_g_grid",
    "parse_g_grid",
    "best_envelope",
    "analyze_curves",
    "write_curves_csv",
    "read_curves_csv",
    "curves_to_json",
    "read_curves_json",
    "main",
]

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2

CSV_HEADER = ("g", "value", "raw_value", "kind", "method", "delta", "target")
ANALYZE_METHODS = ("frequency_ub", "sampling_lb", "prior_lb", "extended_lb", "lp_lb", "lp_ub", "best")
DEFAULT_METHODS = ("frequency_ub", "sampling_lb", "prior_lb", "lp_lb", "lp_ub", "best")
UPPER_METHODS = ("frequency_ub", "lp_ub")
LOWER_METHODS = ("sampling_lb", "lp_lb", "extended_lb", "prior_lb")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- G grids


def default_g_grid(distinct: int, n: int) -> list:
    """Powers of two up to ``2 * distinct``, then doubling on to ``1e4 * n``."""
    top = max(2 * int(distinct), 1)
    grid = [1]
    while grid[-1] * 2 <= top:
        grid.append(grid[-1] * 2)
    stop = 10_000 * int(n)
    while grid[-1] * 2 <= stop:
        grid.append(grid[-1] * 2)
    return grid


def parse_g_grid(spec: str) -> list:
    """Parse ``"1,10,1e3"``; the grid must be strictly increasing non-negative integers."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            v = float(part)
        except ValueError:
            raise UsageError(f"bad G value {part!r}") from None
        if not v.is_integer() or v < 0:
            raise UsageError(f"G values must be non-negative integers, got {part!r}")
        out.append(int(v))
    if not out:
        raise UsageError("empty G grid")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise UsageError("G grid must be strictly increasing")
    return out


def _prior_L(g: int, n: int) -> float:
    """Largest ``L`` with ``ceil(n L) == g``, so the prior point lands on the grid."""
    L = g / n
    while math.ceil(n * L) > g:
        L = math.nextafter(L, 0.0)
    while math.ceil(n * L) < g:
        L = math.nextafter(L, math.inf)
    return L


# ---------------------------------------------------------------- curve IO


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curves_csv(curves, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in curves:
        for p in c:
            w.writerow([p.g, _fmt(p.value), _fmt(p.raw_value), p.kind, p.method, _fmt(p.delta), p.target])


def _group(points) -> list:
    groups = {}
    for p in points:
        groups.setdefault((p.method, p.kind, p.target), []).append(p)
    return [GuessingCurve(tuple(v)) for v in groups.values()]


def read_curves_csv(fh) -> list:
    """Inverse of :func:`write_curves_csv`; curves keep their order of first appearance."""
    r = csv.reader(fh)
    header = next(r, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"expected CSV header {','.join(CSV_HEADER)}")
    points = []
    for row in r:
        if not row:
            continue
        g, value, raw, kind, method, delta, target = row
        points.append(BoundPoint(int(g), float(value), kind, method, float(delta), target, float(raw)))
    return _group(points)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, bytes):
        return v.decode("utf-8", "replace")
    return v


def curves_to_json(curves, meta=None) -> str:
    doc = {
        "meta": _jsonable(meta or {}),
        "curves": [
            {
                "method": c.method,
                "kind": c.kind,
                "provenance": _jsonable(c.provenance),
                "points": [
                    {f: getattr(p, f) for f in CSV_HEADER} | {"provenance": _jsonable(p.provenance)} for p in c
                ],
            }
            for c in curves
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def read_curves_json(text: str) -> list:
    doc = json.loads(text)
    curves = []
    for c in doc["curves"]:
        pts = tuple(
            BoundPoint(p["g"], p["value"], p["kind"], p["method"], p["delta"], p["target"], p["raw_value"],
                       p.get("provenance", {}))
            for p in c["points"]
        )
        curves.append(GuessingCurve(pts, c.get("provenance", {})))
    return curves


def _emit(curves, out, fmt, meta):
    text = curves_to_json(curves, meta) + "\n" if fmt == "json" else None
    if text is None:
        buf = io.StringIO()
        write_curves_csv(curves, buf)
        text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- analysis


def best_envelope(curves) -> list:
    """Pointwise min of the upper curves and max of the lower curves.

    The envelope fails only if one of its candidates does, so its ``delta``
    is the sum of the candidates' ``delta`` at that ``g``.
    """
    out = []
    for kind, names, pick in (("upper", UPPER_METHODS, min), ("lower", LOWER_METHODS, max)):
        by_g = {}
        for c in curves:
            if c.method in names and c.kind == kind:
                for p in c:
                    by_g.setdefault(p.g, []).append(p)
        if not by_g:
            continue
        pts = []
        for g in sorted(by_g):
            cands = by_g[g]
            win = pick(cands, key=lambda p: p.value)
            pts.append(BoundPoint(
                g, win.value, kind, "best", min(1.0, sum(p.delta for p in cands)), win.target, win.raw_value,
                {"from": win.method, "candidates": sorted(p.method for p in cands)},
            ))
        out.append(GuessingCurve(tuple(pts)))
    return out


def _lp_points(kind, grid, ds, enc, solver, dump_dir):
    fn = lp_lower_bound if kind == "lower" else lp_upper_bound
    workers = worker_count()

    def one(g):
        return fn(g, ds.mesh, enc, ds.lp, solver=solver, workers=1)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pts = list(pool.map(one, grid))
    else:
        pts = [one(g) for g in grid]
    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
        for p in pts:
            idx = p.provenance.get("idx")
            if idx is None:
                continue
            problem = LpTemplate(kind, p.g, ds.mesh, enc, ds.lp).problem(idx)
            with open(os.path.join(dump_dir, f"{kind}_g{p.g}_idx{idx}.lp"), "w") as fh:
                write_lp(problem, fh)
    return pts


def analyze_curves(corpus, grid, methods, ds, seed=0, model=None, solver=None, dump_dir=None) -> list:
    """All requested curves for ``corpus`` over ``grid``; ``best`` is derived from the others."""
    methods = list(dict.fromkeys(methods))
    table = corpus.frequency_table() if isinstance(corpus, SampleCorpus) else corpus
    n = table.n
    enc = frequency_encoding(table)
    curves = []
    part = None
    if {"sampling_lb", "extended_lb"} & set(methods):
        part = partition(corpus, ds.split.d, seed=seed)
    for m in methods:
        if m == "frequency_ub":
            pts = [B.frequency_ub(table, g, ds.delta1) for g in grid]
        elif m == "sampling_lb":
            pts = [B.sampling_lb(part, g, ds.split) for g in grid]
        elif m == "extended_lb":
            pts = B.extended_lb_curve(part, model, grid, ds.split)
        elif m == "prior_lb":
            pts = [
                B.prior_lb_best(enc, _prior_L(g, n), delta_t=ds.schedule.delta2, delta_eps=ds.delta1,
                                j_range=ds.schedule.prior_j_range)
                for g in grid if g >= n
            ]
        elif m in ("lp_lb", "lp_ub"):
            pts = _lp_points("lower" if m == "lp_lb" else "upper", grid, ds, enc, solver, dump_dir)
        else:
            continue
        if pts:
            curves.append(GuessingCurve(tuple(pts), {"method": m}))
    if "best" in methods:
        curves.extend(best_envelope(curves))
    return curves


# ---------------------------------------------------------------- arguments


def _floats(spec):
    return tuple(float(v) for v in spec.split(",") if v.strip())


def _schedule(args) -> Schedule:
    """Flags override the config file, which overrides the defaults."""
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
        unknown = set(base) - set(Schedule.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown schedule keys in {args.config}: {sorted(unknown)}")
        for k in ("delta4", "xhat3_multipliers", "prior_j_range"):
            if k in base:
                base[k] = tuple(base[k])
    sch = Schedule().with_overrides(**{k: base[k] for k in ("i_max",) if k in base})
    sch = sch.with_overrides(**{k: v for k, v in base.items() if k != "i_max"})
    flags = {
        "delta1": args.delta1,
        "delta2": args.delta2,
        "delta3": args.delta3,
        "q": args.q,
        "d": args.d,
        "i_max": args.i_max,
    }
    if args.i_max is not None:
        sch = sch.with_overrides(i_max=args.i_max)
    sch = sch.with_overrides(**{k: v for k, v in flags.items() if k != "i_max"})
    if args.delta4:
        sch = sch.with_overrides(delta4=_floats(args.delta4))
    if getattr(args, "xhat3", None):
        sch = sch.with_overrides(xhat3_multipliers=_floats(args.xhat3))
    return sch


def _methods(spec, allowed) -> list:
    ms = [m.strip() for m in spec.split(",") if m.strip()]
    if not ms:
        raise UsageError("no methods requested")
    bad = [m for m in ms if m not in allowed]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {', '.join(allowed)}")
    return ms


def _add_schedule_flags(p):
    g = p.add_argument_group("schedule (defaults: 0.99 confidence per bound)")
    g.add_argument("--config", help="JSON file with schedule fields")
    g.add_argument("--q", type=float, help="mesh ratio (default 1.002)")
    g.add_argument("--d", type=int, help="held-out split size (default 25000)")
    g.add_argument("--delta-1", dest="delta1", type=float, help="McDiarmid shift failure probability")
    g.add_argument("--delta-2", dest="delta2", type=float, help="prior bound slack failure probability")
    g.add_argument("--delta-3", dest="delta3", type=float, help="split slack failure probability")
    g.add_argument("--delta-4", dest="delta4", help="comma list, one per Good-Turing band")
    g.add_argument("--i-max", dest="i_max", type=int, help="highest band index")
    g.add_argument("--xhat3", help="comma list of band cut-offs, in units of 1/N")
    g.add_argument("--solver-tol", type=float, default=1e-9, help="primal feasibility tolerance")


def _add_input(p):
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--format", choices=FORMATS, default="plain")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="guessbound", description="Bounds on password guessing curves.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="bound curves for a corpus")
    _add_input(a)
    a.add_argument("--methods", default=",".join(DEFAULT_METHODS), help="comma list of " + ", ".join(ANALYZE_METHODS))
    a.add_argument("--g-grid", help="comma list of G values (default: powers of two)")
    a.add_argument("--guesses", help="model guess list, needed for extended_lb")
    a.add_argument("--seed", type=int, default=0, help="split seed")
    a.add_argument("--dump-lp", metavar="DIR", help="write the optimal LP instance of every G here")
    a.add_argument("--out", default="-")
    a.add_argument("--out-format", choices=("csv", "json"), default="csv")
    _add_schedule_flags(a)

    s = sub.add_parser("simulate", help="coverage run on a synthetic distribution")
    s.add_argument("--dist", required=True, help="uniform:K or zipf:K:S")
    s.add_argument("--n", type=int, required=True, help="sample size")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--methods", default="frequency_ub,sampling_lb,prior_lb")
    s.add_argument("--g-grid", help="comma list of G values (default: powers of two up to 4K)")
    s.add_argument("--prior-L", default="1,2,4", help="prior bound evaluated at G = ceil(n L)")
    s.add_argument("--seed", type=int, default=0, help="base seed; trial t uses seed + t")
    s.add_argument("--strict", action="store_true", help="exit 2 when a method fails its threshold")
    s.add_argument("--traces", help="CSV file for per-trial values")
    s.add_argument("--out", default="-")
    _add_schedule_flags(s)

    c = sub.add_parser("check-iid", help="is the corpus consistent with IID sampling?")
    _add_input(c)
    c.add_argument("--out", help="write the JSON report here")
    _add_schedule_flags(c)

    m = sub.add_parser("compare-model", help="model curve with sampling and extended lower bounds")
    _add_input(m)
    m.add_argument("--guesses", required=True, help="guess list, one token per line in rank order")
    m.add_argument("--g-grid", help="comma list of G values")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default="-")
    m.add_argument("--out-format", choices=("csv", "json"), default="csv")
    _add_schedule_flags(m)
    return ap


# ---------------------------------------------------------------- commands


def _solver(args):
    return HighsSolver(primal_tol=args.solver_tol, retry_tol=10 * args.solver_tol)


def _load(args):
    return load_corpus(args.input, args.format)


def cmd_analyze(args) -> int:
    methods = _methods(args.methods, ANALYZE_METHODS)
    if "extended_lb" in methods:
        if args.format == "counts_only":
            raise UsageError("extended_lb needs the passwords themselves; counts_only input has none")
        if not args.guesses:
            raise UsageError("extended_lb needs --guesses")
    corpus = _load(args)
    if corpus.n < 2:
        raise UsageError("corpus needs at least two samples")
    ds = derive_schedule(corpus.n, _schedule(args), need_lp=bool({"lp_lb", "lp_ub"} & set(methods)))
    for note in ds.notes:
        print(f"note: {note}", file=sys.stderr)
    table = corpus.frequency_table() if isinstance(corpus, SampleCorpus) else corpus
    grid = parse_g_grid(args.g_grid) if args.g_grid else default_g_grid(table.distinct, corpus.n)
    model = load_guess_list(args.guesses) if "extended_lb" in methods else None
    curves = analyze_curves(corpus, grid, methods, ds, args.seed, model, _solver(args), args.dump_lp)
    meta = {"input": os.path.basename(args.input), "n": corpus.n, "distinct": table.distinct,
            "seed": args.seed, "schedule": ds.summary()}
    _emit(curves, args.out, args.out_format, meta)
    return EXIT_OK


def _parse_dist(spec):
    from .oracle import make_uniform, make_zipf

    parts = spec.split(":")
    try:
        if parts[0] == "uniform" and len(parts) == 2:
            return make_uniform(int(parts[1]))
        if parts[0] == "zipf" and len(parts) == 3:
            return make_zipf(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise UsageError(f"bad distribution {spec!r}: {exc}") from None
    raise UsageError(f"bad distribution {spec!r}; use uniform:K or zipf:K:S")


def cmd_simulate(args) -> int:
    from .oracle import COVERAGE_METHODS, coverage_trial

    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    dist = _parse_dist(args.dist)
    methods = _methods(args.methods, COVERAGE_METHODS)
    grid = parse_g_grid(args.g_grid) if args.g_grid else [2 ** k for k in range(int(math.log2(4 * dist.k)) + 1)]
    report = coverage_trial(
        dist, args.n, grid, methods, trials=args.trials, base_seed=args.seed, schedule=_schedule(args),
        prior_L=_floats(args.prior_L), solver=_solver(args), keep_traces=bool(args.traces),
    )
    text = report.to_json() + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.traces:
        with open(args.traces, "w", newline="") as fh:
            report.write_traces_csv(fh)
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    ok = all(report.passed(m) for m in report.violations)
    return EXIT_VERDICT if args.strict and not ok else EXIT_OK


def cmd_check_iid(args) -> int:
    corpus = _load(args)
    if corpus.n < 2:
        raise UsageError("corpus needs at least two samples")
    enc = frequency_encoding(corpus)
    ds = derive_schedule(corpus.n, _schedule(args))
    verdict = check_iid_consistency(enc, ds.mesh, ds.lp, _solver(args))
    report = _jsonable(verdict.report) | {"consistent": verdict.consistent}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print("consistent with IID sampling" if verdict else "NOT consistent with IID sampling", file=sys.stderr)
    return EXIT_OK if verdict else EXIT_VERDICT


def cmd_compare_model(args) -> int:
    if args.format == "counts_only":
        raise UsageError("comparing a model needs the passwords themselves; counts_only input has none")
    corpus = _load(args)
    if corpus.n < 2:
        raise UsageError("corpus needs at least two samples")
    ds = derive_schedule(corpus.n, _schedule(args), need_lp=False)
    model = load_guess_list(args.guesses)
    table = corpus.frequency_table() if isinstance(corpus, SampleCorpus) else corpus
    grid = parse_g_grid(args.g_grid) if args.g_grid else default_g_grid(max(table.distinct, len(model)), corpus.n)
    curves = analyze_curves(corpus, grid, ["sampling_lb", "extended_lb"], ds, args.seed, model)
    part = partition(corpus, ds.split.d, seed=args.seed)
    frac = B.model_curve(part.d2, model, grid)
    pts = tuple(
        BoundPoint.make(g, v, "estimate", "model_curve", 1.0, "distribution_lambda", model=model.source_label)
        for g, v in zip(grid, frac)
    )
    curves.insert(0, GuessingCurve(pts))
    meta = {"input": os.path.basename(args.input), "guesses": model.source_label, "n": corpus.n,
            "seed": args.seed, "schedule": ds.summary()}
    _emit(curves, args.out, args.out_format, meta)
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "check-iid": cmd_check_iid,
    "compare-model": cmd_compare_model,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InconsistentSampleError as exc:
        print(f"guessbound: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except (UsageError, CorpusFormatError, LpSolveError, ValueError, OSError) as exc:
        print(f"guessbound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
