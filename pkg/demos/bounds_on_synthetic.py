#!/usr/bin/env python3
"""How close do the bounds get when the truth is known?

We draw 100 000 passwords from a Zipf(0.8) distribution over 100 000
labels, compute every bound the package offers and print them next to the
exact guessing curve.  The sample has roughly 40 000 distinct passwords,
and past that point the sampling bound can no longer grow: it stalls near
the Good-Turing plateau.

A coarse mesh (q = 1.05) keeps the run under a minute.  At that mesh the
rounding slack in the LP is large and its lower bound also levels off,
a little below the sampling plateau.  Getting past the plateau needs the
fine mesh, --q 1.002, which takes hours on one core.
"""

import argparse

from guessbound import Schedule, derive_schedule, frequency_encoding
from guessbound.cli import analyze_curves
from guessbound.oracle import exact_lambda, make_zipf, sample

COLUMNS = ("frequency_ub", "lp_ub", "lp_lb", "sampling_lb", "prior_lb")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, default=1.05)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    n = 100_000
    dist = make_zipf(100_000, 0.8)
    corpus = sample(dist, n, seed=args.seed)
    table = corpus.frequency_table()
    ds = derive_schedule(n, Schedule(q=args.q))
    grid = [256, 4096, 16384, 65536, 100_000, 262144, 1_048_576]

    print(f"n={n}  distinct={table.distinct}  mesh size l={ds.mesh.l}")
    curves = analyze_curves(corpus, grid, list(COLUMNS), ds, seed=args.seed)
    by_method = {c.method: {p.g: p.value for p in c} for c in curves}

    print(f"{'G':>9} {'truth':>7} " + " ".join(f"{m:>12}" for m in COLUMNS))
    for g in grid:
        cells = []
        for m in COLUMNS:
            v = by_method.get(m, {}).get(g)
            cells.append(f"{v:12.4f}" if v is not None else f"{'-':>12}")
        print(f"{g:>9} {exact_lambda(dist, g):7.4f} " + " ".join(cells))

    plateau = 1 - frequency_encoding(table).unique / n
    print(f"\nGood-Turing plateau (n - unique)/n = {plateau:.4f}")
    beyond = [by_method["lp_lb"][g] for g in grid if g > table.distinct]
    print(f"best lp_lb past Distinct(S): {max(beyond):.4f}")


if __name__ == "__main__":
    main()
