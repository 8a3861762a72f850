#!/usr/bin/env python3
"""A bad cracking model next to what the data itself guarantees.

Guessing passwords in reverse order of popularity is about the worst
strategy there is.  Its empirical curve on held-out samples stays near
zero for a long time, while the LP lower bound, computed from the same
sample and valid for every attacker, says an optimal attacker already
cracks a large share.  The gap between the two is the headroom a real
model would be leaving on the table.
"""

from guessbound import ModelGuessList, Schedule, derive_schedule, frequency_encoding, partition
from guessbound.bounds import extended_lb_curve, model_curve
from guessbound.meshlp import lp_lower_bound
from guessbound.oracle import exact_lambda, make_zipf, sample


def main():
    n, k = 100_000, 100_000
    dist = make_zipf(k, 0.8)
    corpus = sample(dist, n, seed=3)
    ds = derive_schedule(n, Schedule(q=1.05))
    width = len(str(k - 1))
    weak = ModelGuessList.from_iterable(
        (f"pw{i:0{width}d}" for i in reversed(range(k))), "reversed-frequency"
    )

    grid = [1024, 8192, 32768, 65536, 90000]
    part = partition(corpus, ds.split.d, seed=3)
    model = model_curve(part.d2, weak, grid)
    ext = extended_lb_curve(part, weak, grid, ds.split)
    enc = frequency_encoding(corpus.frequency_table())

    print(f"{'G':>7} {'truth':>7} {'model':>8} {'extended_lb':>12} {'lp_lb':>8}")
    for g, m, e in zip(grid, model, ext):
        lp = lp_lower_bound(g, ds.mesh, enc, ds.lp).value
        print(f"{g:>7} {exact_lambda(dist, g):7.4f} {m:8.4f} {e.value:12.4f} {lp:8.4f}")
    print("\nThe model curve trails lp_lb by a wide margin at mid-range G.")


if __name__ == "__main__":
    main()
