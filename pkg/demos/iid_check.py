#!/usr/bin/env python3
"""Spotting a corpus that cannot be an IID sample.

Take an honest sample, then write every password three times.  The result
looks like a normal frequency list but has no singletons at all, and
the Good-Turing bands the LP relies on cannot all hold at once.  The
check-iid command reports exit code 2 for it and 0 for the honest sample.
"""

import os
import tempfile

from guessbound.cli import main as cli
from guessbound.oracle import make_zipf, sample


def write_counts(path, counts):
    with open(path, "w") as fh:
        fh.writelines(f"{int(c)}\n" for c in counts)


def main():
    dist = make_zipf(100_000, 0.8)
    honest = sample(dist, 33_334, seed=5).frequency_table().ordered_counts
    with tempfile.TemporaryDirectory() as tmp:
        for label, counts in (("honest sample", honest), ("every password x3", 3 * honest)):
            path = os.path.join(tmp, "counts.txt")
            write_counts(path, counts)
            code = cli(["check-iid", "--input", path, "--format", "counts_only", "--q", "1.05"])
            print(f"{label:>18}: n={int(counts.sum())}, exit code {code}")


if __name__ == "__main__":
    main()
