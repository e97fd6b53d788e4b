"""Compare the numba and pure-numpy Monte Carlo kernels.

Usage::

    python benchmarks/bench_kernels.py [--mc 1000000] [--repeat 5]

Both backends see identical draws; the script checks that their counts agree
before reporting the best-of-``repeat`` wall time per kernel.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pocmediate import Evidence, LinearScmSpec, PnsQuery, _kernels
from pocmediate.simulate import oracle_counts
from pocmediate.trimediator import TriScmSpec, tri_oracle_counts


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--mc", type=int, default=10 ** 6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; install the 'fast' extra to compare backends")

    q = PnsQuery(x=[1], x_prime=[0], y=0, c=[0])
    q_ev = PnsQuery(x=[1], x_prime=[0], y=0, c=[0], evidence=Evidence.interval([0], 0.0, 1.5))
    cases = [
        ("two mediators", "classify_two", lambda: oracle_counts(LinearScmSpec(), q, args.mc)),
        ("two mediators + evidence", "classify_two", lambda: oracle_counts(LinearScmSpec(), q_ev, args.mc)),
        ("logistic outcome", "classify_two",
         lambda: oracle_counts(LinearScmSpec(outcome_link="logistic", link_scale=10.0),
                               PnsQuery(x=[1], x_prime=[0], y=1, c=[0]), args.mc)),
        ("three mediators", "classify_tri", lambda: tri_oracle_counts(TriScmSpec(), q, args.mc)),
    ]
    print(f"{'case':<28}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for label, name, fn in cases:
        fast, slow = getattr(_kernels, f"{name}_numba"), getattr(_kernels, f"{name}_numpy")
        setattr(_kernels, name, fast)
        fn()  # compile
        t_fast, a = _best(fn, args.repeat)
        setattr(_kernels, name, slow)
        t_slow, b = _best(fn, args.repeat)
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            raise SystemExit(f"{label}: backends disagree")
        print(f"{label:<28}{t_fast:>10.3f}{t_slow:>10.3f}{t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
