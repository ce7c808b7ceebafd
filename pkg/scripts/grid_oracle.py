"""Compare exhaustive grid optima with the closed-form and family values."""

import argparse
import time

from distortion_lab.line import maximize_three_point
from distortion_lab.search import brute_force_small


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=32)
    args = ap.parse_args()

    _, closed = maximize_three_point()
    for space, n in [("line_pq_equal", 2), ("line_pq_equal", 3), ("metric_pq_equal", 3), ("metric_pq_free", 3)]:
        t0 = time.perf_counter()
        g = brute_force_small(space, n, args.resolution)
        print(f"{space:16s} n={n} best={g.best_value:.6f} evaluations={g.evaluations} "
              f"time={time.perf_counter() - t0:.1f}s")
    print(f"closed-form line optimum: {closed:.10f}")


if __name__ == "__main__":
    main()
