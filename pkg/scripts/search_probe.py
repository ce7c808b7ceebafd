"""Probe all three search spaces and print a gap report for each.

    python3 scripts/search_probe.py --restarts 16 --steps 5000
"""

import argparse
import json

from distortion_lab.search import SearchConfig, search

SPACES = {"line_pq_equal": 6, "metric_pq_equal": 12, "metric_pq_free": 6}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seed-every", type=int, default=4)
    args = ap.parse_args()

    for space, n in SPACES.items():
        cfg = SearchConfig(space=space, n=n, restarts=args.restarts, steps_per_restart=args.steps,
                           seed=args.seed, seed_every=args.seed_every)
        res = search(cfg)
        report = res.gap_report()
        report["best_unseeded"] = max((r.best_value for r in res.restarts if not r.seeded), default=None)
        print(json.dumps(report))


if __name__ == "__main__":
    main()
