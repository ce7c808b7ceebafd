"""Reduce random line instances to three points and summarize the lemma usage."""

import argparse
import collections

from distortion_lab.generators import random_line_instance
from distortion_lab.line import reduce_to_three


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--show", type=int, default=1, help="print the full trace of the first k instances")
    args = ap.parse_args()

    usage = collections.Counter()
    gains = []
    for s in range(args.count):
        line = random_line_instance(4 + s % (args.max_n - 3), s)
        red = reduce_to_three(line)
        usage.update(step.lemma for step in red.trace)
        gains.append(red.final - red.initial)
        if s < args.show:
            print(f"instance {s}: n={line.n} initial={red.initial:.6f}")
            print(red.trace_jsonl(), end="")
    print("steps by kind:")
    for lemma, k in usage.most_common():
        print(f"  {lemma:32s} {k}")
    print(f"distortion gain: min={min(gains):.3e} mean={sum(gains) / len(gains):.4f} max={max(gains):.4f}")


if __name__ == "__main__":
    main()
