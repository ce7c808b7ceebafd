"""Write CSV sweeps of the named families into an output directory.

    python3 scripts/family_sweep.py --outdir results/
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from distortion_lab.election import expected_distortion
from distortion_lab.generators import FamilyParams, generate
from distortion_lab.metric_core import LineInstance, line_to_instance

SWEEPS = {
    "example2_line_iid": ("eps", np.geomspace(1e-5, 1e-2, 13)),
    "diff_dist": ("eps", np.geomspace(1e-5, 1e-2, 13)),
    "example1": ("eps", np.linspace(0.01, 0.1, 10)),
    "simplex_metric": ("n", [2, 5, 10, 20, 50, 100, 200, 500]),
}


def sweep(family, param, values, eps=1e-3):
    rows = []
    for v in values:
        kw = {"eps": eps, param: int(v) if param == "n" else float(v)}
        obj = generate(FamilyParams(family, **kw))
        inst = line_to_instance(obj) if isinstance(obj, LineInstance) else obj
        rep = expected_distortion(inst)
        rows.append((kw[param], rep.expected, rep.max_pairwise))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for family, (param, values) in SWEEPS.items():
        path = out / f"{family}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "expected", "max_pairwise"])
            for row in sweep(family, param, values):
                w.writerow([repr(x) for x in row])
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
