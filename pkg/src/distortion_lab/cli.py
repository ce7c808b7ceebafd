"""Command-line entry point: ``distortion-lab <verb> ...``.

Exit codes: 0 success, 1 a proven inequality was violated (``verify``),
2 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bounds, election, generators, line, search
from .metric_core import Distribution, Instance, InstanceFormatError, LineInstance, line_to_instance, parse_document, validate, write_instance

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad file or instance text; maps to exit code 2."""


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _load(path: str | None) -> Instance | LineInstance:
    try:
        return parse_document(_read_text(path))
    except InstanceFormatError as exc:
        raise InputError(str(exc)) from exc


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _as_instance(obj: Instance | LineInstance) -> Instance:
    return line_to_instance(obj) if isinstance(obj, LineInstance) else obj


# --- verbs --------------------------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        params = generators.FamilyParams(args.family, eps=args.eps, n=args.n, seed=args.seed)
        obj = generators.generate(params)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(write_instance(obj), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    inst = _as_instance(_load(args.instance))
    report = election.expected_distortion(inst)
    _emit(report.to_json(include_pairs=True if args.pairs else None), args.out)
    return EXIT_OK


def _perturb(obj: LineInstance, delta: float, seed: int) -> LineInstance:
    # jitter each mass by at most delta, then put the round-off on the largest entry
    rng = np.random.default_rng(seed)
    p = obj.probs + rng.uniform(-delta, delta, obj.n)
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    k = int(np.argmax(p))
    p[k] += 1.0 - math.fsum(p.tolist())
    return LineInstance(obj.positions, Distribution(p))


def cmd_reduce(args) -> int:
    obj = _load(args.instance)
    if not isinstance(obj, LineInstance):
        raise InputError("reduce needs a line instance (keys 'positions' and 'p')")
    if args.perturb:
        obj = _perturb(obj, args.perturb, args.seed)
    try:
        red = line.reduce_to_three(obj)
    except line.DegenerateMedianError as exc:
        raise InputError(f"{exc}; rerun with --perturb") from exc
    if args.trace:
        _emit(red.trace_jsonl(), args.trace)
    else:
        sys.stdout.write(red.trace_jsonl())
    if args.out:
        _emit(write_instance(red.result), args.out)
    summary = {"initial": red.initial, "final": red.final, "support": red.result.n}
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_search(args) -> int:
    try:
        config = search.SearchConfig(
            space=args.space,
            n=args.n,
            restarts=args.restarts,
            steps_per_restart=args.steps,
            init_temp=args.init_temp,
            cooling=args.cooling,
            seed=args.seed,
            seed_every=args.seed_every,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    trace: list | None = [] if args.trace else None
    result = search.search(config, trace=trace)
    if args.out:
        _emit(write_instance(result.best_instance), args.out)
    if args.trace:
        _emit("".join(json.dumps(rec) + "\n" for rec in trace), args.trace)
    sys.stdout.write(search.result_to_json(result))
    return EXIT_OK


def _check(name: str, passed: bool, **extra) -> dict:
    return {"name": name, "pass": bool(passed), **extra}


def verify_report(obj: Instance | LineInstance) -> dict:
    """Run every applicable proven-inequality check; ``ok`` is False on any failure."""
    checks: list[dict] = []
    if isinstance(obj, LineInstance):
        bad_votes = line.check_vote_order(obj)
        bad_social = line.check_social_order(obj)
        checks.append(_check("vote_order", not bad_votes, violations=[list(v) for v in bad_votes]))
        checks.append(_check("social_order", not bad_social, violations=[list(v) for v in bad_social]))
        checks.append(_check("line_bound", line.line_distortion(obj) <= line.LINE_SUPREMUM + 1e-9))
    inst = _as_instance(obj)
    valid = validate(inst)
    checks.append(_check("metric_valid", valid.ok, violations=[v.kind for v in valid.violations]))

    report = election.expected_distortion(inst)
    caps = bounds.check_cost_cap(inst)
    checks.append(_check("cost_cap", not caps, violations=[[v.i, v.j] for v in caps]))
    if inst.same_distributions and np.all(report.costs[inst.p.probs > 0] > 0) and not report.infinite:
        live = inst.p.probs > 0
        cap = bounds.csoc(inst.p.probs[live], report.costs[live], 3.0) + 1.0
        checks.append(_check("csoc_cap", report.expected <= cap + 1e-9, lhs=report.expected, rhs=cap))
        bound = search.METRIC_PQ_EQUAL_BOUND
        checks.append(_check("pq_equal_bound", report.expected <= bound + 1e-9, lhs=report.expected, rhs=bound))
    elif not report.infinite:
        checks.append(_check("pq_free_bound", report.expected <= 2.0 + 1e-9, lhs=report.expected, rhs=2.0))

    doc: dict = {"expected": report.expected, "checks": checks}
    if inst.same_distributions:
        opt, win, ratio = bounds.most_distorted_pair(inst)
        if opt != win and inst.dist[opt, win] > 0:
            part = bounds.partition_abc(inst, opt, win)
            doc["partition"] = part.to_dict()
            checks.extend(_check(f"partition_{c.name}", c.passed) for c in part.checks)
    doc["ok"] = all(c["pass"] for c in checks)
    return doc


def cmd_verify(args) -> int:
    doc = verify_report(_load(args.instance))
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK if doc["ok"] else EXIT_VIOLATION


def _parse_values(text: str, kind) -> list:
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad --values entry: {exc}") from exc


def cmd_sweep(args) -> int:
    kind = int if args.param == "n" else float
    values = _parse_values(args.values, kind)
    if not values:
        raise InputError("--values must list at least one value")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "expected", "max_pairwise"])
    for v in values:
        kw = {"eps": args.eps, "n": args.n, args.param: v}
        try:
            obj = generators.generate(generators.FamilyParams(args.family, **kw))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        rep = election.expected_distortion(_as_instance(obj))
        writer.writerow([repr(v), repr(rep.expected), repr(rep.max_pairwise)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distortion-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen", help="write a named family instance")
    g.add_argument("--family", required=True, choices=sorted(generators.FAMILY_ALIASES))
    g.add_argument("--eps", type=float, default=1e-3)
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="print the distortion report of an instance")
    e.add_argument("instance", nargs="?", help="instance JSON file (default: stdin)")
    e.add_argument("--pairs", action="store_true", help="always include per-pair outcomes")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("reduce", help="reduce a line instance to at most three points")
    r.add_argument("instance", nargs="?")
    r.add_argument("--perturb", type=float, default=0.0, help="jitter masses by at most this much first")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace", help="write the step trace (JSON lines) here instead of stdout")
    r.add_argument("--out", help="write the reduced instance here")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("search", help="anneal for high-distortion instances")
    s.add_argument("--space", choices=search.SPACES, default="line_pq_equal")
    s.add_argument("--n", type=int, default=6)
    s.add_argument("--restarts", type=int, default=8)
    s.add_argument("--steps", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init-temp", type=float, default=0.05)
    s.add_argument("--cooling", type=float, default=0.999)
    s.add_argument("--seed-every", type=int, default=4, help="family-seed every k-th restart (0: never)")
    s.add_argument("--out", help="write the best instance here")
    s.add_argument("--trace", help="write progress records (JSON lines) here")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="check the proven inequalities on an instance")
    v.add_argument("instance", nargs="?")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="evaluate a family over a parameter grid (CSV)")
    w.add_argument("--family", required=True, choices=sorted(generators.FAMILY_ALIASES))
    w.add_argument("--param", choices=("eps", "n"), default="eps")
    w.add_argument("--values", required=True, help="comma-separated parameter values")
    w.add_argument("--eps", type=float, default=1e-3)
    w.add_argument("--n", type=int, default=10)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
