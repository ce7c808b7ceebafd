"""Adversarial search for high-distortion instances.

Simulated annealing over line instances (``p = q``), general metrics with
``p = q``, and general metrics with free voter distribution ``q``.  Each
restart owns an RNG stream spawned from ``(seed, restart)``, so results are
reproducible regardless of how restarts are scheduled.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .election import SHARE_TOL, ratio_matrix, social_from_ratios, winner_matrix
from .generators import gen_diff_dist, gen_example2_line_iid, gen_simplex_metric, random_line_instance, random_metric_instance
from .metric_core import Distribution, FiniteMetric, Instance, LineInstance, line_distances, line_to_instance, metric_closure, write_instance

SPACES = ("line_pq_equal", "metric_pq_equal", "metric_pq_free")
LINE_BOUND = 4.0 - 2.0 * math.sqrt(2.0)
METRIC_PQ_EQUAL_BOUND = 2.0 - 1.0 / 652.0
METRIC_PQ_FREE_BOUND = 2.0
CONJECTURED_PQ_EQUAL = 1.5
MAX_GRID_EVALUATIONS = 10**8
MIN_DISTANCE = 1e-3
MIN_SCALE_FRACTION = 0.02


@dataclass(frozen=True)
class SearchConfig:
    space: str = "line_pq_equal"
    n: int = 6
    restarts: int = 8
    steps_per_restart: int = 2000
    init_temp: float = 0.05
    cooling: float = 0.999
    seed: int = 0
    move_scale: float = 0.3
    # every ``seed_every``-th restart starts from a padded family instance; 0 disables
    seed_every: int = 4

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}")
        if self.restarts < 1 or self.steps_per_restart < 1:
            raise ValueError("restarts and steps_per_restart must be >= 1")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.init_temp <= 0:
            raise ValueError("init_temp must be positive")
        if self.seed_every < 0:
            raise ValueError("seed_every must be >= 0")


@dataclass(frozen=True, eq=False)
class RestartResult:
    restart: int
    best_value: float
    best_instance: Instance
    final_value: float
    accepted: int
    evaluations: int
    seeded: bool = False


@dataclass(frozen=True, eq=False)
class SearchResult:
    best_instance: Instance
    best_value: float
    per_restart_bests: list[float]
    evaluations: int
    config: SearchConfig
    restarts: list[RestartResult] = field(default_factory=list)

    def bound(self) -> float:
        return {
            "line_pq_equal": LINE_BOUND,
            "metric_pq_equal": METRIC_PQ_EQUAL_BOUND,
            "metric_pq_free": METRIC_PQ_FREE_BOUND,
        }[self.config.space]

    def _best_restart(self) -> RestartResult:
        return next(r for r in self.restarts if r.best_instance is self.best_instance)

    def gap_report(self) -> dict:
        doc = {
            "space": self.config.space,
            "best_value": self.best_value,
            "proven_upper_bound": self.bound(),
            "slack_to_bound": self.bound() - self.best_value,
            "evaluations": self.evaluations,
            "best_from_family_seed": self._best_restart().seeded if self.restarts else False,
        }
        if self.config.space == "metric_pq_equal":
            doc["conjectured_supremum"] = CONJECTURED_PQ_EQUAL
            doc["excess_over_conjecture"] = self.best_value - CONJECTURED_PQ_EQUAL
            doc["open_gap"] = [CONJECTURED_PQ_EQUAL, METRIC_PQ_EQUAL_BOUND]
        return doc


# --- state representations -------------------------------------------------------


def _line_to_state_instance(x: np.ndarray, p: np.ndarray) -> Instance:
    """Sort positions, pool coincident points and drop zero mass, then embed."""
    order = np.argsort(x, kind="stable")
    xs, ps = x[order], p[order]
    keep_x, keep_p = [], []
    for xi, pi in zip(xs, ps):
        if pi <= 0:
            continue
        if keep_x and xi == keep_x[-1]:
            keep_p[-1] += pi
        else:
            keep_x.append(float(xi))
            keep_p.append(float(pi))
    return line_to_instance(LineInstance(keep_x, Distribution(keep_p)))


def _evaluate(inst: Instance) -> float:
    r = ratio_matrix(inst, w=winner_matrix(inst))
    return social_from_ratios(inst.p.probs, r)


class _State:
    """Mutable annealing state; ``instance()`` builds the immutable evaluation object."""

    def __init__(self, space: str, x=None, d=None, p=None, q=None):
        self.space = space
        self.x, self.d, self.p, self.q = x, d, p, q

    def copy(self) -> "_State":
        c = lambda a: None if a is None else a.copy()
        return _State(self.space, c(self.x), c(self.d), c(self.p), c(self.q))

    def instance(self) -> Instance:
        if self.space == "line_pq_equal":
            return _line_to_state_instance(self.x, self.p)
        p = Distribution(self.p)
        q = p if self.q is None else Distribution(self.q)
        return Instance(FiniteMetric(self.d), p, q)


def _initial_state(space: str, n: int, rng: np.random.Generator) -> _State:
    seed = int(rng.integers(2**63 - 1))
    if space == "line_pq_equal":
        line = random_line_instance(n, seed)
        return _State(space, x=line.positions.copy(), p=line.probs.copy())
    inst = random_metric_instance(n, seed, independent_q=space == "metric_pq_free")
    d = np.maximum(inst.dist, MIN_DISTANCE)
    np.fill_diagonal(d, 0.0)
    d = metric_closure(d).dist.copy()
    d /= d.max()
    q = inst.q.probs.copy() if space == "metric_pq_free" else None
    return _State(space, d=d, p=inst.p.probs.copy(), q=q)


def _seeded_state(space: str, n: int, rng: np.random.Generator) -> _State:
    """A known family instance padded with zero-mass points to ``n`` points."""
    if space == "line_pq_equal":
        line = gen_example2_line_iid(float(rng.uniform(1e-4, 1e-2)))
        x = np.concatenate([(line.positions + 1.0) / 2.0, rng.uniform(0.0, 1.0, n - 3)])
        p = np.concatenate([line.probs, np.zeros(n - 3)])
        return _State(space, x=x, p=p)
    if space == "metric_pq_equal":
        inst = gen_simplex_metric(n - 1, float(rng.uniform(1e-4, 1e-3)))
        return _State(space, d=inst.dist.copy(), p=inst.p.probs.copy())
    inst = gen_diff_dist(float(rng.uniform(1e-4, 1e-2)))
    # padding points sit at the diameter from everything, which keeps the table metric
    d = np.ones((n, n))
    d[:3, :3] = inst.dist / inst.dist.max()
    np.fill_diagonal(d, 0.0)
    pad = np.zeros(n - 3)
    return _State(space, d=d, p=np.concatenate([inst.p.probs, pad]), q=np.concatenate([inst.q.probs, pad]))


def _move_mass(v: np.ndarray, rng: np.random.Generator, scale: float) -> None:
    i, j = rng.choice(len(v), size=2, replace=False)
    amount = min(v[i], abs(rng.normal(0.0, scale)))
    v[i] -= amount
    v[j] += amount


def _propose(state: _State, rng: np.random.Generator, scale: float) -> _State:
    new = state.copy()
    n = len(new.p)
    if new.space == "line_pq_equal":
        kind = rng.integers(3)
        if kind == 0:
            i = rng.integers(n)
            new.x[i] = float(np.clip(new.x[i] + rng.normal(0.0, scale), 0.0, 1.0))
        elif kind == 1:
            _move_mass(new.p, rng, scale)
        else:
            i, j = rng.choice(n, size=2, replace=False)
            if rng.random() < 0.5:
                # merge i into j
                new.p[j] += new.p[i]
                new.p[i] = 0.0
            else:
                # split: j relocates next to i and takes part of i's mass
                others = [k for k in range(n) if k != j]
                k = others[int(np.argmin(np.abs(new.x[others] - new.x[j])))]
                new.p[k] += new.p[j]
                share = rng.random() * new.p[i]
                new.p[j] = share
                new.p[i] -= share
                new.x[j] = float(np.clip(new.x[i] + rng.normal(0.0, scale), 0.0, 1.0))
        return new

    kinds = 3 if new.space == "metric_pq_free" else 2
    kind = rng.integers(kinds)
    if kind == 0:
        a, b = rng.choice(n, size=2, replace=False)
        val = max(new.d[a, b] * math.exp(rng.normal(0.0, scale)), MIN_DISTANCE)
        new.d[a, b] = new.d[b, a] = val
        d = metric_closure(new.d).dist
        new.d = d / d.max()
    elif kind == 1:
        _move_mass(new.p, rng, scale)
    else:
        _move_mass(new.q, rng, scale)
    return new


def _run_restart(config: SearchConfig, restart: int, trace: list | None = None) -> RestartResult:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(restart,)))
    seeded = config.seed_every > 0 and restart % config.seed_every == 0 and config.n >= 3
    state = (_seeded_state if seeded else _initial_state)(config.space, config.n, rng)
    inst = state.instance()
    value = _evaluate(inst)
    best_value, best_inst = value, inst
    temp = config.init_temp
    accepted = 0
    evaluations = 1
    for step in range(config.steps_per_restart):
        frac = max(temp / config.init_temp, MIN_SCALE_FRACTION)
        cand = _propose(state, rng, config.move_scale * frac)
        cand_inst = cand.instance()
        cand_value = _evaluate(cand_inst)
        evaluations += 1
        delta = cand_value - value
        if math.isfinite(cand_value) and (delta >= 0 or rng.random() < math.exp(delta / temp)):
            state, inst, value = cand, cand_inst, cand_value
            accepted += 1
            if value > best_value:
                best_value, best_inst = value, inst
        temp *= config.cooling
        if trace is not None and (step + 1) % 1000 == 0:
            trace.append({"restart": restart, "step": step + 1, "value": value, "best": best_value, "temp": temp})
    return RestartResult(restart, best_value, best_inst, value, accepted, evaluations, seeded)


def _run_restart_job(args) -> RestartResult:
    config, restart = args
    return _run_restart(config, restart)


def _worker_count(restarts: int) -> int:
    raw = os.environ.get("DISTORTION_LAB_THREADS", "0")
    try:
        want = int(raw)
    except ValueError:
        want = 0
    if want <= 0:
        want = os.cpu_count() or 1
    return max(1, min(want, restarts))


def search(config: SearchConfig, trace: list | None = None, workers: int | None = None) -> SearchResult:
    """Run all restarts and merge deterministically (value, then serialized instance)."""
    workers = _worker_count(config.restarts) if workers is None else workers
    if workers > 1 and trace is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_restart_job, [(config, k) for k in range(config.restarts)]))
    else:
        results = [_run_restart(config, k, trace) for k in range(config.restarts)]
    best = min(results, key=lambda r: (-r.best_value, write_instance(r.best_instance)))
    return SearchResult(
        best_instance=best.best_instance,
        best_value=best.best_value,
        per_restart_bests=[r.best_value for r in results],
        evaluations=sum(r.evaluations for r in results),
        config=config,
        restarts=results,
    )


# --- exhaustive grid oracle ----------------------------------------------------------


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    rows = []
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, row = -1, []
        for c in cuts:
            row.append(c - prev - 1)
            prev = c
        row.append(total + parts - 2 - prev)
        rows.append(row)
    return np.array(rows, dtype=float)


@dataclass(frozen=True, eq=False)
class GridResult:
    best_instance: Instance
    best_value: float
    evaluations: int


def _grid_line(n: int, resolution: int) -> GridResult:
    if n == 1:
        inst = line_to_instance(LineInstance([0.0], Distribution([1.0])))
        return GridResult(inst, 1.0, 1)
    interior = [k / resolution for k in range(1, resolution)]
    layouts = list(itertools.combinations(interior, n - 2))
    probs = _compositions(resolution, n) / resolution
    count = len(layouts) * len(probs)
    if count > MAX_GRID_EVALUATIONS:
        raise ValueError(f"grid needs {count} evaluations, above the cap {MAX_GRID_EVALUATIONS}")
    best_value, best_inst = -math.inf, None
    for mids in layouts:
        dist = line_distances([0.0, *mids, 1.0])
        for p in probs:
            inst = Instance(FiniteMetric(dist), Distribution(p), Distribution(p))
            value = _evaluate(inst)
            if value > best_value:
                best_value, best_inst = value, inst
    return GridResult(best_inst, best_value, count)


def _batch_values(dist: np.ndarray, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Expected distortion for many ``(p, q)`` rows on one distance table.

    Uses the same tie policy as :mod:`election`; plain summation, so callers
    re-evaluate the chosen row through the exact path before reporting it.
    """
    n = dist.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    C = Q @ dist
    # share of voters weakly preferring the lower index of each pair
    prefer_low = (dist[iu] <= dist[ju]).astype(float)
    lower_wins = Q @ prefer_low.T >= 0.5 - SHARE_TOL
    c_low, c_high = C[:, iu], C[:, ju]
    c_win = np.where(lower_wins, c_low, c_high)
    c_opt = np.minimum(c_low, c_high)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(c_opt > 0, c_win / c_opt, np.where(c_win > 0, np.inf, 1.0))
    cross = P[:, iu] * P[:, ju]
    with np.errstate(invalid="ignore"):
        terms = np.where(cross > 0, cross * ratio, 0.0)
    return np.sum(P * P, axis=1) + 2.0 * np.sum(terms, axis=1)


def _metric_tables(n: int, resolution: int) -> list[np.ndarray]:
    """Distance tables on ``{1..res}/res`` with the largest entry equal to 1.

    Scaling does not change distortion, so pinning the maximum loses nothing.
    For ``n = 3`` the pinned pair is ``(0, 2)`` and the relabeling ``0 <-> 2``
    lets us keep ``d(0, 1) >= d(1, 2)``.
    """
    if n == 2:
        return [np.array([[0.0, 1.0], [1.0, 0.0]])]
    grid = np.arange(1, resolution + 1) / resolution
    if n == 3:
        return [
            np.array([[0.0, a, 1.0], [a, 0.0, b], [1.0, b, 0.0]])
            for a in grid
            for b in grid
            if b <= a and a + b >= 1.0
        ]
    iu, ju = np.triu_indices(n, k=1)
    if resolution ** len(iu) * 8 > MAX_GRID_EVALUATIONS:
        raise ValueError(f"distance grid {resolution}^{len(iu)} is above the cap {MAX_GRID_EVALUATIONS}")
    combos = np.array(list(itertools.product(range(1, resolution + 1), repeat=len(iu))), dtype=float)
    combos = combos[combos.max(axis=1) == resolution] / resolution
    tables = np.zeros((len(combos), n, n))
    tables[:, iu, ju] = combos
    tables[:, ju, iu] = combos
    # keep the tables that already satisfy every triangle inequality
    excess = tables[:, :, None, :] - tables[:, :, :, None] - tables[:, None, :, :]
    ok = excess.max(axis=(1, 2, 3)) <= 1e-12
    return list(tables[ok])


def _grid_metric(n: int, resolution: int, free_q: bool) -> GridResult:
    if n == 1:
        inst = Instance.from_arrays([[0.0]], [1.0])
        return GridResult(inst, 1.0, 1)
    probs = _compositions(resolution, n) / resolution
    k = len(probs)
    per_table = k * k if free_q else k
    if n > 3 and k ** (3 if free_q else 2) > MAX_GRID_EVALUATIONS:
        raise ValueError(f"grid is above the cap {MAX_GRID_EVALUATIONS}")
    tables = _metric_tables(n, resolution)
    count = len(tables) * per_table
    if count > MAX_GRID_EVALUATIONS:
        raise ValueError(f"grid needs {count} evaluations, above the cap {MAX_GRID_EVALUATIONS}")

    if free_q:
        P = np.tile(probs, (k, 1))
        Q = np.repeat(probs, k, axis=0)
    else:
        P = Q = probs
    best_value, best_inst = -math.inf, None
    for dist in tables:
        vals = _batch_values(dist, P, Q)
        top = int(np.argmax(vals))
        if vals[top] > best_value:
            cand = Instance(FiniteMetric(dist), Distribution(P[top]), Distribution(Q[top]))
            value = _evaluate(cand)
            if value > best_value:
                best_value, best_inst = value, cand
    return GridResult(best_inst, best_value, count)


def brute_force_small(space: str, n: int, resolution: int) -> GridResult:
    """Exhaustive grid scan over small instances; an oracle independent of annealing."""
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}")
    if not 1 <= n <= 4:
        raise ValueError("n must lie in [1, 4]")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if space == "line_pq_equal":
        return _grid_line(n, resolution)
    return _grid_metric(n, resolution, free_q=space == "metric_pq_free")


def result_to_json(result: SearchResult) -> str:
    doc = result.gap_report()
    doc["config"] = asdict(result.config)
    doc["per_restart_bests"] = result.per_restart_bests
    return json.dumps(doc, indent=2) + "\n"
