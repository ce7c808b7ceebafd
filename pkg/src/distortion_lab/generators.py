"""Named instance families and seeded random instances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric_core import Distribution, FiniteMetric, Instance, LineInstance, line_distances, metric_closure

FAMILIES = ("example1", "example2_line_iid", "simplex_metric", "diff_dist")
FAMILY_ALIASES = {
    "example1": "example1",
    "example2": "example2_line_iid",
    "example2_line_iid": "example2_line_iid",
    "simplex": "simplex_metric",
    "simplex_metric": "simplex_metric",
    "diff_dist": "diff_dist",
    "diff": "diff_dist",
}
MIN_GAP = 1e-6


def _check_eps(eps: float, hi: float, closed: bool = True):
    ok = 0.0 < eps <= hi if closed else 0.0 < eps < hi
    if not ok:
        raise ValueError(f"eps must lie in (0, {hi}{']' if closed else ')'}, got {eps}")


def _left_right_voter_instance(eps: float) -> Instance:
    # points at -1, eps, 1: candidates on the wings, the voter majority just right of centre
    dist = line_distances([-1.0, eps, 1.0])
    p = [0.5, 0.0, 0.5]
    q = [0.5 - eps, 0.5 + eps, 0.0]
    return Instance(FiniteMetric(dist), Distribution(p), Distribution(q))


def gen_example1(eps: float) -> Instance:
    """Wing candidates at -1 and 1; voters ``1/2 - eps`` at -1 and ``1/2 + eps`` at ``eps``."""
    _check_eps(eps, 0.1)
    return _left_right_voter_instance(eps)


def gen_diff_dist(eps: float) -> Instance:
    """Same geometry as Example 1, drawn at the tighter ``eps <= 0.01`` regime; distortion ``2 - O(eps)``."""
    _check_eps(eps, 0.01)
    return _left_right_voter_instance(eps)


def gen_example2_line_iid(eps: float) -> LineInstance:
    """Three points ``(-1, eps, 1)`` with masses ``(1/2 - eps, 1 - 1/sqrt 2, 1/sqrt 2 - 1/2 + eps)``."""
    _check_eps(eps, 0.01)
    s = 1.0 / math.sqrt(2.0)
    return LineInstance([-1.0, eps, 1.0], Distribution([0.5 - eps, 1.0 - s, s - 0.5 + eps]))


def gen_simplex_metric(n: int, eps: float) -> Instance:
    """A heavy point 0 with mass ``(1 - eps)/2`` at distance 1 from ``n`` light points
    that sit ``1 - eps`` apart from each other."""
    if n < 2:
        raise ValueError("n must be >= 2")
    _check_eps(eps, 0.1, closed=False)
    dist = np.full((n + 1, n + 1), 1.0 - eps)
    dist[0, :] = 1.0
    dist[:, 0] = 1.0
    np.fill_diagonal(dist, 0.0)
    p = np.full(n + 1, (1.0 + eps) / (2.0 * n))
    p[0] = (1.0 - eps) / 2.0
    return Instance.from_arrays(dist, p)


def lemma8_configuration(k: int = 4) -> Instance:
    """Exact ratio-3 configuration: zero-mass ``y`` (index 0), ``x`` (index 1) with
    mass 1/2, and ``k`` points at distance 1 from both ``x`` and ``y`` and from
    each other.

    The voters at the ``k`` points are equidistant from ``x`` and ``y`` and
    vote for the lower index, so ``y`` wins on a vote share of exactly 1/2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = k + 2
    dist = np.ones((n, n))
    dist[0, 1] = dist[1, 0] = 2.0
    np.fill_diagonal(dist, 0.0)
    p = np.zeros(n)
    p[1] = 0.5
    p[2:] = 0.5 / k
    return Instance.from_arrays(dist, p)


def random_line_instance(n: int, seed: int) -> LineInstance:
    """Sorted uniform positions on [0, 1] (gaps >= 1e-6) and Dirichlet(1) masses."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    while True:
        x = np.sort(rng.uniform(0.0, 1.0, n))
        if n == 1 or np.min(np.diff(x)) >= MIN_GAP:
            break
    p = rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1)
    return LineInstance(x, Distribution(p))


def random_metric_instance(n: int, seed: int, independent_q: bool = False) -> Instance:
    """Closure of a symmetric uniform table with Dirichlet(1) masses (``q = p`` unless asked)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.uniform(0.0, 1.0, (n, n)), k=1)
    metric = metric_closure(upper + upper.T)
    p = Distribution(rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1))
    q = Distribution(rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1)) if independent_q else p
    return Instance(metric, p, q)


@dataclass(frozen=True)
class FamilyParams:
    family: str
    eps: float = 1e-3
    n: int = 10
    seed: int = 0

    def __post_init__(self):
        name = FAMILY_ALIASES.get(self.family)
        if name is None:
            raise ValueError(f"unknown family {self.family!r}; choose from {sorted(FAMILY_ALIASES)}")
        object.__setattr__(self, "family", name)
        if not 0.0 < self.eps <= 0.1:
            raise ValueError("eps must lie in (0, 0.1]")
        if name == "simplex_metric" and self.n < 2:
            raise ValueError("n must be >= 2")


def generate(params: FamilyParams) -> Instance | LineInstance:
    if params.family == "example1":
        return gen_example1(params.eps)
    if params.family == "example2_line_iid":
        return gen_example2_line_iid(params.eps)
    if params.family == "simplex_metric":
        return gen_simplex_metric(params.n, params.eps)
    return gen_diff_dist(params.eps)
