"""Social costs, pairwise majority elections and expected distortion.

Tie policy: a voter equidistant from both candidates votes for the lower
index, and the lower-indexed candidate wins with a vote share of exactly
1/2.  Equivalently, for ``a < b`` candidate ``a`` wins iff the voters with
``d(a, k) <= d(b, k)`` carry at least half of the voter mass.  Cost ties for
the socially optimal candidate also go to the lower index.

Shares within ``SHARE_TOL`` of 1/2 count as ties, so rational masses such as
1/6 + 1/3 decide the same way whatever the float rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .metric_core import Instance

# Above this size the n^3 vote tensor is built row by row.
SHARE_TOL = 1e-12
_DENSE_VOTE_LIMIT = 160


def costs(instance: Instance) -> np.ndarray:
    """Social cost of every point: average distance to the voters."""
    return instance.dist @ instance.q.probs


def cost(instance: Instance, i: int) -> float:
    if not 0 <= i < instance.n:
        raise IndexError(f"point index {i} out of range for n={instance.n}")
    return float(instance.dist[i] @ instance.q.probs)


def _check_pair(instance: Instance, i: int, j: int):
    n = instance.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    if i == j:
        raise ValueError("an election needs two distinct candidates")


def vote_share(instance: Instance, i: int, j: int) -> float:
    """Voter mass going to ``i`` in the election between ``i`` and ``j``."""
    _check_pair(instance, i, j)
    d, q = instance.dist, instance.q.probs
    favours_i = d[i] <= d[j] if i < j else d[i] < d[j]
    return float(q @ favours_i)


def winner(instance: Instance, i: int, j: int) -> int:
    _check_pair(instance, i, j)
    a, b = min(i, j), max(i, j)
    return a if vote_share(instance, a, b) >= 0.5 - SHARE_TOL else b


def _ratio(c_win: float, c_opt: float) -> float:
    if c_opt > 0:
        return c_win / c_opt
    return math.inf if c_win > 0 else 1.0


@dataclass(frozen=True)
class PairOutcome:
    i: int
    j: int
    winner: int
    opt: int
    ratio: float

    def to_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "winner": self.winner, "opt": self.opt, "ratio": self.ratio}


def pair_outcome(instance: Instance, i: int, j: int) -> PairOutcome:
    _check_pair(instance, i, j)
    w = winner(instance, i, j)
    ci, cj = cost(instance, i), cost(instance, j)
    a, b = min(i, j), max(i, j)
    ca, cb = (ci, cj) if a == i else (cj, ci)
    opt = a if ca <= cb else b
    return PairOutcome(i, j, w, opt, _ratio(cost(instance, w), cost(instance, opt)))


def winner_matrix(instance: Instance) -> np.ndarray:
    """``W[i, j]`` is the winner of the election between ``i`` and ``j`` (``W[i, i] = i``)."""
    d, q = instance.dist, instance.q.probs
    n = instance.n
    if n <= _DENSE_VOTE_LIMIT:
        # share[a, b] = mass of voters k with d[a, k] <= d[b, k]
        share = (d[:, None, :] <= d[None, :, :]) @ q
    else:
        # only the upper triangle is read below
        share = np.zeros((n, n))
        for a in range(n - 1):
            share[a, a + 1 :] = (d[a][None, :] <= d[a + 1 :]) @ q
    idx = np.arange(n)
    lower_wins = share >= 0.5 - SHARE_TOL
    low = np.minimum(idx[:, None], idx[None, :])
    high = np.maximum(idx[:, None], idx[None, :])
    # the decisive share is always the one of the lower index against the higher
    decisive = lower_wins[low, high]
    return np.where(decisive, low, high)


def ratio_matrix(instance: Instance, c: np.ndarray | None = None, w: np.ndarray | None = None) -> np.ndarray:
    """Symmetric matrix of pairwise distortions ``r(i, j)``, with ``r(i, i) = 1``."""
    c = costs(instance) if c is None else c
    w = winner_matrix(instance) if w is None else w
    c_win = c[w]
    c_opt = np.minimum(c[:, None], c[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = c_win / c_opt
    zero_opt = c_opt <= 0
    r[zero_opt] = np.where(c_win[zero_opt] > 0, np.inf, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def social_from_ratios(p: np.ndarray, r: np.ndarray) -> float:
    """Expected distortion from pair ratios, accumulated with exactly rounded summation.

    ``math.fsum`` returns the correctly rounded sum, so the result does not
    depend on the order in which pair terms are produced.
    """
    iu, ju = np.triu_indices(len(p), k=1)
    weights = p[iu] * p[ju]
    live = weights > 0
    terms = 2.0 * weights[live] * r[iu[live], ju[live]]
    if np.isinf(terms).any():
        return math.inf
    return math.fsum(np.concatenate([p * p, terms]).tolist())


@dataclass(frozen=True, eq=False)
class DistortionReport:
    costs: np.ndarray
    winners: np.ndarray
    ratios: np.ndarray
    probs: np.ndarray
    expected: float
    max_pairwise: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.expected)

    def pairs(self) -> list[PairOutcome]:
        """Outcomes of every pair ``i < j`` drawn with positive probability."""
        out = []
        c = self.costs
        for i, j in zip(*np.triu_indices(len(c), k=1)):
            if self.probs[i] * self.probs[j] > 0:
                i, j = int(i), int(j)
                opt = i if c[i] <= c[j] else j
                out.append(PairOutcome(i, j, int(self.winners[i, j]), opt, float(self.ratios[i, j])))
        return out

    def to_dict(self, include_pairs: bool | None = None) -> dict:
        if include_pairs is None:
            include_pairs = len(self.costs) <= 64
        doc = {
            "costs": [float(x) for x in self.costs],
            "expected": float(self.expected),
            "max_pairwise": float(self.max_pairwise),
        }
        if include_pairs:
            doc["pairs"] = [p.to_dict() for p in self.pairs()]
        return doc

    def to_json(self, include_pairs: bool | None = None) -> str:
        # inf is emitted as the JSON extension token Infinity
        return json.dumps(self.to_dict(include_pairs), indent=2) + "\n"


def expected_distortion(instance: Instance) -> DistortionReport:
    """Exact expected distortion of two i.i.d. candidates drawn from ``p``."""
    p = instance.p.probs
    c = costs(instance)
    w = winner_matrix(instance)
    r = ratio_matrix(instance, c, w)
    expected = social_from_ratios(p, r)
    live = np.outer(p, p) > 0
    max_pairwise = float(r[live].max()) if live.any() else 1.0
    return DistortionReport(c, w, r, p, expected, max_pairwise)


def distortion(instance: Instance) -> float:
    """Shortcut for ``expected_distortion(instance).expected``."""
    return expected_distortion(instance).expected


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


def monte_carlo_distortion(instance: Instance, samples: int, seed: int = 0) -> MonteCarloEstimate:
    """Average pairwise distortion over ``samples`` i.i.d. candidate pairs."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    p = instance.p.probs
    if not np.any(p > 0):
        raise ValueError("candidate distribution has empty support")
    r = ratio_matrix(instance)
    rng = np.random.default_rng(seed)
    a = rng.choice(instance.n, size=samples, p=p)
    b = rng.choice(instance.n, size=samples, p=p)
    draws = r[a, b]
    mean = float(np.mean(draws))
    stderr = float(np.std(draws, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return MonteCarloEstimate(mean, stderr, samples)
