"""Bound machinery for general metrics: cost caps, the CSoc functional and
the A/B/C structure around a near-extremal election."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .election import costs, expected_distortion, ratio_matrix, winner_matrix
from .metric_core import Instance

DELTA_MAX = 1.0 / 100.0
COST_CAP_REL_TOL = 1e-9


@dataclass(frozen=True)
class InequalityCheck:
    """A named numeric inequality ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    tol: float = 0.0
    applicable: bool = True

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.lhs <= self.rhs + self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "applicable": self.applicable,
        }


# --- three-times cost cap ---------------------------------------------------------


@dataclass(frozen=True)
class CostCapViolation:
    i: int
    j: int
    winner: int
    ratio: float


def check_cost_cap(instance: Instance) -> list[CostCapViolation]:
    """Pairs whose winner costs more than three times the loser (empty on any metric)."""
    c = costs(instance)
    w = winner_matrix(instance)
    out = []
    n = instance.n
    for i in range(n):
        for j in range(i + 1, n):
            win = int(w[i, j])
            lose = j if win == i else i
            if c[win] > 3.0 * c[lose] + COST_CAP_REL_TOL * c[lose]:
                ratio = c[win] / c[lose] if c[lose] > 0 else math.inf
                out.append(CostCapViolation(i, j, win, ratio))
    return out


# --- CSoc -----------------------------------------------------------------------------


def csoc(p, c, alpha: float) -> float:
    """``2 sum_{i < j <= last(i)} p_i p_j (c_j / c_i - 1)`` over costs sorted ascending,
    where ``last(i)`` is the largest index with ``c_j <= alpha c_i``."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("costs must be positive")
    order = np.argsort(c, kind="stable")
    p, c = p[order], c[order]
    ratio = c[None, :] / c[:, None]
    upper = np.triu(np.ones_like(ratio, dtype=bool), k=1)
    within = upper & (c[None, :] <= alpha * c[:, None])
    terms = 2.0 * np.outer(p, p) * (ratio - 1.0)
    return math.fsum(terms[within].tolist())


def _merge_point(p: np.ndarray, c: np.ndarray, src: int, dst: int) -> tuple[np.ndarray, np.ndarray]:
    p = p.copy()
    p[dst] += p[src]
    keep = np.arange(len(p)) != src
    return p[keep], c[keep]


@dataclass
class CsocMergeResult:
    p: np.ndarray
    c: np.ndarray
    value: float
    history: list[tuple[str, float]] = field(default_factory=list)


def merge_csoc(p, c, alpha: float) -> CsocMergeResult:
    """Push ``(p, c)`` to a 2-point configuration without lowering ``csoc``.

    Two reductions alternate: a pair more than ``alpha`` apart in cost has
    ``csoc`` linear in the mass moved between them, so all mass goes to the
    better endpoint; once all costs are within ``alpha``, the second-cheapest
    cost enters as ``b1 + b2 c + b3 / c`` (convex), so it is merged into a
    neighbour.
    """
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("costs must be positive")
    keep = p > 0
    p, c = p[keep], c[keep]
    order = np.argsort(c, kind="stable")
    p, c = p[order], c[order]
    history = [("start", csoc(p, c, alpha))]

    while len(p) > 2:
        # equal costs merge for free
        dup = np.flatnonzero(np.diff(c) == 0)
        if dup.size:
            k = int(dup[0])
            p, c = _merge_point(p, c, k + 1, k)
            history.append(("merge_equal", csoc(p, c, alpha)))
            continue
        # cheapest and dearest are the pair furthest apart
        if c[-1] > alpha * c[0]:
            to_hi = _merge_point(p, c, 0, len(p) - 1)
            to_lo = _merge_point(p, c, len(p) - 1, 0)
            v_hi, v_lo = csoc(*to_hi, alpha), csoc(*to_lo, alpha)
            p, c = to_hi if v_hi >= v_lo else to_lo
            history.append(("move_far_pair", max(v_hi, v_lo)))
            continue
        to_lo = _merge_point(p, c, 1, 0)
        to_hi = _merge_point(p, c, 1, 2)
        v_lo, v_hi = csoc(*to_lo, alpha), csoc(*to_hi, alpha)
        p, c = to_lo if v_lo >= v_hi else to_hi
        history.append(("merge_second", max(v_lo, v_hi)))

    if len(p) == 2 and c[1] > alpha * c[0]:
        # both csoc values are 0 here; keep a single point
        p, c = np.array([1.0]), c[:1]
        history.append(("drop_far_pair", 0.0))
    return CsocMergeResult(p, c, csoc(p, c, alpha), history)


def csoc_merge_maximize(n_support: int, alpha: float, starts: int = 64, seed: int = 0) -> float:
    """Largest merged ``csoc`` over random ``(p, c)`` starts of the given support size."""
    if not 1.0 <= alpha <= 3.0:
        raise ValueError("alpha must lie in [1, 3]")
    if n_support < 2:
        raise ValueError("n_support must be >= 2")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(starts):
        p = rng.dirichlet(np.ones(n_support))
        c = rng.uniform(1.0, alpha * 1.5, n_support)
        best = max(best, merge_csoc(p, c, alpha).value)
    return best


def two_point_csoc(p1: float, alpha: float) -> float:
    """``2 p1 (1 - p1) (alpha - 1)``; maximal value ``(alpha - 1) / 2`` at ``p1 = 1/2``."""
    return 2.0 * p1 * (1.0 - p1) * (alpha - 1.0)


def diff_with_cap_bound(alpha: float) -> float:
    """Upper bound ``(1 + alpha) / 2`` on expected distortion when every pair has ratio <= alpha."""
    if not 1.0 <= alpha <= 3.0:
        raise ValueError("alpha must lie in [1, 3]")
    return (1.0 + alpha) / 2.0


def two_minus_eps_bound(delta: float) -> float:
    """``3/2 + 9 sqrt(delta)``, valid when the largest pairwise ratio is ``3 - delta``."""
    if not 0.0 <= delta <= DELTA_MAX:
        raise ValueError("delta must lie in [0, 1/100]")
    return 1.5 + 9.0 * math.sqrt(delta)


# --- Delta quantities -----------------------------------------------------------------


def delta_ijb(instance: Instance, i: int, j: int, b: int, r: np.ndarray | None = None) -> float:
    """``r(i, b) + r(j, b) + r(i, j)``."""
    if len({i, j, b}) != 3:
        raise ValueError("i, j, b must be distinct")
    r = ratio_matrix(instance) if r is None else r
    return float(r[i, b] + r[j, b] + r[i, j])


def _closeness_ratio(p: float, rho: float) -> float:
    # bound on c(b) / c(i) for i in A, b in B
    return (1.0 - p + rho + p * rho) / (p * (1.0 - rho))


def delta_cap(p: float, rho: float) -> float:
    """``1 + 2 (2 / (1 - rho)) ((1 - p + rho + p rho) / (p (1 - rho)))``."""
    if not 0.0 < p <= 0.5:
        raise ValueError("p must lie in (0, 1/2]")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    return 1.0 + 2.0 * (2.0 / (1.0 - rho)) * _closeness_ratio(p, rho)


def delta_case_bounds(p: float, rho: float, delta: float) -> tuple[float, float, float]:
    """The three bound families from the case analysis on ``Delta_{i,j,b}``."""
    f = _closeness_ratio(p, rho)
    return (2.0 * f + 3.0 - delta, 1.0 + 4.0 / (1.0 - rho), delta_cap(p, rho))


# --- A/B/C partition ----------------------------------------------------------------


@dataclass(frozen=True)
class Piece:
    """A point (or a fractional piece of one) placed in a partition set."""

    index: int
    mass: float
    dist_x: float


@dataclass(frozen=True, eq=False)
class AbcPartition:
    x: int
    y: int
    A: tuple[Piece, ...]
    B: tuple[Piece, ...]
    C: tuple[Piece, ...]
    rho_A: float
    rho_B: float
    p_target: float
    delta: float
    delta_measured: float
    rho_cap: float
    scale: float
    cost_x: float
    checks: tuple[InequalityCheck, ...]

    @property
    def in_regime(self) -> bool:
        """True when the measured delta lies in [0, 1/100], where the Lemma-style bounds apply."""
        return -1e-12 <= self.delta_measured <= DELTA_MAX

    @property
    def split_points(self) -> tuple[int, ...]:
        seen: dict[int, int] = {}
        for piece in self.A + self.B + self.C:
            seen[piece.index] = seen.get(piece.index, 0) + 1
        return tuple(sorted(i for i, k in seen.items() if k > 1))

    @property
    def mass_A(self) -> float:
        return math.fsum(piece.mass for piece in self.A)

    @property
    def mass_B(self) -> float:
        return math.fsum(piece.mass for piece in self.B)

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "A": [piece.index for piece in self.A],
            "B": [piece.index for piece in self.B],
            "split_points": list(self.split_points),
            "rho_A": self.rho_A,
            "rho_B": self.rho_B,
            "p_target": self.p_target,
            "delta": self.delta,
            "delta_measured": self.delta_measured,
            "in_regime": self.in_regime,
            "rho_cap": self.rho_cap,
            "checks": [chk.to_dict() for chk in self.checks],
        }


def _prefix(order, mass, dist_x, target) -> tuple[list[Piece], list[Piece]]:
    """Take ``target`` mass from the front of ``order``, splitting the boundary point."""
    taken, rest = [], []
    need = target
    for i in order:
        m = float(mass[i])
        if m <= 0:
            continue
        if need <= 0:
            rest.append(Piece(int(i), m, float(dist_x[i])))
        elif m <= need:
            taken.append(Piece(int(i), m, float(dist_x[i])))
            need -= m
        else:
            taken.append(Piece(int(i), need, float(dist_x[i])))
            rest.append(Piece(int(i), m - need, float(dist_x[i])))
            need = 0.0
    return taken, rest


def default_p_target(delta: float) -> float:
    return (1.0 - math.sqrt(max(delta, 0.0))) / 2.0


def rho_cap(delta: float, p_target: float) -> float:
    """``delta / ((2 - delta)(1 - 2 p))``; 0 when ``delta = 0``."""
    if delta == 0:
        return 0.0
    denom = (2.0 - delta) * (1.0 - 2.0 * p_target)
    return math.inf if denom <= 0 else delta / denom


def partition_abc(instance: Instance, x: int, y: int, p_target: float | None = None) -> AbcPartition:
    """Split the points around the election ``(x, y)`` won by ``y``.

    Distances are rescaled so that ``d(x, y) = 2``.  ``delta`` is ``3 - r(x, y)``
    clamped to [0, 1/100] (it sets the default ``p_target``); the radius and
    cost checks use the measured, unclamped value.  ``A`` is the
    ``p_target``-mass prefix (by distance to ``x``) of the points weakly
    preferring ``y``; ``B`` the ``p_target``-mass prefix of the points
    strictly preferring ``x``; ``C`` is the rest.  Boundary points are split
    into co-located pieces.
    """
    if not instance.same_distributions:
        raise ValueError("the A/B/C partition is defined for p = q instances")
    if x == y:
        raise ValueError("x and y must differ")
    d = instance.dist
    if d[x, y] <= 0:
        raise ValueError("x and y must be at positive distance")
    scale = 2.0 / float(d[x, y])
    dx, dy = d[x] * scale, d[y] * scale
    p = instance.p.probs

    report = expected_distortion(instance)
    r_xy = float(report.ratios[x, y])
    delta_raw = 3.0 - r_xy
    delta = min(max(delta_raw, 0.0), DELTA_MAX)
    # the radius and cost inequalities hold for any measured delta in [0, 2)
    applicable = int(report.winners[x, y]) == y and -1e-12 <= delta_raw < 2.0
    delta_eval = max(delta_raw, 0.0)
    # enough voters strictly preferring x is only forced near the ratio-3 extreme
    applicable_b = applicable and delta_raw <= DELTA_MAX
    if p_target is None:
        p_target = default_p_target(delta)
    if not 0.0 < p_target <= 0.5:
        raise ValueError("p_target must lie in (0, 1/2]")

    prefers_y = dy <= dx
    idx = np.arange(instance.n)
    order_y = sorted(idx[prefers_y], key=lambda i: (dx[i], i))
    order_x = sorted(idx[~prefers_y], key=lambda i: (dx[i], i))
    A, rest_y = _prefix(order_y, p, dx, p_target)
    B, rest_x = _prefix(order_x, p, dx, p_target)
    C = tuple(sorted(rest_y + rest_x, key=lambda piece: piece.index))

    rho_A = max([piece.dist_x - 1.0 for piece in A], default=0.0)
    rho_A = max(rho_A, 0.0)
    rho_B = max([piece.dist_x for piece in B], default=0.0)
    cap = rho_cap(delta_eval, p_target)
    cost_x = float(report.costs[x]) * scale

    checks = (
        InequalityCheck("mass_A", p_target, math.fsum(pc.mass for pc in A), 1e-12, applicable),
        InequalityCheck("mass_B", p_target, math.fsum(pc.mass for pc in B), 1e-12, applicable_b),
        InequalityCheck("radii_sum", rho_A + rho_B, cap, 1e-9, applicable),
        InequalityCheck("cost_x", cost_x, 1.0 / (2.0 - delta_eval) if delta_eval < 2.0 else math.inf, 1e-9, applicable),
    )
    return AbcPartition(
        x, y, tuple(A), tuple(B), C, rho_A, rho_B, p_target, delta, delta_raw, cap, scale, cost_x, checks
    )


def max_delta_over_partition(instance: Instance, part: AbcPartition) -> float:
    """Largest ``Delta_{i,j,b}`` over distinct ``i, j`` in ``A`` and ``b`` in ``B`` (whole points)."""
    r = ratio_matrix(instance)
    A = sorted({pc.index for pc in part.A})
    B = sorted({pc.index for pc in part.B})
    best = -math.inf
    for b in B:
        for a1 in A:
            for a2 in A:
                if len({a1, a2, b}) == 3:
                    best = max(best, float(r[a1, b] + r[a2, b] + r[a1, a2]))
    return best


def most_distorted_pair(instance: Instance) -> tuple[int, int, float]:
    """``(opt, winner, ratio)`` of the largest-ratio election drawn with positive probability."""
    report = expected_distortion(instance)
    p = report.probs
    live = np.outer(p, p) > 0
    np.fill_diagonal(live, False)
    if not live.any():
        return 0, 0, 1.0
    r = np.where(live, report.ratios, -np.inf)
    i, j = np.unravel_index(int(np.argmax(r)), r.shape)
    w = int(report.winners[i, j])
    opt = j if w == i else i
    return int(opt), w, float(r[i, j])
