"""Structure of majority voting on the line when candidates are drawn from the voters.

Points are indexed 0..n-1 from left to right.  Every reduction step works
on the support of ``p`` (zero-mass points are dropped first) and returns a
new :class:`LineInstance`; none of them moves the median.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .election import costs, distortion, ratio_matrix, winner_matrix
from .metric_core import Distribution, LineInstance, line_to_instance

MEDIAN_TOL = 1e-12
STEP_TOL = 1e-12
TOTAL_TOL = 1e-9
WORST_TIE_TOL = 1e-13
LINE_SUPREMUM = 4.0 - 2.0 * math.sqrt(2.0)


class DegenerateMedianError(ValueError):
    """Cumulative mass equals 1/2 at a point boundary, so the median is not unique."""


class PreconditionError(ValueError):
    """A reduction step was called outside the situation it is valid for."""


@dataclass(frozen=True, eq=False)
class LineStructure:
    m: int
    left: tuple[int, ...]
    right: tuple[int, ...]
    r: np.ndarray
    costs: np.ndarray

    @property
    def worst_left(self) -> int | None:
        # near-ties (rounding noise) go to the leftmost maximizer
        if not self.left:
            return None
        vals = self.r[list(self.left)]
        return self.left[int(np.argmax(vals >= vals.max() - WORST_TIE_TOL))]

    @property
    def worst_right(self) -> int | None:
        # near-ties (rounding noise) go to the rightmost maximizer
        if not self.right:
            return None
        vals = self.r[list(self.right)][::-1]
        return self.right[len(self.right) - 1 - int(np.argmax(vals >= vals.max() - WORST_TIE_TOL))]


def compact(line: LineInstance) -> LineInstance:
    """Drop zero-mass points."""
    keep = line.probs > 0
    if keep.all():
        return line
    return LineInstance(line.positions[keep], Distribution(line.probs[keep]))


def mirror(line: LineInstance) -> LineInstance:
    """Reflect the instance through the origin, reversing the index order."""
    return LineInstance(-line.positions[::-1], Distribution(line.probs[::-1]))


def support_size(line: LineInstance) -> int:
    return int(np.count_nonzero(line.probs > 0))


def median_index(line: LineInstance) -> int:
    """Index ``m`` with cumulative mass before ``m`` < 1/2 <= cumulative mass through ``m``."""
    cum = np.cumsum(line.probs)
    boundary = cum[:-1]
    hit = np.flatnonzero(np.abs(boundary - 0.5) <= MEDIAN_TOL)
    if hit.size:
        raise DegenerateMedianError(
            f"cumulative mass reaches 1/2 at the boundary after point {int(hit[0])}"
        )
    return int(np.searchsorted(cum, 0.5))


def conditional_distortion(line: LineInstance) -> np.ndarray:
    """``r_i``: expected distortion given that one of the candidates is ``i``."""
    inst = line_to_instance(line)
    return ratio_matrix(inst) @ line.probs


def structure(line: LineInstance) -> LineStructure:
    m = median_index(line)
    inst = line_to_instance(line)
    c = costs(inst)
    r = ratio_matrix(inst, c) @ line.probs
    return LineStructure(m, tuple(range(m)), tuple(range(m + 1, line.n)), r, c)


def line_distortion(line: LineInstance) -> float:
    return distortion(line_to_instance(line))


def cross_median_social(line: LineInstance) -> float:
    """``1 + 2 sum_{i in L, j in R} p_i p_j (r(i, j) - 1)``; equals the expected distortion."""
    st = structure(line)
    if not st.left or not st.right:
        return 1.0
    r = ratio_matrix(line_to_instance(line))
    p = line.probs
    L, R = list(st.left), list(st.right)
    terms = 2.0 * np.outer(p[L], p[R]) * (r[np.ix_(L, R)] - 1.0)
    return 1.0 + math.fsum(terms.ravel().tolist())


def one_side_social(line: LineInstance, side: str) -> float:
    """``1 - 2 p(S) + 2 sum_{i in S} p_i r_i`` for ``S`` the left or right side."""
    st = structure(line)
    idx = list(st.left if side == "left" else st.right)
    p = line.probs
    return 1.0 - 2.0 * float(np.sum(p[idx])) + 2.0 * math.fsum((p[idx] * st.r[idx]).tolist())


# --- structural checks --------------------------------------------------------


def check_vote_order(line: LineInstance) -> list[tuple[int, int]]:
    """Pairs whose winner is not the candidate closer to the median (should be empty)."""
    m = median_index(line)
    x = line.positions
    w = winner_matrix(line_to_instance(line))
    dm = np.abs(x - x[m])
    bad = []
    for i in range(line.n):
        for j in range(i + 1, line.n):
            if dm[i] == dm[j]:
                continue
            closer = i if dm[i] < dm[j] else j
            if w[i, j] != closer:
                bad.append((i, j))
    return bad


def check_social_order(line: LineInstance) -> list[tuple[int, int]]:
    """Same-side pairs where the point nearer the median costs strictly more (should be empty)."""
    m = median_index(line)
    c = costs(line_to_instance(line))
    # relative slack for rounding in the cost sums
    slack = 1e-12 * max(float(np.max(c)), 1.0)
    bad = []
    for side in (range(m, -1, -1), range(m, line.n)):
        seq = list(side)
        for a in range(len(seq)):
            for b in range(a + 1, len(seq)):
                near, far = seq[a], seq[b]
                if c[near] > c[far] + slack:
                    bad.append((near, far))
    return bad


# --- reduction steps ------------------------------------------------------------


def merge_worst_right(line: LineInstance) -> LineInstance:
    """Move all mass right of the worst right-side candidate ``y*`` onto ``y*``."""
    line = compact(line)
    st = structure(line)
    if not st.right:
        raise PreconditionError("no support to the right of the median")
    y = st.worst_right
    if y == line.n - 1:
        return line
    p = line.probs.copy()
    p[y] += float(np.sum(p[y + 1 :]))
    return LineInstance(line.positions[: y + 1], Distribution(p[: y + 1]))


def merge_worst_left(line: LineInstance) -> LineInstance:
    """Mirror image of :func:`merge_worst_right` acting on the left side."""
    return mirror(merge_worst_right(mirror(compact(line))))


def _extremal_setup(line: LineInstance) -> LineStructure:
    st = structure(line)
    if not st.left or not st.right:
        raise PreconditionError("both sides of the median must be nonempty")
    if st.worst_left != 0 or st.worst_right != line.n - 1:
        raise PreconditionError("worst candidates must be the leftmost and rightmost points")
    return st


def reduce_right(line: LineInstance) -> LineInstance:
    """Collapse all right-side mass onto the rightmost point.

    Requires the extreme points to be the worst candidates on their sides and
    the rightmost point to be at least as far from the median as the leftmost
    one (so it loses every election under the tie policy).
    """
    line = compact(line)
    st = _extremal_setup(line)
    x = line.positions
    if not abs(x[st.m] - x[0]) <= abs(x[-1] - x[st.m]):
        raise PreconditionError("rightmost point must be at least as far from the median as the leftmost")
    if len(st.right) == 1:
        return line
    p = line.probs.copy()
    keep = list(range(st.m + 1)) + [line.n - 1]
    p[-1] = float(np.sum(p[st.m + 1 :]))
    return LineInstance(x[keep], Distribution(p[keep]))


def reduce_right_mirrored(line: LineInstance) -> LineInstance:
    """Collapse all left-side mass onto the leftmost point (strictly farther side)."""
    mirrored = mirror(compact(line))
    st = _extremal_setup(mirrored)
    x = mirrored.positions
    if not abs(x[st.m] - x[0]) < abs(x[-1] - x[st.m]):
        raise PreconditionError("leftmost point must be strictly farther from the median")
    return mirror(reduce_right(mirrored))


@dataclass(frozen=True)
class ReduceLeftStep:
    case: int
    moved: int
    target: int
    slope_sign: float | None = None


def _case2_coefficients(line: LineInstance, m: int) -> tuple[float, float, float]:
    """Coefficients of ``(B + beta * x2) / (A - x2)`` in the case-2 distortion.

    Valid for the second-leftmost point moving within ``[x1, x3]``; the
    numerator is ``sum_{i in L} p_i c_i / p2`` and the denominator
    ``c_n / p2``, both linear in ``x2`` on that interval.
    """
    x, p = line.positions, line.probs
    n = line.n
    left = np.arange(m)
    c = costs(line_to_instance(line))
    p1, p2 = p[0], p[1]
    # slopes of the left-side costs in x2: c_1 grows, c_i (i >= 3 in L) shrinks,
    # c_2 moves away from point 1 and towards everything right of it
    dc = np.empty(m)
    dc[0] = p2
    dc[2:] = -p2
    dc[1] = p1 - float(np.sum(p[2:]))
    num_slope = float(np.sum(p[left] * dc))
    num_at = float(np.sum(p[left] * c[left]))
    den_at = float(c[n - 1])
    beta = num_slope / p2
    B = num_at / p2 - beta * x[1]
    A = den_at / p2 + x[1]
    return A, B, beta


def reduce_left(line: LineInstance) -> tuple[LineInstance, ReduceLeftStep]:
    """Shrink the left side by one point without lowering the distortion.

    Requires ``|L| > 1``, ``|R| = 1``, extreme points worst on their sides and
    the rightmost point at least as far from the median as the leftmost.
    Case 1 (some left point costs no more than the rightmost point) moves the
    mass of the left neighbour of the median onto the median.  Case 2 slides
    the second-leftmost point onto one of its neighbours, chosen by the sign
    of ``beta * A + B``.
    """
    line = compact(line)
    st = _extremal_setup(line)
    n, m = line.n, st.m
    x, p, c = line.positions, line.probs, st.costs
    if len(st.left) < 2:
        raise PreconditionError("left side needs at least two points")
    if len(st.right) != 1:
        raise PreconditionError("right side must be a single point")
    if not abs(x[m] - x[-1]) >= abs(x[m] - x[0]):
        raise PreconditionError("rightmost point must be at least as far from the median as the leftmost")

    if np.any(c[: m] <= c[n - 1]):
        k = m - 1
        q = p.copy()
        q[m] += q[k]
        keep = [i for i in range(n) if i != k]
        return LineInstance(x[keep], Distribution(q[keep])), ReduceLeftStep(1, k, m)

    A, B, beta = _case2_coefficients(line, m)
    sign = beta * A + B
    target = 2 if sign > 0 else 0
    q = p.copy()
    q[target] += q[1]
    keep = [i for i in range(n) if i != 1]
    return LineInstance(x[keep], Distribution(q[keep])), ReduceLeftStep(2, 1, target, float(sign))


def reduce_left_mirrored(line: LineInstance) -> tuple[LineInstance, ReduceLeftStep]:
    mirrored = mirror(compact(line))
    st = _extremal_setup(mirrored)
    x = mirrored.positions
    if not abs(x[st.m] - x[-1]) > abs(x[st.m] - x[0]):
        raise PreconditionError("in the mirrored frame the far point must be strictly farther")
    reduced, step = reduce_left(mirrored)
    return mirror(reduced), step


@dataclass(frozen=True)
class TraceStep:
    lemma: str
    support: int
    distortion: float

    def to_json(self) -> str:
        return json.dumps({"lemma": self.lemma, "support": self.support, "distortion": self.distortion})


@dataclass(frozen=True, eq=False)
class Reduction:
    result: LineInstance
    trace: list[TraceStep] = field(default_factory=list)
    initial: float = 1.0

    @property
    def final(self) -> float:
        return self.trace[-1].distortion if self.trace else self.initial

    def trace_jsonl(self) -> str:
        return "".join(step.to_json() + "\n" for step in self.trace)


def reduce_to_three(line: LineInstance, max_steps: int | None = None) -> Reduction:
    """Drive merge/collapse/shrink steps until at most three support points remain."""
    line = compact(line)
    start = line_distortion(line)
    median_index(line)  # reject degenerate medians up front
    trace: list[TraceStep] = []
    limit = max_steps if max_steps is not None else 2 * line.n * line.n + 8

    for _ in range(limit):
        st = structure(line)
        if line.n <= 3:
            return Reduction(line, trace, start)
        if not st.left or not st.right:
            # the better candidate always wins; a point mass at the median keeps distortion 1
            line = LineInstance(line.positions[[st.m]], Distribution([1.0]))
            trace.append(TraceStep("collapse_one_sided", 1, line_distortion(line)))
            return Reduction(line, trace, start)
        x, m = line.positions, st.m
        if st.worst_right != line.n - 1:
            line, lemma = merge_worst_right(line), "merge_worst_right"
        elif st.worst_left != 0:
            line, lemma = merge_worst_left(line), "merge_worst_left"
        else:
            right_is_far = abs(x[m] - x[0]) <= abs(x[-1] - x[m])
            if right_is_far and len(st.right) > 1:
                line, lemma = reduce_right(line), "reduce_right"
            elif not right_is_far and len(st.left) > 1:
                line, lemma = reduce_right_mirrored(line), "reduce_left_side_collapse"
            elif right_is_far:
                (line, step), lemma = reduce_left(line), "reduce_left"
                lemma += f"_case{step.case}"
            else:
                (line, step), lemma = reduce_left_mirrored(line), "reduce_right_side_shrink"
                lemma += f"_case{step.case}"
        line = compact(line)
        trace.append(TraceStep(lemma, line.n, line_distortion(line)))
    raise RuntimeError(f"reduction did not terminate within {limit} steps")


# --- three-point optimum -------------------------------------------------------


def three_point_social(p1: float, p2: float, p3: float, x2: float) -> tuple[float, bool]:
    """Distortion of the normalized 3-point line instance ``(0, x2, 1)``.

    Returns ``(value, in_regime)``.  Inside the worst-case regime (``x2`` the
    median, ``x2 > 1/2``, point 1 socially better than point 3) the closed
    form is used; otherwise the value comes from the election machinery and
    ``in_regime`` is False.
    """
    if not math.isclose(p1 + p2 + p3, 1.0, abs_tol=1e-12):
        raise ValueError("p1 + p2 + p3 must equal 1")
    if p1 * p3 == 0:
        return 1.0, True
    c1 = p2 * x2 + p3
    c3 = p1 + p2 * (1.0 - x2)
    in_regime = 0.5 < x2 < 1.0 and p1 < 0.5 and p3 < 0.5 and c1 < c3
    if not in_regime:
        pos = [0.0, x2, 1.0]
        probs = [p1, p2, p3]
        keep = [k for k in range(3) if probs[k] > 0]
        return line_distortion(LineInstance([pos[k] for k in keep], [probs[k] for k in keep])), False
    return (1.0 - 2.0 * p1 * p3) + 2.0 * p1 * p3 * c3 / c1, True


def limit_objective(p3: float) -> float:
    """``(1 - p3) + p3 (3 - 2 p3) / (1 + 2 p3)``: the 3-point bound in the limit x2 -> 1/2, p1 -> 1/2."""
    return (1.0 - p3) + p3 * (3.0 - 2.0 * p3) / (1.0 + 2.0 * p3)


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def maximize_three_point() -> tuple[float, float]:
    """Maximize the limiting 3-point objective over ``p3 in (0, 1/2)``.

    Golden-section search is cross-checked against the stationary point
    ``(sqrt 2 - 1) / 2`` obtained by setting the derivative to zero.
    """
    p3 = golden_section_max(limit_objective, 0.0, 0.5)
    closed = (math.sqrt(2.0) - 1.0) / 2.0
    if abs(p3 - closed) > 1e-7:
        raise ArithmeticError(f"golden-section optimum {p3} disagrees with closed form {closed}")
    return p3, limit_objective(p3)
