"""Finite metrics, distributions, instances and their JSON encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PROB_SUM_TOL = 1e-12
TRIANGLE_REL_TOL = 1e-9


class InstanceFormatError(ValueError):
    """Raised when instance text is malformed or violates an invariant.

    ``field`` names the offending JSON key (``distances``, ``p``, ``q``,
    ``positions``) or is ``None`` for whole-document problems.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def _frozen_array(values: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteMetric:
    """Symmetric distance table over ``n`` points."""

    dist: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.dist, 2, "dist")
        if arr.shape[0] != arr.shape[1]:
            raise ValueError(f"dist must be square, got shape {arr.shape}")
        object.__setattr__(self, "dist", arr)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __eq__(self, other):
        return isinstance(other, FiniteMetric) and np.array_equal(self.dist, other.dist)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Distribution:
    """Dense probability vector over the points of a metric."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs, 1, "probs"))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def mass(self, indices) -> float:
        return float(np.sum(self.probs[list(indices)]))

    def __eq__(self, other):
        return isinstance(other, Distribution) and np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Instance:
    """A metric together with candidate distribution ``p`` and voter distribution ``q``."""

    metric: FiniteMetric
    p: Distribution
    q: Distribution

    def __post_init__(self):
        if not (self.metric.n == self.p.n == self.q.n):
            raise ValueError(
                f"dimension mismatch: metric n={self.metric.n}, p n={self.p.n}, q n={self.q.n}"
            )

    @classmethod
    def from_arrays(cls, dist, p, q=None) -> "Instance":
        p_dist = Distribution(p)
        q_dist = p_dist if q is None else Distribution(q)
        return cls(FiniteMetric(dist), p_dist, q_dist)

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def dist(self) -> np.ndarray:
        return self.metric.dist

    @property
    def same_distributions(self) -> bool:
        return self.p is self.q or np.array_equal(self.p.probs, self.q.probs)

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.metric == other.metric
            and self.p == other.p
            and self.q == other.q
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LineInstance:
    """Points on the line with a single distribution serving as both ``p`` and ``q``."""

    positions: np.ndarray
    p: Distribution

    def __post_init__(self):
        pos = _frozen_array(self.positions, 1, "positions")
        object.__setattr__(self, "positions", pos)
        if not isinstance(self.p, Distribution):
            object.__setattr__(self, "p", Distribution(self.p))
        if pos.shape[0] != self.p.n:
            raise ValueError(f"positions has {pos.shape[0]} entries but p has {self.p.n}")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return self.p.probs

    def __eq__(self, other):
        return (
            isinstance(other, LineInstance)
            and np.array_equal(self.positions, other.positions)
            and self.p == other.p
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple[int, ...]
    magnitude: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_distribution(name: str, probs: np.ndarray) -> list[Violation]:
    out = []
    for i in np.flatnonzero(~np.isfinite(probs) | (probs < 0)):
        out.append(Violation(f"{name}.negative", (int(i),), float(probs[i])))
    total = float(np.sum(probs)) if np.all(np.isfinite(probs)) else float("nan")
    if not abs(total - 1.0) <= PROB_SUM_TOL:
        out.append(Violation(f"{name}.sum", (), total - 1.0, f"{name} sums to {total!r}"))
    return out


def validate(instance: Instance, rel_tol: float = TRIANGLE_REL_TOL) -> ValidationReport:
    """Check every data-model invariant; never raises.

    The triangle inequality is checked with slack ``rel_tol * max distance``;
    pass ``rel_tol=0`` for an exact check.
    """
    d = instance.dist
    n = instance.n
    out: list[Violation] = []
    if instance.p.n != n or instance.q.n != n:
        out.append(Violation("dimension", (), float("nan"), "metric, p and q disagree on n"))
        return ValidationReport(tuple(out))

    bad = ~np.isfinite(d) | (d < 0)
    for i, j in zip(*np.nonzero(bad)):
        out.append(Violation("distance.negative", (int(i), int(j)), float(d[i, j])))
    for i in np.flatnonzero(np.diag(d) != 0):
        out.append(Violation("diagonal", (int(i),), float(d[i, i])))
    asym = np.abs(d - d.T)
    for i, j in zip(*np.nonzero(np.triu(asym > 0))):
        out.append(Violation("symmetry", (int(i), int(j)), float(asym[i, j])))

    if not bad.any() and n:
        tau = rel_tol * float(d.max())
        # excess[i, k] = d[i, k] - d[i, j] - d[j, k] for one middle point j at a time
        excess = np.empty((n, n))
        for j in range(n):
            np.add(d[:, j, None], d[None, j, :], out=excess)
            np.subtract(d, excess, out=excess)
            if excess.max() <= tau:
                continue
            for i, k in zip(*np.nonzero(excess > tau)):
                out.append(
                    Violation(
                        "triangle",
                        (int(i), j, int(k)),
                        float(excess[i, k]),
                        f"d[{i}][{k}]={float(d[i, k])!r} > d[{i}][{j}]+d[{j}][{k}]",
                    )
                )

    out += _check_distribution("p", instance.p.probs)
    if instance.q is not instance.p:
        out += _check_distribution("q", instance.q.probs)
    return ValidationReport(tuple(out))


def line_distances(positions) -> np.ndarray:
    x = np.asarray(positions, dtype=float)
    return np.abs(x[:, None] - x[None, :])


def line_to_instance(line: LineInstance) -> Instance:
    """Embed a line instance as a finite metric with ``q = p``."""
    if np.any(np.diff(line.positions) <= 0):
        raise ValueError("positions must be strictly increasing")
    return Instance(FiniteMetric(line_distances(line.positions)), line.p, line.p)


def metric_closure(dist_table) -> FiniteMetric:
    """All-pairs shortest-path closure (Floyd-Warshall) of a symmetric table."""
    d = np.array(dist_table, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance table must be square, got shape {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distance table has negative or non-finite entries")
    if np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
        raise ValueError("distance table must be symmetric with zero diagonal")
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return FiniteMetric(d)


# --- JSON -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_vector(v) -> str:
    return "[" + ",".join(_fmt(x) for x in v) + "]"


def _dump_matrix(m) -> str:
    return "[" + ",".join(_dump_vector(row) for row in m) + "]"


def write_instance(obj: Instance | LineInstance) -> str:
    """Serialize with 17 significant digits so that reading back is exact."""
    if isinstance(obj, LineInstance):
        return f'{{"positions":{_dump_vector(obj.positions)},"p":{_dump_vector(obj.probs)}}}\n'
    parts = [f'"distances":{_dump_matrix(obj.dist)}', f'"p":{_dump_vector(obj.p.probs)}']
    if not obj.same_distributions:
        parts.append(f'"q":{_dump_vector(obj.q.probs)}')
    return "{" + ",".join(parts) + "}\n"


def _vector(doc: dict, key: str, n: int | None) -> np.ndarray:
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"not a numeric array ({exc})", key) from None
    if arr.ndim != 1:
        raise InstanceFormatError("must be a flat array", key)
    if n is not None and arr.shape[0] != n:
        raise InstanceFormatError(f"expected {n} entries, got {arr.shape[0]}", key)
    if not np.all(np.isfinite(arr)):
        raise InstanceFormatError("entries must be finite", key)
    return arr


def _check_probs(arr: np.ndarray, key: str):
    if np.any(arr < 0):
        raise InstanceFormatError("entries must be nonnegative", key)
    if not abs(float(np.sum(arr)) - 1.0) <= PROB_SUM_TOL:
        raise InstanceFormatError(f"must sum to 1 (sums to {float(np.sum(arr))!r})", key)


def parse_document(text: str) -> Instance | LineInstance:
    """Parse either JSON encoding, returning the object it describes."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InstanceFormatError("top level must be a JSON object")

    if "positions" in doc and "distances" not in doc:
        pos = _vector(doc, "positions", None)
        if "p" not in doc:
            raise InstanceFormatError("missing key", "p")
        p = _vector(doc, "p", pos.shape[0])
        if np.any(np.diff(pos) <= 0):
            raise InstanceFormatError("must be strictly increasing", "positions")
        _check_probs(p, "p")
        return LineInstance(pos, Distribution(p))

    for key in ("distances", "p"):
        if key not in doc:
            raise InstanceFormatError("missing key", key)
    try:
        dist = np.array(doc["distances"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"not a numeric matrix ({exc})", "distances") from None
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise InstanceFormatError(f"must be square, got shape {dist.shape}", "distances")
    n = dist.shape[0]
    p = _vector(doc, "p", n)
    q = _vector(doc, "q", n) if doc.get("q") is not None else None
    _check_probs(p, "p")
    if q is not None:
        _check_probs(q, "q")
    inst = Instance.from_arrays(dist, p, q)
    report = validate(inst)
    if not report.ok:
        v = report.violations[0]
        raise InstanceFormatError(f"{v.kind} violation at {v.indices} ({v.magnitude!r})", "distances")
    return inst


def read_instance(text: str) -> Instance:
    """Parse instance JSON; line-instance documents are embedded via :func:`line_to_instance`."""
    obj = parse_document(text)
    return line_to_instance(obj) if isinstance(obj, LineInstance) else obj
