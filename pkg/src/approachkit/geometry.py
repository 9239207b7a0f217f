"""Target sets, Euclidean projections, distances and support functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import DEFAULT, Tolerances


class ProjectionError(RuntimeError):
    """Alternating projections did not settle within the sweep budget."""

    def __init__(self, best: np.ndarray, residual: float, sweeps: int):
        super().__init__(f"projection did not converge after {sweeps} sweeps (residual {residual:.3e})")
        self.best = best
        self.residual = residual
        self.sweeps = sweeps


def as_point(p, dim: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"a point must be a flat vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    if dim is not None and p.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.size}")
    return p


def as_simplex(w, size: int | None = None, tol: float = DEFAULT.simplex_sum) -> np.ndarray:
    """Validate a mixed action: nonnegative entries summing to one."""
    w = as_point(w, size)
    if w.min() < -tol or abs(w.sum() - 1.0) > tol:
        raise ValueError(f"not a probability vector: {w}")
    return np.clip(w, 0.0, None)


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def pure(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[k] = 1.0
    return e


SIMPLEX_GRID_LIMIT = 1_000_000


def simplex_grid(n: int, denominator: int) -> np.ndarray:
    """All points of the simplex in ``R^n`` with coordinates ``k / denominator``.

    Rows come in lexicographic order of the numerators, largest first
    coordinate last (so pure actions appear among the rows).
    """
    if n < 1 or denominator < 1:
        raise ValueError("need n >= 1 and denominator >= 1")
    size = math.comb(denominator + n - 1, n - 1)
    if size > SIMPLEX_GRID_LIMIT:
        raise ValueError(f"simplex grid with {size} points (n={n}, denominator={denominator}) is too large; "
                         "pass a coarser grid explicitly")
    out: list[tuple[int, ...]] = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for k in range(left + 1):
            rec(prefix + (k,), left - k, slots - 1)

    rec((), denominator, n)
    return np.array(out, dtype=float) / denominator


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# ---------------------------------------------------------------------------
# target sets


@dataclass(frozen=True)
class HalfSpace:
    """``{w : <w, a> <= b}``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = as_point(self.a)
        if not np.any(a != 0):
            raise ValueError("half-space direction must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class Orthant:
    """``{w : w <= a}`` componentwise."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))

    @property
    def dim(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class Polytope:
    """``{w : A w <= b}`` with one row per half-space."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] < 1 or A.shape[0] != b.size:
            raise ValueError(f"polytope needs >= 1 row and matching offsets, got {A.shape} / {b.shape}")
        if np.any(np.abs(A).max(axis=1) == 0):
            raise ValueError("polytope rows must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class SupportSampled:
    """A convex set known through its support function on finitely many unit directions.

    As a set it is the outer polytope ``{w : <w, s_k> <= values_k}``.
    """

    directions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.directions, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if D.shape[0] != v.size or D.shape[0] < 1:
            raise ValueError("need one support value per direction")
        if np.abs(np.linalg.norm(D, axis=1) - 1.0).max() > DEFAULT.unit_norm:
            raise ValueError("support directions must have unit norm")
        if not np.all(np.isfinite(v)):
            raise ValueError("support values must be finite")
        object.__setattr__(self, "directions", D)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def as_polytope(self) -> Polytope:
        return Polytope(self.directions, self.values)


TargetSet = Union[HalfSpace, Orthant, Polytope, SupportSampled]


def target_to_dict(t: TargetSet) -> dict:
    if isinstance(t, HalfSpace):
        return {"type": "halfspace", "a": t.a.tolist(), "b": t.b}
    if isinstance(t, Orthant):
        return {"type": "orthant", "a": t.a.tolist()}
    if isinstance(t, Polytope):
        return {"type": "polytope", "A": t.A.tolist(), "b": t.b.tolist()}
    if isinstance(t, SupportSampled):
        return {"type": "support", "directions": t.directions.tolist(), "values": t.values.tolist()}
    raise TypeError(type(t).__name__)


def target_from_dict(data: dict) -> TargetSet:
    """Inverse of :func:`target_to_dict`; unknown types and missing keys raise ``ValueError``."""
    if not isinstance(data, dict) or "type" not in data:
        raise ValueError("target must be an object with a 'type' key")
    kind = data["type"]
    need = {"halfspace": ("a", "b"), "orthant": ("a",), "polytope": ("A", "b"), "support": ("directions", "values")}
    if kind not in need:
        raise ValueError(f"unknown target type {kind!r}; expected one of {sorted(need)}")
    missing = [k for k in need[kind] if k not in data]
    if missing:
        raise ValueError(f"{kind} target is missing {missing}")
    if kind == "halfspace":
        return HalfSpace(data["a"], data["b"])
    if kind == "orthant":
        return Orthant(data["a"])
    if kind == "polytope":
        return Polytope(data["A"], data["b"])
    return SupportSampled(data["directions"], data["values"])


def contains(c: TargetSet, p, tol: float = 1e-9) -> bool:
    p = as_point(p, c.dim)
    if isinstance(c, HalfSpace):
        return float(p @ c.a) <= c.b + tol
    if isinstance(c, Orthant):
        return bool(np.all(p <= c.a + tol))
    if isinstance(c, SupportSampled):
        c = c.as_polytope()
    return bool(np.all(c.A @ p <= c.b + tol))


# ---------------------------------------------------------------------------
# projections and distances


def project_orthant(p, a) -> np.ndarray:
    p = as_point(p)
    a = as_point(a, p.size)
    return np.minimum(p, a)


def dist_orthant(p, a) -> float:
    p = as_point(p)
    a = as_point(a, p.size)
    return float(np.sqrt(np.sum(np.maximum(p - a, 0.0) ** 2)))


def project_halfspace(p, a, b) -> np.ndarray:
    p = as_point(p)
    a = as_point(a, p.size)
    excess = max(float(p @ a) - b, 0.0)
    return p - excess / float(a @ a) * a


def _dykstra(p, A, b, tol, max_sweeps):
    L = A.shape[0]
    norms2 = np.einsum("ij,ij->i", A, A)
    x = p.copy()
    incs = np.zeros((L, p.size))
    for sweep in range(1, max_sweeps + 1):
        x_prev, incs_prev = x.copy(), incs.copy()
        for k in range(L):
            z = x + incs[k]
            excess = A[k] @ z - b[k]
            x = z - (excess / norms2[k]) * A[k] if excess > 0 else z
            incs[k] = z - x
        viol = max(float((A @ x - b).max()), 0.0)
        # x can stall for a sweep while the corrections still move
        step = float(np.linalg.norm(x - x_prev)) + float(np.abs(incs - incs_prev).max())
        if viol <= tol and step <= tol:
            return x
    raise ProjectionError(x, max(viol, step), max_sweeps)


def project_target(p, c: TargetSet, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``c``.

    Half-spaces and orthants are closed form. Polytopes (and sampled
    support sets, through their outer polytope) go through Dykstra's
    alternating projections over the defining half-spaces; on failure a
    :class:`ProjectionError` carries the last iterate.
    """
    p = as_point(p, c.dim)
    if isinstance(c, HalfSpace):
        return project_halfspace(p, c.a, c.b)
    if isinstance(c, Orthant):
        return project_orthant(p, c.a)
    if isinstance(c, SupportSampled):
        c = c.as_polytope()
    if np.all(c.A @ p <= c.b):
        return p.copy()
    return _dykstra(p, c.A, c.b, tol.projection, tol.projection_max_sweeps)


def distance(p, c: TargetSet, tol: Tolerances = DEFAULT) -> float:
    if isinstance(c, Orthant):
        return dist_orthant(p, c.a)
    p = as_point(p, c.dim)
    return float(np.linalg.norm(p - project_target(p, c, tol)))


# ---------------------------------------------------------------------------
# support functions


def support_value(points, s) -> float:
    """``max_k <points_k, s>`` for a nonempty cloud."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0 or P.size == 0:
        raise ValueError("support of an empty point set is undefined")
    s = as_point(s, P.shape[1])
    if abs(np.linalg.norm(s) - 1.0) > DEFAULT.unit_norm:
        raise ValueError("support direction must have unit norm")
    return float((P @ s).max())


def support_values(points, directions) -> np.ndarray:
    """Support function of a cloud on every row of ``directions``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("support of an empty point set is undefined")
    return (np.asarray(directions, dtype=float) @ P.T).max(axis=1)


@dataclass(frozen=True)
class DirectionGrid:
    """Finite set of unit directions standing in for the unit sphere."""

    directions: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if D.shape[0] < 1:
            raise ValueError("direction grid is empty")
        if np.abs(np.linalg.norm(D, axis=1) - 1.0).max() > DEFAULT.unit_norm:
            raise ValueError("grid directions must have unit norm")
        object.__setattr__(self, "directions", D)

    @property
    def count(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @classmethod
    def circle(cls, count: int = 64, phase: float = 0.0) -> "DirectionGrid":
        """``count`` equally spaced angles on the unit circle."""
        t = phase + 2.0 * np.pi * np.arange(count) / count
        return cls(np.column_stack([np.cos(t), np.sin(t)]))

    @classmethod
    def cube26(cls) -> "DirectionGrid":
        """The 26 normalised nonzero vectors of ``{-1, 0, 1}^3``."""
        pts = np.array(
            [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)],
            dtype=float,
        )
        return cls(pts / np.linalg.norm(pts, axis=1, keepdims=True))

    @classmethod
    def sphere(cls, n_polar: int, n_azimuth: int) -> "DirectionGrid":
        """Product-angle grid on the 2-sphere (poles included once)."""
        rows = [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]
        for a in range(1, n_polar):
            th = np.pi * a / n_polar
            for b in range(n_azimuth):
                ph = 2.0 * np.pi * b / n_azimuth
                rows.append((np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)))
        return cls(np.array(rows))

    @classmethod
    def default(cls, dim: int) -> "DirectionGrid":
        if dim == 2:
            return cls.circle(64)
        if dim == 3:
            return cls.cube26()
        raise ValueError("default direction grids exist for d = 2 and d = 3 only")


def polygon_vertices(poly: Polytope, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a bounded 2-D polytope, counter-clockwise.

    Brute force over pairs of boundary lines; fine for a few hundred rows.
    """
    if poly.dim != 2:
        raise ValueError("polygon_vertices expects a 2-D polytope")
    A, b = poly.A, poly.b
    pts = []
    L = A.shape[0]
    for i in range(L):
        for j in range(i + 1, L):
            M = A[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, b[[i, j]])
            if np.all(A @ v <= b + tol * (1 + np.abs(b))):
                pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    P = np.unique(np.round(np.array(pts), 12), axis=0)
    c = P.mean(axis=0)
    order = np.argsort(np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0]))
    return P[order]
