"""Flags, their fibers, compatible payoff sets and upper-right corners.

A flag is stored as an ``(I, S)`` array: row ``i`` is the signal
distribution the player would face after playing ``i``. The fiber of a
flag is the polytope of Nature mixed actions producing it; payoffs
compatible with a mixed action ``x`` are ``r(x, y)`` for ``y`` in that
fiber. Everything here is exact: either through enumerated fiber vertices
(up to ten Nature actions) or through linear programs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import lp
from .config import DEFAULT, Tolerances
from .game import GameSpec, maximal_information, payoff_against
from .geometry import as_point, as_simplex

VERTEX_LIMIT = 10


class FlagError(ValueError):
    """The flag is not produced by any Nature mixed action.

    ``gap`` is the smallest l1 distance from the flag to the feasible set and
    ``certificate`` a dual vector ``u`` (over the rows of the fiber system)
    with ``<u, flag> > max_j <u, column_j>``.
    """

    def __init__(self, gap: float, certificate: np.ndarray | None = None):
        super().__init__(f"flag outside feasible set (l1 gap {gap:.3e})")
        self.gap = gap
        self.certificate = certificate


# ---------------------------------------------------------------------------
# the linear system behind a fiber


@dataclass(frozen=True)
class _System:
    M: np.ndarray        # (I*S + 1, J); last row is the simplex constraint
    enum: lp.BasisEnumerator | None


@lru_cache(maxsize=256)
def _system(spec: GameSpec) -> _System:
    I, J, S = spec.signal_law.shape
    M = np.vstack([spec.signal_law.transpose(0, 2, 1).reshape(I * S, J), np.ones((1, J))])
    enum = lp.BasisEnumerator(M, dedup=DEFAULT.vertex_dedup) if J <= VERTEX_LIMIT else None
    return _System(M, enum)


def _rhs(flag: np.ndarray) -> np.ndarray:
    return np.append(flag.ravel(), 1.0)


def check_flag_shape(spec: GameSpec, flag) -> np.ndarray:
    h = np.asarray(flag, dtype=float)
    if h.shape != (spec.n_player, spec.n_signals):
        raise ValueError(f"flag must have shape ({spec.n_player}, {spec.n_signals}), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("flag has non-finite entries")
    return h


def flag_gap(spec: GameSpec, flag, tol: Tolerances = DEFAULT) -> tuple[float, np.ndarray, np.ndarray]:
    """``min_y sum |Hbar(y) - flag|`` over mixed ``y``.

    Returns ``(gap, y, u)`` with ``u`` the multipliers of the flag rows, which
    separate the flag from the feasible set when the gap is positive.
    """
    h = check_flag_shape(spec, flag).ravel()
    J = spec.n_nature
    m = h.size
    Mh = _system(spec).M[:-1]
    # variables: y (J), e+ (m), e- (m)
    A_eq = np.zeros((m + 1, J + 2 * m))
    A_eq[:m, :J] = Mh
    A_eq[:m, J:J + m] = np.eye(m)
    A_eq[:m, J + m:] = -np.eye(m)
    A_eq[m, :J] = 1.0
    b_eq = np.append(h, 1.0)
    c = np.concatenate([np.zeros(J), np.ones(2 * m)])
    sol = lp.solve(lp.LinearProgram(c, A_eq, b_eq), tol)
    y = np.clip(sol.primal[:J], 0.0, None)
    return float(sol.value), y / y.sum(), sol.dual[:m]


def repair_flag(spec: GameSpec, flag, tol: Tolerances = DEFAULT) -> tuple[np.ndarray, float]:
    """Closest feasible flag in l1 (through the minimising ``y``) and the gap that was closed."""
    gap, y, _ = flag_gap(spec, flag, tol)
    return maximal_information(spec, y), gap


# ---------------------------------------------------------------------------
# fibers


@dataclass
class FlagFiber:
    """``{y in simplex : Hbar(y) = flag}``.

    ``vertices`` is filled when Nature has at most ten actions; otherwise
    only LP queries are available. ``repaired_gap`` is nonzero when the
    requested flag was nudged onto the feasible set.
    """

    spec: GameSpec = field(repr=False)
    flag: np.ndarray
    vertices: np.ndarray | None = None
    repaired_gap: float = 0.0

    @property
    def equality_matrix(self) -> np.ndarray:
        return _system(self.spec).M

    @property
    def rhs(self) -> np.ndarray:
        return _rhs(self.flag)

    def contains(self, y, tol: float = DEFAULT.flag) -> bool:
        y = np.asarray(y, dtype=float)
        if y.min() < -tol:
            return False
        return bool(np.abs(self.equality_matrix @ y - self.rhs).max() <= tol)


_fiber_lock = threading.Lock()


@lru_cache(maxsize=4096)
def _cached_vertices(spec: GameSpec, key: bytes) -> np.ndarray:
    flag = np.frombuffer(key, dtype=float).reshape(spec.n_player, spec.n_signals)
    V = _system(spec).enum.vertices(_rhs(flag))
    V.flags.writeable = False
    return V


def fiber(spec: GameSpec, flag, tol: Tolerances = DEFAULT) -> FlagFiber:
    """Fiber of ``flag``; raises :class:`FlagError` when it is empty.

    Flags within ``tol.flag_repair`` (l1) of the feasible set are repaired
    onto it first.
    """
    h = check_flag_shape(spec, flag)
    sysm = _system(spec)
    if sysm.enum is not None:
        with _fiber_lock:
            V = _cached_vertices(spec, np.ascontiguousarray(h).tobytes())
        if V.shape[0]:
            return FlagFiber(spec, h, V)
    gap, y, u = flag_gap(spec, h, tol)
    if gap > tol.flag_repair:
        raise FlagError(gap, u)
    if gap > tol.flag or sysm.enum is not None:
        h = maximal_information(spec, y)
        if sysm.enum is not None:
            V = sysm.enum.vertices(_rhs(h))
            if not V.shape[0]:
                V = y[None, :]
            return FlagFiber(spec, h, V, gap)
    return FlagFiber(spec, h, None, gap)


def _fiber_lp_max(fib: FlagFiber, c: np.ndarray, tol: Tolerances) -> tuple[float, np.ndarray]:
    sol = lp.solve(lp.LinearProgram(c, fib.equality_matrix, fib.rhs, maximize=True), tol)
    if not sol.optimal:
        raise FlagError(np.inf)
    y = np.clip(sol.primal, 0.0, None)
    return sol.value, y / y.sum()


def omega_support(spec: GameSpec, x, flag, direction, tol: Tolerances = DEFAULT) -> float:
    """Support function of the compatible payoff set ``{r(x, y) : y in fiber(flag)}``.

    Always solved as a linear program over the fiber, never through the
    vertex list, so that it can cross-check :func:`upper_right_corner`.
    """
    x = as_simplex(x, spec.n_player)
    direction = as_point(direction, spec.dim)
    fib = fiber(spec, flag, tol)
    c = payoff_against(spec, x) @ direction
    return _fiber_lp_max(fib, c, tol)[0]


@dataclass
class CornerResult:
    corner: np.ndarray
    argmax_y: list[np.ndarray] = field(default_factory=list)


def upper_right_corner(spec: GameSpec, x, flag, tol: Tolerances = DEFAULT) -> CornerResult:
    """Coordinatewise maximum of the compatible payoffs, with one maximiser per coordinate."""
    x = as_simplex(x, spec.n_player)
    fib = fiber(spec, flag, tol)
    P = payoff_against(spec, x)  # (J, d)
    if fib.vertices is not None:
        vals = fib.vertices @ P  # (nv, d)
        best = vals.argmax(axis=0)
        return CornerResult(vals[best, np.arange(spec.dim)], [fib.vertices[b].copy() for b in best])
    corner, wit = [], []
    for k in range(spec.dim):
        v, y = _fiber_lp_max(fib, P[:, k], tol)
        corner.append(v)
        wit.append(y)
    return CornerResult(np.array(corner), wit)


def modified_payoff(spec: GameSpec, x, y, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Corner of the compatible payoffs at the flag of ``y``."""
    return upper_right_corner(spec, x, maximal_information(spec, y), tol).corner


@dataclass
class UrcWitness:
    x: np.ndarray
    flag: np.ndarray
    corner: np.ndarray
    gap: float


def corner_gap(spec: GameSpec, x, flag, tol: Tolerances = DEFAULT) -> tuple[float, np.ndarray]:
    """l1 distance from the corner to the closest compatible payoff.

    Every compatible payoff sits below the corner, so the l1 gap is
    ``sum(corner) - max_y sum_k r_k(x, y)`` over the fiber.
    """
    x = as_simplex(x, spec.n_player)
    res = upper_right_corner(spec, x, flag, tol)
    fib = fiber(spec, flag, tol)
    c = payoff_against(spec, x).sum(axis=1)
    if fib.vertices is not None:
        best = float((fib.vertices @ c).max())
    else:
        best = _fiber_lp_max(fib, c, tol)[0]
    return max(float(res.corner.sum()) - best, 0.0), res.corner


def has_urc_property(spec: GameSpec, x_grid, flag_grid, tol: float = 1e-7) -> tuple[bool, UrcWitness | None]:
    """Check on grids that the corner is itself a compatible payoff.

    Returns ``(True, None)`` when no grid pair violates it (a grid check,
    not a proof) and ``(False, witness)`` at the first violating pair.
    """
    X = np.atleast_2d(np.asarray(x_grid, dtype=float))
    flags = [check_flag_shape(spec, f) for f in flag_grid]
    if X.shape[0] == 0 or not flags:
        raise ValueError("grids must be nonempty")
    for h in flags:
        for x in X:
            gap, corner = corner_gap(spec, x, h)
            if gap > tol:
                return False, UrcWitness(x.copy(), h.copy(), corner, gap)
    return True, None


# ---------------------------------------------------------------------------
# many flags at once


class FlagGrid:
    """The distinct flags of a grid of Nature mixed actions, ready for vectorised corners.

    ``payoff_tensor[f, v, i, k]`` is the payoff ``r_k(i, y)`` at the ``v``-th
    vertex ``y`` of the fiber of flag ``f`` (short fibers are padded by
    repeating their first vertex, which leaves maxima unchanged). The corner
    at ``x`` for every flag is then one contraction followed by a max.
    """

    def __init__(self, spec: GameSpec, y_grid, tol: Tolerances = DEFAULT):
        Y = np.atleast_2d(np.asarray(y_grid, dtype=float))
        if Y.shape[0] == 0:
            raise ValueError("y grid is empty")
        if spec.n_nature > VERTEX_LIMIT:
            raise ValueError(f"flag grids need enumerable fibers (at most {VERTEX_LIMIT} Nature actions)")
        self.spec = spec
        H = np.einsum("gj,ijs->gis", Y, spec.signal_law)
        keys = np.round(H.reshape(len(Y), -1) * 1e9).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)              # keep grid order
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        self.index = rank[inverse.ravel()]     # grid row -> flag index
        self.ys = Y[first[order]]              # representative y per flag
        self.flags = H[first[order]]
        self.vertices = [fiber(spec, h, tol).vertices for h in self.flags]
        vmax = max(v.shape[0] for v in self.vertices)
        F, (I, _, d) = len(self.flags), spec.payoff.shape
        W = np.empty((F, vmax, I, d))
        for f, V in enumerate(self.vertices):
            Wf = np.einsum("vj,ijk->vik", V, spec.payoff)
            W[f, : V.shape[0]] = Wf
            W[f, V.shape[0]:] = Wf[0]
        self.payoff_tensor = W

    def __len__(self) -> int:
        return len(self.flags)

    def corners(self, x) -> np.ndarray:
        """``R(x, flag_f)`` for every flag, shape (F, d)."""
        return np.einsum("i,fvik->fvk", x, self.payoff_tensor).max(axis=1)

    def corners_many(self, X) -> np.ndarray:
        """Corners for a stack of mixed actions, shape (P, F, d)."""
        return np.einsum("pi,fvik->pfvk", X, self.payoff_tensor).max(axis=2)

    def corner_witness(self, x, f: int) -> np.ndarray:
        """Fiber vertex index attaining each coordinate of ``R(x, flag_f)``."""
        return np.einsum("i,vik->vk", x, self.payoff_tensor[f]).argmax(axis=0)
