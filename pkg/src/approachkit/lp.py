"""Dense two-phase simplex and zero-sum matrix games.

The solver targets desk-scale programs (a few hundred variables at most).
Pivoting is fully deterministic: the entering variable is the lowest-index
column with a negative reduced cost, the leaving row comes from a two-pass
ratio test with ties going to the lowest-index basic variable, so identical
inputs always walk the same path. The tableau is periodically rebuilt from
the original data to keep round-off from piling up.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class DegenerateBasisError(ArithmeticError):
    """Raised when the final basis fails the post-solve feasibility recheck."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass
class LinearProgram:
    """``min c.x`` (or max when ``maximize``) subject to

    ``A_eq x = b_eq``, ``A_ub x <= b_ub`` and ``lo <= x <= hi``.

    ``bounds`` is a list of ``(lo, hi)`` pairs; ``None`` means ``[0, inf)`` for
    every variable. Use ``-np.inf`` / ``np.inf`` for open sides.
    """

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: list[tuple[float, float]] | None = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.c.size
        if n < 1:
            raise ValueError("a linear program needs at least one variable")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "inequality")
        if self.bounds is None:
            self.bounds = [(0.0, np.inf)] * n
        if len(self.bounds) != n:
            raise ValueError(f"expected {n} bounds, got {len(self.bounds)}")
        # None means unbounded on that side
        self.bounds = [(-np.inf if lo is None else float(lo), np.inf if hi is None else float(hi))
                       for lo, hi in self.bounds]
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")

    @property
    def n_vars(self) -> int:
        return self.c.size


def _rows(A, b, n, what):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"{what} constraints have shape {A.shape} with rhs {b.shape}; expected (*, {n})")
    return A, b


@dataclass
class LpSolution:
    """Result of :func:`solve`.

    ``dual`` stacks the multipliers of the equality rows then the inequality
    rows, in the sign convention of the minimisation form: at an optimum,
    ``c - A_eq.T @ y_eq - A_ub.T @ y_ub`` is the reduced cost of the bounds
    and ``y_ub <= 0``. For ``maximize`` problems the signs are flipped so
    that they describe the original objective.
    """

    status: LpStatus
    value: float = np.nan
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


# ---------------------------------------------------------------------------
# standard-form core


# entries below this (relative) in an artificial's row after phase 1 are round-off
REDUNDANT_ROW = 1e-7
# rebuild the tableau from the original data this often, and after small pivots
REFACTOR_EVERY = 25
SMALL_PIVOT = 1e-6


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _refactor(T, A_full, b, cost, basis) -> bool:
    """Recompute ``T`` from the original columns for the current basis; False if ``B`` is singular."""
    m = A_full.shape[0]
    B = A_full[:, basis]
    try:
        body = np.linalg.solve(B, np.column_stack([A_full, b]))
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(body)):
        return False
    T[:m] = body
    T[m, :-1] = cost - y @ A_full
    T[m, -1] = -cost[basis] @ body[:, -1]
    T[:m, basis] = np.eye(m)        # exact unit columns for the basic variables
    T[m, basis] = 0.0
    return True


def _bland(T, basis, allowed, tol, piv_tol, max_iter, A_full, b, cost, stop=None):
    """Run simplex iterations on tableau ``T`` (last row = reduced costs).

    The entering column is the lowest-index improving one. The ratio test
    is two-pass: among rows within ``tol`` of the minimum ratio it pivots on
    the largest entry, so degenerate rows holding round-off never get
    picked. ``stop`` ends the run early once the objective drops below it.
    Returns ("optimal" | "unbounded", iterations).
    """
    m = T.shape[0] - 1
    it = since = 0
    while True:
        if stop is not None and -T[m, -1] <= stop:
            return "optimal", it
        rc = T[m, :-1]
        cand = np.flatnonzero((rc < -tol) & allowed)
        if cand.size == 0:
            return "optimal", it
        e = cand[0]
        col = T[:m, e]
        pos = np.flatnonzero(col > piv_tol)
        if pos.size == 0:
            return "unbounded", it
        rhs = T[pos, -1]
        bound = ((np.maximum(rhs, 0.0) + tol) / col[pos]).min()
        ok = pos[rhs / col[pos] <= bound]
        size = col[ok]
        ties = ok[size >= size.max() * (1.0 - 1e-12)]
        r = ties[np.argmin(basis[ties])]
        small = col[r] < SMALL_PIVOT * np.abs(col).max()
        _pivot(T, r, e)
        basis[r] = e
        it += 1
        since += 1
        if small or since >= REFACTOR_EVERY:
            if _refactor(T, A_full, b, cost, basis):
                since = 0
        if it > max_iter:
            raise DegenerateBasisError("simplex iteration cap reached; possible cycling", np.nan)


def _solve_standard(A, b, c, slack_cols, tol: Tolerances):
    """min c.x s.t. A x = b, x >= 0.

    ``slack_cols[r]`` is the index of a column equal to ``e_r`` (or -1); such
    columns seed the initial basis so only the remaining rows need
    artificial variables. Returns (status, x, y, iterations) with ``y`` the
    row duals of the original (unflipped) rows.
    """
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign

    seeds = np.full(m, -1)
    for r in range(m):
        s = slack_cols[r]
        if s >= 0 and sign[r] > 0:
            seeds[r] = s
    art_rows = np.flatnonzero(seeds < 0)
    n_art = art_rows.size
    N = n + n_art

    A_full = np.zeros((m, N))
    A_full[:, :n] = A
    A_full[art_rows, n + np.arange(n_art)] = 1.0
    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = A_full
    T[:m, -1] = b
    seeds[art_rows] = n + np.arange(n_art)
    basis = seeds.copy()
    init_cols = seeds.copy()
    max_iter = 50 * (m + N) + 100
    iters = 0
    feas = tol.lp_feasibility * max(1.0, np.abs(b).max())

    if n_art:
        # phase 1: minimise the sum of artificials
        cost1 = np.zeros(N)
        cost1[n:] = 1.0
        T[m, :] = 0.0
        T[m, n:N] = 1.0
        T[m] -= T[art_rows].sum(axis=0)
        allowed = np.ones(N, dtype=bool)
        _, it = _bland(T, basis, allowed, tol.lp_optimality, tol.lp_pivot, max_iter, A_full, b, cost1, stop=feas)
        iters += it
        _refactor(T, A_full, b, cost1, basis)
        if -T[m, -1] > feas:
            return LpStatus.INFEASIBLE, None, None, iters
        # drive zero-level artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= n:
                row = np.abs(T[r, :n])
                k = int(row.argmax())
                if row[k] > REDUNDANT_ROW * max(1.0, np.abs(T[:m, :n]).max()):
                    _pivot(T, r, k)
                    basis[r] = k
                else:
                    # redundant row: pivoting on round-off would wreck the tableau
                    T[r, :n] = 0.0

    # phase 2
    cost = np.zeros(N)
    cost[:n] = c
    T[m, :] = 0.0
    T[m, :N] = cost
    T[m] -= cost[basis] @ T[:m]
    allowed = np.zeros(N, dtype=bool)
    allowed[:n] = True
    status, it = _bland(T, basis, allowed, tol.lp_optimality, tol.lp_pivot, max_iter, A_full, b, cost)
    iters += it
    if status == "unbounded":
        return LpStatus.UNBOUNDED, None, None, iters

    # refactorise the final basis on the original data to shed accumulated pivot error
    B = A_full[:, basis]
    try:
        xb = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        xb = T[:m, -1]
        y = cost[basis] @ T[:m, init_cols]
    if xb.min() < -tol.lp_report * (1.0 + np.abs(xb).max()):
        xb = T[:m, -1]
    x = np.zeros(N)
    x[basis] = np.clip(xb, 0.0, None)
    return LpStatus.OPTIMAL, x[:n], y * sign, iters


# ---------------------------------------------------------------------------
# public API


def solve(lp: LinearProgram, tol: Tolerances = DEFAULT) -> LpSolution:
    """Solve a :class:`LinearProgram` with the two-phase simplex."""
    n = lp.n_vars
    lo = np.array([bd[0] for bd in lp.bounds], dtype=float)
    hi = np.array([bd[1] for bd in lp.bounds], dtype=float)

    # x = offset + S @ z, z >= 0
    offset = np.zeros(n)
    cols: list[tuple[int, float]] = []  # (original index, sign) per z column
    upper_rows: list[tuple[int, float]] = []  # (z column, cap)
    for j in range(n):
        if np.isfinite(lo[j]):
            offset[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                upper_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            offset[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)
    S = np.zeros((n, nz))
    for k, (j, s) in enumerate(cols):
        S[j, k] = s

    m_eq = lp.A_eq.shape[0]
    m_ub = lp.A_ub.shape[0]
    m_cap = len(upper_rows)
    n_slack = m_ub + m_cap
    m = m_eq + m_ub + m_cap
    A = np.zeros((m, nz + n_slack))
    b = np.zeros(m)
    A[:m_eq, :nz] = lp.A_eq @ S
    b[:m_eq] = lp.b_eq - lp.A_eq @ offset
    A[m_eq:m_eq + m_ub, :nz] = lp.A_ub @ S
    b[m_eq:m_eq + m_ub] = lp.b_ub - lp.A_ub @ offset
    for k, (zc, cap) in enumerate(upper_rows):
        A[m_eq + m_ub + k, zc] = 1.0
        b[m_eq + m_ub + k] = cap
    slack_cols = np.full(m, -1)
    for k in range(n_slack):
        A[m_eq + k, nz + k] = 1.0
        slack_cols[m_eq + k] = nz + k

    sgn = -1.0 if lp.maximize else 1.0
    c_std = np.zeros(nz + n_slack)
    c_std[:nz] = S.T @ (sgn * lp.c)

    if m == 0:
        # only bounds: optimum at z = 0 unless some cost is negative
        if np.any(c_std < -tol.lp_optimality):
            return LpSolution(LpStatus.UNBOUNDED)
        x = offset.copy()
        return LpSolution(LpStatus.OPTIMAL, float(lp.c @ x), x, np.zeros(0), 0)

    status, z, y, iters = _solve_standard(A, b, c_std, slack_cols, tol)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, iterations=iters)
    x = offset + S @ z[:nz]
    _recheck(lp, x, tol)
    dual = sgn * y[:m_eq + m_ub]
    return LpSolution(LpStatus.OPTIMAL, float(lp.c @ x), x, dual, iters)


def _recheck(lp: LinearProgram, x: np.ndarray, tol: Tolerances) -> None:
    scale = 1.0 + np.abs(x).max(initial=0.0)
    res = 0.0
    if lp.A_eq.size:
        res = max(res, np.abs(lp.A_eq @ x - lp.b_eq).max())
    if lp.A_ub.size:
        res = max(res, (lp.A_ub @ x - lp.b_ub).max(initial=0.0))
    lo = np.array([bd[0] for bd in lp.bounds])
    hi = np.array([bd[1] for bd in lp.bounds])
    res = max(res, (lo - x).max(initial=0.0), (x - hi).max(initial=0.0))
    if res > tol.lp_report * scale:
        raise DegenerateBasisError("final basis violates the constraints", res)


def zero_sum_value(G, tol: Tolerances = DEFAULT) -> tuple[float, np.ndarray, np.ndarray]:
    """Value of the zero-sum game where the row player minimises ``x' G y``.

    Returns ``(value, x_opt, y_opt)``. The LP is ``min v`` subject to
    ``G' x <= v 1``, ``x`` in the simplex, with ``v`` free; Nature's optimal
    strategy is read off the multipliers of the ``J`` inequality rows. When
    ``J > I`` the transposed game is solved instead, so the basis never has
    more than ``min(I, J) + 1`` rows.
    Games with a pure saddle point are answered without the LP (first
    minimising row, first maximising column).
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if not np.all(np.isfinite(G)):
        raise ValueError("game matrix has non-finite entries")
    I, J = G.shape
    # a pure saddle point needs no LP
    row_max = G.max(axis=1)
    col_min = G.min(axis=0)
    i0 = int(np.argmin(row_max))
    j0 = int(np.argmax(col_min))
    if row_max[i0] - col_min[j0] <= tol.lp_optimality * (1.0 + abs(row_max[i0])):
        x = np.zeros(I)
        y = np.zeros(J)
        x[i0] = 1.0
        y[j0] = 1.0
        return float(row_max[i0]), x, y
    if J > I:
        # the basis has one row per column of G; keep it small by solving Nature's side
        w, y, x = _zero_sum_lp(-G.T, tol)
        return -w, x, y
    return _zero_sum_lp(G, tol)


def _zero_sum_lp(G: np.ndarray, tol: Tolerances) -> tuple[float, np.ndarray, np.ndarray]:
    I, J = G.shape
    # columns: x (I), v+ , v-, slacks (J); rows: sum(x) = 1, G'x - v + s = 0
    n = I + 2 + J
    A = np.zeros((J + 1, n))
    A[0, :I] = 1.0
    A[1:, :I] = G.T
    A[1:, I] = -1.0
    A[1:, I + 1] = 1.0
    A[1:, I + 2:] = np.eye(J)
    b = np.zeros(J + 1)
    b[0] = 1.0
    c = np.zeros(n)
    c[I] = 1.0
    c[I + 1] = -1.0
    slack_cols = np.concatenate([[-1], np.arange(I + 2, n)])
    status, z, duals, _ = _solve_standard(A, b, c, slack_cols, tol)
    if status is not LpStatus.OPTIMAL:
        raise DegenerateBasisError(f"zero-sum LP ended {status.value}", np.nan)
    value = float(z[I] - z[I + 1])
    res = max(abs(z[:I].sum() - 1.0), (G.T @ z[:I] - value).max(), -z[:I].min())
    if res > tol.lp_report * (1.0 + abs(value)):
        raise DegenerateBasisError("zero-sum basis violates the constraints", res)
    sol = LpSolution(LpStatus.OPTIMAL, value, np.append(z[:I], value), duals)
    x = _clean_simplex(sol.primal[:I])
    y = _clean_simplex(-sol.dual[1:])
    return float(sol.value), x, y


def _clean_simplex(w: np.ndarray) -> np.ndarray:
    w = np.clip(w, 0.0, None)
    s = w.sum()
    if s <= 0:
        return np.full(w.size, 1.0 / w.size)
    return w / s


class BasisEnumerator:
    """Vertices of ``{y >= 0 : M y = h}`` for a fixed ``M`` and many right-hand sides.

    Every subset of ``rank(M)`` columns with a nonsingular square block is
    factorised once; a vertex query is then one batched matrix product.
    """

    def __init__(self, M, tol: float = 1e-9, dedup: float = 1e-7):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.M = M
        self.tol = tol
        self.dedup = dedup
        m, n = M.shape
        sv = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
        self.rank = int((sv > tol * max(1.0, sv[0])).sum()) if sv.size else 0
        self.rows = _independent_rows(M, self.rank, tol) if self.rank else []
        subsets, invs = [], []
        if self.rank:
            Mr = M[self.rows]
            for cols in itertools.combinations(range(n), self.rank):
                sub = Mr[:, cols]
                if abs(np.linalg.det(sub)) < 1e-12:
                    continue
                subsets.append(cols)
                invs.append(np.linalg.inv(sub))
        self.subsets = np.array(subsets, dtype=int).reshape(len(subsets), self.rank)
        self.inverses = np.array(invs).reshape(len(invs), self.rank, self.rank)

    @property
    def n_columns(self) -> int:
        return self.M.shape[1]

    def vertices(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        n = self.n_columns
        if self.rank == 0:
            return np.zeros((1, n)) if np.allclose(h, 0.0, atol=self.dedup) else np.zeros((0, n))
        if not len(self.subsets):
            return np.zeros((0, n))
        yb = self.inverses @ h[self.rows]                      # (C, rank)
        keep = yb.min(axis=1) >= -self.tol
        Y = np.zeros((int(keep.sum()), n))
        rows_idx = np.arange(Y.shape[0])[:, None]
        Y[rows_idx, self.subsets[keep]] = np.clip(yb[keep], 0.0, None)
        if Y.shape[0]:
            ok = np.abs(Y @ self.M.T - h).max(axis=1) <= self.dedup
            Y = Y[ok]
        out: list[np.ndarray] = []
        for y in Y:
            if not any(np.abs(y - v).max() <= self.dedup for v in out):
                out.append(y)
        return np.array(out) if out else np.zeros((0, n))


def basic_feasible_solutions(M, h, tol: float = 1e-9, dedup: float = 1e-7) -> np.ndarray:
    """All vertices of ``{y >= 0 : M y = h}`` by basis enumeration.

    Each subset of ``rank(M)`` columns with a nonsingular submatrix gives a
    candidate; candidates that are nonnegative and solve the full system
    (residual below ``dedup``) are kept, duplicates merged. Rows are returned
    in a deterministic order (lexicographic in the chosen column subsets).
    """
    return BasisEnumerator(M, tol, dedup).vertices(h)


def _independent_rows(M, rank, tol):
    chosen: list[int] = []
    for r in range(M.shape[0]):
        trial = M[chosen + [r]]
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(M).max())) == len(chosen) + 1:
            chosen.append(r)
            if len(chosen) == rank:
                break
    return chosen
