"""Checks of approachability conditions, with certificates.

Two families of checks live here.

*Dual checks* work flag by flag: for each flag ``h`` in a grid they look
for a mixed action ``x`` whose compatible payoffs all lie in the target.
*Primal checks* work direction by direction: for each containing
half-space of an orthant they test one-shot approachability under the
corner payoff ``R(x, Hbar(y))``.

Both are exact linear programs on their grids. A failure always comes
with a Nature mixed action whose flag is then re-checked on its own, so
``NotApproachable`` verdicts are certified; passes over a grid are
labelled ``NotFalsifiedOnGrid`` unless the grid provably covers every flag.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import lp
from .config import DEFAULT, Tolerances
from .game import GameSpec, maximal_information, payoff_bound
from .geometry import HalfSpace, Orthant, Polytope, SupportSampled, TargetSet, as_point, project_simplex, simplex_grid, uniform
from .monitoring import FlagGrid, fiber

GRID_DENOMINATOR = 32


class Verdict(enum.Enum):
    APPROACHABLE = "Approachable"
    NOT_APPROACHABLE = "NotApproachable"
    NOT_FALSIFIED = "NotFalsifiedOnGrid"


@dataclass
class ConditionReport:
    """Outcome of a check.

    ``margin`` is positive on passes (slack left) and negative on failures
    (size of the violation).
    """

    verdict: Verdict
    margin: float
    witness_x: np.ndarray | None = None
    counter_y: np.ndarray | None = None
    separating_direction: np.ndarray | None = None
    method: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict is Verdict.NOT_APPROACHABLE:
            if self.counter_y is None and self.separating_direction is None:
                raise ValueError("a negative verdict needs a counter-example")
        elif self.witness_x is None:
            raise ValueError("a positive verdict needs a witness mixed action")

    @property
    def passed(self) -> bool:
        return self.verdict is not Verdict.NOT_APPROACHABLE

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, dict):
                return {k: conv(w) for k, w in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(w) for w in v]
            return v

        return {
            "verdict": self.verdict.value,
            "margin": float(self.margin),
            "witness_x": conv(self.witness_x),
            "counter_y": conv(self.counter_y),
            "separating_direction": conv(self.separating_direction),
            "method": conv(self.method),
            "details": conv(self.details),
        }


class SaddleSolverError(RuntimeError):
    """The inner solver hit its iteration cap; carries its best point."""

    def __init__(self, best_x: np.ndarray, margin: float):
        super().__init__(f"saddle-point solver stopped early (margin {margin:.3e})")
        self.best_x = best_x
        self.margin = margin


def default_y_grid(spec: GameSpec, denominator: int = GRID_DENOMINATOR) -> np.ndarray:
    return simplex_grid(spec.n_nature, denominator)


def default_q_grid(dim: int, denominator: int = GRID_DENOMINATOR) -> np.ndarray:
    return simplex_grid(dim, denominator)


def _pure_flags_coincide(spec: GameSpec, tol: float) -> bool:
    """True when every Nature action yields the same flag, so the flag set is a single point."""
    H = spec.signal_law
    return bool(np.abs(H - H[:, :1, :]).max() <= tol)


def _grid_has_pure_actions(Y: np.ndarray, tol: float = 1e-12) -> bool:
    return all(np.any(np.abs(Y - np.eye(Y.shape[1])[j]).max(axis=1) <= tol) for j in range(Y.shape[1]))


# ---------------------------------------------------------------------------
# half-spaces under plain payoffs


def _scalarized(payoff: np.ndarray, a: np.ndarray) -> np.ndarray:
    return payoff @ a


def one_shot_halfspace(spec: GameSpec, hs: HalfSpace, tol: Tolerances = DEFAULT) -> ConditionReport:
    """Is ``{<w, a> <= b}`` one-shot approachable for the payoffs alone?

    Only ``spec.payoff`` is read; the signal law plays no role.
    """
    a = as_point(hs.a, spec.dim)
    v, x, y = lp.zero_sum_value(_scalarized(spec.payoff, a), tol)
    margin = hs.b - v
    method = {"check": "one_shot_halfspace", "solver": "zero-sum LP"}
    if margin >= -tol.condition:
        return ConditionReport(Verdict.APPROACHABLE, margin, witness_x=x, counter_y=y, method=method, details={"value": v})
    return ConditionReport(Verdict.NOT_APPROACHABLE, margin, witness_x=x, counter_y=y, separating_direction=a,
                           method=method, details={"value": v})


def nature_excludes_halfspace(spec: GameSpec, hs: HalfSpace, shrink: float = 0.5,
                              tol: Tolerances = DEFAULT) -> ConditionReport:
    """Can Nature force ``<r, a> >= b + shrink * delta`` in one shot?

    ``delta`` is the violation of the half-space itself. Solved on the
    transposed game with Nature as the minimiser of ``-<r, a>``.
    """
    a = as_point(hs.a, spec.dim)
    G = _scalarized(spec.payoff, a)
    delta = max(-one_shot_halfspace(spec, hs, tol).margin, 0.0)
    level = hs.b + shrink * delta
    w, y, _ = lp.zero_sum_value(-G.T, tol)
    margin = -w - level
    method = {"check": "nature_excludes_halfspace", "shrink": shrink}
    if delta > 0 and margin >= -tol.condition:
        return ConditionReport(Verdict.APPROACHABLE, margin, witness_x=y, method=method, details={"delta": delta})
    return ConditionReport(Verdict.NOT_APPROACHABLE, margin, counter_y=y, separating_direction=-a,
                           method=method, details={"delta": delta})


# ---------------------------------------------------------------------------
# dual condition


def _flag_columns(Wf: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix ``G[i, (v, l)] = <r(i, vertex_v), A_l> - b_l`` for one fiber."""
    I = Wf.shape[1]
    return (np.einsum("vik,lk->ivl", Wf, A) - b).reshape(I, -1)


def _flag_value(Wf: np.ndarray, A: np.ndarray, b: np.ndarray, tol: Tolerances):
    """``min_x max_{v, l} <r(x, v), A_l> - b_l`` with the minimiser and row weights."""
    v, x, mix = lp.zero_sum_value(_flag_columns(Wf, A, b), tol)
    q = mix.reshape(Wf.shape[0], A.shape[0]).sum(axis=0)
    return v, x, q


def _fiber_tensor(spec: GameSpec, y, tol: Tolerances) -> np.ndarray:
    V = fiber(spec, maximal_information(spec, y), tol).vertices
    return np.einsum("vj,ijk->vik", V, spec.payoff)


def _rows_value(fg: FlagGrid, X: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``max_l max_v <r(x, v), A_l> - b_l`` for each x in X and flag f, shape (P, F)."""
    S = np.einsum("pi,fvik,lk->pfvl", X, fg.payoff_tensor, A) - b
    return S.max(axis=(2, 3))


def _ascend(y0: np.ndarray, f0: float, evaluate, step: float, min_step: float, budget: int):
    """Pattern search on the simplex: move mass between pairs of coordinates while the value rises."""
    y, best = y0.copy(), f0
    J = y.size
    calls = 0
    while step >= min_step and calls < budget:
        improved = False
        for i in range(J):
            for j in range(J):
                if i == j or y[j] <= 0:
                    continue
                z = y.copy()
                move = min(step, z[j])
                z[i] += move
                z[j] -= move
                val = evaluate(z)
                calls += 1
                if val > best + 1e-12:
                    y, best, improved = z, val, True
        if not improved:
            step /= 2
    return y, best


def _dual_rows(spec: GameSpec, A: np.ndarray, b: np.ndarray, Y: np.ndarray, tol: Tolerances,
               refine: bool, kind: str) -> ConditionReport:
    """Dual check for ``{w : A w <= b}`` over the flags of ``Y``."""
    fg = FlagGrid(spec, Y, tol)
    I = spec.n_player
    pool = np.vstack([np.eye(I), uniform(I)[None, :]])
    upper = _rows_value(fg, pool, A, b)             # (P, F)
    best_pool = upper.argmin(axis=0)
    ub = upper[best_pool, np.arange(len(fg))]
    values = np.full(len(fg), np.nan)
    witnesses: dict[int, np.ndarray] = {}
    # exact LPs in decreasing order of the pool bound; stop once no bound can beat the worst value
    order = np.argsort(-ub, kind="stable")
    worst = -np.inf
    for rank, f in enumerate(order):
        if ub[f] <= worst or (rank >= 8 and ub[f] <= tol.condition):
            break
        nv = fg.vertices[f].shape[0]
        v, x, _ = _flag_value(fg.payoff_tensor[f, :nv], A, b, tol)
        values[f] = v
        witnesses[f] = x
        worst = max(worst, v)
    solved = np.flatnonzero(~np.isnan(values))
    f_star = int(solved[np.argmax(values[solved])])
    worst, y_star = float(values[f_star]), fg.ys[f_star]
    x_star = witnesses.get(f_star, pool[best_pool[f_star]])
    refined = False

    def evaluate(y):
        return _flag_value(_fiber_tensor(spec, y, tol), A, b, tol)

    # each row on its own: Nature's optimal mix in the scalar game <A_l, r>
    # is usually off the grid, and its flag violates whenever that row's value exceeds b_l
    for row in A:
        y_row = lp.zero_sum_value(_scalarized(spec.payoff, row), tol)[2]
        v, x, _ = evaluate(y_row)
        if v > worst:
            worst, y_star, x_star, refined = float(v), y_row, x, True

    if worst <= tol.condition and refine and len(fg) > 1:
        starts = solved[np.argsort(-values[solved], kind="stable")[:3]]
        for f in starts:
            y1, v1 = _ascend(fg.ys[f], values[f], lambda y: evaluate(y)[0], 1.0 / (2 * GRID_DENOMINATOR),
                             1.0 / 4096, 400)
            if v1 > worst:
                worst, y_star, refined = float(v1), y1, True
                x_star = evaluate(y1)[1]
            if worst > tol.condition:
                break

    method = {"check": f"dual_condition/{kind}", "flags": len(fg), "grid_points": int(Y.shape[0]),
              "solver": "per-flag zero-sum LP", "refined": refined}
    if worst > tol.condition:
        return ConditionReport(Verdict.NOT_APPROACHABLE, -worst, counter_y=y_star, method=method,
                               details={"counter_flag": maximal_information(spec, y_star)})
    exact = _pure_flags_coincide(spec, tol.flag) and _grid_has_pure_actions(Y)
    verdict = Verdict.APPROACHABLE if exact else Verdict.NOT_FALSIFIED
    return ConditionReport(verdict, -worst, witness_x=x_star, method=method,
                           details={"worst_flag_y": y_star})


def _dual_halfspace(spec: GameSpec, hs: HalfSpace, Y: np.ndarray, tol: Tolerances) -> ConditionReport:
    """One mixed action that works for the union of all grid fibers settles every flag at once."""
    fg = FlagGrid(spec, Y, tol)
    a = as_point(hs.a, spec.dim)
    cols = []
    for f, V in enumerate(fg.vertices):
        cols.append(fg.payoff_tensor[f, : V.shape[0]] @ a)     # (nv, I)
    G = np.unique(np.round(np.vstack(cols), 12), axis=0).T   # (I, distinct columns)
    v, x, _ = lp.zero_sum_value(G, tol)
    method = {"check": "dual_condition/halfspace", "flags": len(fg), "grid_points": int(Y.shape[0]),
              "solver": "zero-sum LP over all fiber vertices"}
    if v <= hs.b + tol.condition:
        # every grid fiber vertex is covered; with the pure actions on the grid this covers all of Nature's simplex
        verdict = Verdict.APPROACHABLE if _grid_has_pure_actions(Y) else Verdict.NOT_FALSIFIED
        return ConditionReport(verdict, hs.b - v, witness_x=x, method=method)
    # Nature's optimal strategy against the plain scalar game names a violating flag
    _, _, y_star = lp.zero_sum_value(_scalarized(spec.payoff, a), tol)
    D, x_f, _ = _flag_value(_fiber_tensor(spec, y_star, tol), a[None, :], np.array([hs.b]), tol)
    if D > tol.condition:
        return ConditionReport(Verdict.NOT_APPROACHABLE, -D, counter_y=y_star, separating_direction=a, method=method,
                               details={"counter_flag": maximal_information(spec, y_star)})
    return ConditionReport(Verdict.NOT_FALSIFIED, -D, witness_x=x_f, method=method,
                           details={"note": "grid LP exceeded the bound but no single flag was found violating"})


def dual_condition(spec: GameSpec, target: TargetSet, y_grid=None, tol: Tolerances = DEFAULT,
                   refine: bool = True) -> ConditionReport:
    """For each flag of the grid, is there ``x`` with every compatible payoff in the target?

    Orthants, polytopes and sampled-support sets share one path: per flag,
    the smallest worst-row excess ``min_x max_{vertex, row}`` is a zero-sum
    game value. When the grid shows no violation, a pattern search over
    Nature's simplex looks for off-grid flags near the tightest ones.
    """
    Y = default_y_grid(spec) if y_grid is None else np.atleast_2d(np.asarray(y_grid, dtype=float))
    if Y.shape[0] == 0:
        raise ValueError("y grid is empty")
    if isinstance(target, HalfSpace):
        return _dual_halfspace(spec, target, Y, tol)
    if isinstance(target, Orthant):
        a = as_point(target.a, spec.dim)
        return _dual_rows(spec, np.eye(spec.dim), a, Y, tol, refine, "orthant")
    if isinstance(target, SupportSampled):
        target = target.as_polytope()
    if isinstance(target, Polytope):
        if target.dim != spec.dim:
            raise ValueError("polytope dimension differs from the payoff dimension")
        return _dual_rows(spec, target.A, target.b, Y, tol, refine, "polytope")
    raise TypeError(f"unsupported target {type(target).__name__}")


# ---------------------------------------------------------------------------
# half-spaces under corner payoffs


class CornerHalfspaceSolver:
    """``min_x max_f <q, R(x, f)>`` over the flags of a :class:`FlagGrid`, solved exactly.

    Kelley-style active set: the LP over a few flags gives ``x``; the flag
    most violated at ``x`` joins the set; repeat until none is. The LP has
    one epigraph variable per (active flag, coordinate) and a shared level
    ``z``. Its multipliers on the level rows mix the active flags; by
    concavity of the corner payoff in Nature's action the matching mixture
    of Nature actions is a genuine off-grid counter-example.
    """

    def __init__(self, spec: GameSpec, fg: FlagGrid, tol: Tolerances = DEFAULT, max_rounds: int = 500):
        self.spec = spec
        self.fg = fg
        self.tol = tol
        self.max_rounds = max_rounds
        self.bound = float(np.abs(spec.payoff).max()) + 1.0
        self.extra: list[tuple[np.ndarray, np.ndarray]] = []   # refined (y, tensor) pairs

    def _tensor(self, f: int) -> np.ndarray:
        if f < len(self.fg):
            return self.fg.payoff_tensor[f, : self.fg.vertices[f].shape[0]]
        return self.extra[f - len(self.fg)][1]

    def _y(self, f: int) -> np.ndarray:
        return self.fg.ys[f] if f < len(self.fg) else self.extra[f - len(self.fg)][0]

    def _all_values(self, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        vals = self.fg.corners(x) @ q
        if self.extra:
            ext = [np.einsum("i,vik->vk", x, T).max(axis=0) @ q for _, T in self.extra]
            vals = np.concatenate([vals, ext])
        return vals

    def _lp(self, active: list[int], q: np.ndarray):
        return _corner_lp([self._tensor(f) for f in active], q, self.bound, self.tol)

    def solve(self, q, active: list[int] | None = None):
        """Returns ``(value, x, y_bar, active)``; ``value`` is exact over the grid."""
        q = np.asarray(q, dtype=float)
        if active:
            active = list(dict.fromkeys(active))
        else:
            active = [int(np.argmax(self._all_values(uniform(self.spec.n_player), q)))]
        for _ in range(self.max_rounds):
            z, x, mu = self._lp(active, q)
            vals = self._all_values(x, q)
            f = int(np.argmax(vals))
            if vals[f] <= z + 1e-10 * (1.0 + abs(z)) or f in active:
                y_bar = sum(m * self._y(g) for m, g in zip(mu, active))
                return float(max(z, vals[f])), x, y_bar, active
            active.append(f)
        raise SaddleSolverError(x, float(vals.max()))

    def add_flag_of(self, y: np.ndarray) -> int:
        self.extra.append((y.copy(), _fiber_tensor(self.spec, y, self.tol)))
        return len(self.fg) + len(self.extra) - 1


def _corner_lp(tensors: list[np.ndarray], q: np.ndarray, bound: float, tol: Tolerances):
    """LP for ``min_x max_f sum_k q_k max_v <x, T_f[v, :, k]>`` over the given fiber tensors.

    Returns ``(value, x, mu)`` with ``mu`` the weights of the level rows.
    """
    I = tensors[0].shape[1]
    ks = np.flatnonzero(q > 0)
    nA, nk = len(tensors), ks.size
    n = I + nA * nk + 1
    rows = []
    for a_idx, T in enumerate(tensors):
        for kk, k in enumerate(ks):
            block = np.zeros((T.shape[0], n))
            block[:, :I] = T[:, :, k]
            block[:, I + a_idx * nk + kk] = -1.0
            rows.append(block)
    level = np.zeros((nA, n))
    for a_idx in range(nA):
        level[a_idx, I + a_idx * nk: I + (a_idx + 1) * nk] = q[ks]
    level[:, -1] = -1.0
    rows.append(level)
    A_ub = np.vstack(rows)
    A_eq = np.zeros((1, n))
    A_eq[0, :I] = 1.0
    c = np.zeros(n)
    c[-1] = 1.0
    bounds = [(0.0, np.inf)] * I + [(-bound, np.inf)] * (nA * nk) + [(-bound * q.sum(), np.inf)]
    sol = lp.solve(lp.LinearProgram(c, A_eq, [1.0], A_ub, np.zeros(A_ub.shape[0]), bounds), tol)
    if not sol.optimal:
        raise SaddleSolverError(uniform(I), np.inf)
    x = np.clip(sol.primal[:I], 0.0, None)
    x /= x.sum()
    mu = np.clip(-sol.dual[-nA:], 0.0, None)
    mu = mu / mu.sum() if mu.sum() > 0 else np.full(nA, 1.0 / nA)
    return float(sol.value), x, mu


def corner_level(spec: GameSpec, y, q, tol: Tolerances = DEFAULT) -> tuple[float, np.ndarray]:
    """``min_x <q, R(x, Hbar(y))>`` at a single Nature action, with the minimiser."""
    q = np.asarray(q, dtype=float)
    z, x, _ = _corner_lp([_fiber_tensor(spec, y, tol)], q, float(np.abs(spec.payoff).max()) + 1.0, tol)
    return z, x


def _check_direction(q, dim: int) -> np.ndarray:
    q = as_point(q, dim)
    if q.min() < 0:
        raise ValueError("direction must be nonnegative for orthant half-spaces")
    if not np.any(q > 0):
        raise ValueError("direction must be nonzero")
    return q


def _subgradient(fg: FlagGrid, q: np.ndarray, c: float, iters: int):
    """Projected subgradient on ``x -> max_f <q, R(x, f)>`` with averaged iterates."""
    I = fg.payoff_tensor.shape[2]
    x = uniform(I)
    avg = np.zeros(I)
    for t in range(1, iters + 1):
        vals = fg.corners(x) @ q
        f = int(np.argmax(vals))
        Tf = fg.payoff_tensor[f]
        best_v = np.einsum("i,vik->vk", x, Tf).argmax(axis=0)
        g = np.einsum("k,ik->i", q, Tf[best_v, :, np.arange(q.size)].T)
        x = project_simplex(x - c / np.sqrt(t) * g)
        avg += (x - avg) / t
    return float((fg.corners(avg) @ q).max()), avg


def one_shot_halfspace_modified(spec: GameSpec, q, threshold: float, y_grid=None, tol: Tolerances = DEFAULT,
                                method: str = "lp", refine: bool = True, flag_grid: FlagGrid | None = None,
                                subgradient_iters: int = 2000) -> ConditionReport:
    """Is ``{<w, q> <= threshold}`` one-shot approachable under the corner payoff, over the grid?

    ``method="lp"`` (default) solves the grid problem exactly; ``"subgradient"``
    runs projected subgradient with step ``M / sqrt(t)`` and an averaged iterate.
    A failure is certified at a single Nature action (possibly off-grid).
    """
    q = _check_direction(q, spec.dim)
    fg = flag_grid if flag_grid is not None else FlagGrid(
        spec, default_y_grid(spec) if y_grid is None else y_grid, tol)
    info: dict[str, Any] = {"check": "one_shot_halfspace_modified", "method": method, "flags": len(fg)}
    if method == "subgradient":
        value, x = _subgradient(fg, q, max(payoff_bound(spec), 1e-12), subgradient_iters)
        y_bar = fg.ys[int(np.argmax(fg.corners(x) @ q))]
        active = None
    elif method == "lp":
        solver = CornerHalfspaceSolver(spec, fg, tol)
        value, x, y_bar, active = solver.solve(q)
        if refine and value - threshold <= tol.condition and len(fg) > 1:
            # chase the gap between grid mixtures and the concave corner level off the grid
            for _ in range(5):
                level, _ = corner_level(spec, y_bar, q, tol)
                if level - threshold > tol.condition:
                    break
                f_new = solver.add_flag_of(y_bar)
                v2, x2, y2, active = solver.solve(q, active + [f_new])
                if v2 <= value + 1e-10:
                    break
                value, x, y_bar = v2, x2, y2
    else:
        raise ValueError(f"unknown method {method!r}")
    info["grid_value"] = value
    margin = threshold - value
    if margin >= -tol.condition:
        level, _ = corner_level(spec, y_bar, q, tol) if method == "lp" else (value, None)
        if level - threshold > tol.condition:
            return ConditionReport(Verdict.NOT_APPROACHABLE, threshold - level, counter_y=y_bar,
                                   separating_direction=q, witness_x=x, method=info)
        exact = _pure_flags_coincide(spec, tol.flag)
        return ConditionReport(Verdict.APPROACHABLE if exact else Verdict.NOT_FALSIFIED, margin,
                               witness_x=x, method=info, details={"active_flags": active})
    level, _ = corner_level(spec, y_bar, q, tol)
    if level - threshold > tol.condition:
        return ConditionReport(Verdict.NOT_APPROACHABLE, threshold - level, counter_y=y_bar,
                               separating_direction=q, witness_x=x, method=info)
    # grid value above threshold, but no single Nature action confirmed it
    return ConditionReport(Verdict.NOT_APPROACHABLE, margin, counter_y=y_bar, separating_direction=q,
                           witness_x=x, method=info, details={"certified": False, "level_at_counter": level})


def primal_condition_orthant(spec: GameSpec, a, q_grid=None, y_grid=None, tol: Tolerances = DEFAULT,
                             refine: bool = True) -> ConditionReport:
    """Every containing half-space ``{<w, q> <= <q, a>}`` of the orthant, one direction at a time.

    Directions are scanned in grid order and the first failure is
    reported. A shared pool of earlier witnesses settles most directions
    without solving anything.
    """
    a = as_point(a, spec.dim)
    Q = default_q_grid(spec.dim) if q_grid is None else np.atleast_2d(np.asarray(q_grid, dtype=float))
    if Q.min() < 0:
        raise ValueError("direction must be nonnegative for orthant half-spaces")
    Y = default_y_grid(spec) if y_grid is None else np.atleast_2d(np.asarray(y_grid, dtype=float))
    fg = FlagGrid(spec, Y, tol)
    I = spec.n_player
    pool = [np.eye(I)[i] for i in range(I)] + [uniform(I)]
    pool_corners = [fg.corners(x) for x in pool]                 # each (F, d)
    thresholds = Q @ a
    slack = np.empty(Q.shape[0])
    witness: dict[int, np.ndarray] = {}
    n_lp = 0

    def exact(q, thr):
        return one_shot_halfspace_modified(spec, q, thr, tol=tol, refine=refine, flag_grid=fg)

    for n_q, q in enumerate(Q):
        ub_all = [float((C @ q).max()) for C in pool_corners]
        p = int(np.argmin(ub_all))
        slack[n_q] = thresholds[n_q] - ub_all[p]
        if slack[n_q] >= 0.0:
            witness[n_q] = pool[p]
            continue
        rep = exact(q, thresholds[n_q])
        n_lp += 1
        if not rep.passed:
            rep.method.update({"check": "primal_condition_orthant", "directions_checked": n_q + 1, "lp_solves": n_lp})
            rep.separating_direction = q.copy()
            return rep
        slack[n_q] = rep.margin
        witness[n_q] = rep.witness_x
        pool.append(rep.witness_x)
        pool_corners.append(fg.corners(rep.witness_x))

    refined = False
    if refine and spec.dim > 1:
        # the grid passed: search between grid directions, starting from the tightest ones
        cache: dict[bytes, ConditionReport] = {}

        def evaluate(q):
            key = np.round(q, 12).tobytes()
            if key not in cache:
                cache[key] = exact(q, float(q @ a))
            return -cache[key].margin

        for n_q in np.argsort(slack, kind="stable")[:3]:
            if slack[n_q] > 0.05 * (1.0 + np.abs(spec.payoff).max()):
                break
            q1, _ = _ascend(Q[n_q], evaluate(Q[n_q]), evaluate, 1.0 / (2 * GRID_DENOMINATOR), 1.0 / 4096, 150)
            refined = True
            rep = cache[np.round(q1, 12).tobytes()]
            if not rep.passed:
                rep.method.update({"check": "primal_condition_orthant", "refined": True, "lp_solves": n_lp + len(cache)})
                rep.separating_direction = q1.copy()
                return rep
        n_lp += len(cache)
    k = int(np.argmin(slack))
    method = {"check": "primal_condition_orthant", "directions": int(Q.shape[0]), "flags": len(fg),
              "lp_solves": n_lp, "refined": refined}
    return ConditionReport(Verdict.NOT_FALSIFIED, float(slack[k]), witness_x=witness[k], method=method,
                           details={"tightest_direction": Q[k]})
