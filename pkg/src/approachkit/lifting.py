"""Rewriting polytope targets as orthants, and general convex targets as polytopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .conditions import ConditionReport, one_shot_halfspace, one_shot_halfspace_modified
from .config import DEFAULT, Tolerances
from .game import GameSpec
from .geometry import DirectionGrid, HalfSpace, Polytope, SupportSampled, as_point
from .monitoring import modified_payoff


@dataclass(frozen=True)
class LiftedGame:
    """Game whose payoff is ``s(i, j) = A r(i, j) - b``; the polytope ``A w <= b`` becomes the orthant ``s <= 0``."""

    base: GameSpec
    rows: np.ndarray     # (L, d)
    offsets: np.ndarray  # (L,)
    lifted: GameSpec

    def transform(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return w @ self.rows.T - self.offsets


def lift_polytope(spec: GameSpec, poly: Polytope) -> LiftedGame:
    if poly.dim != spec.dim:
        raise ValueError(f"polytope lives in R^{poly.dim} but payoffs in R^{spec.dim}")
    s = spec.payoff @ poly.A.T - poly.b
    lifted = GameSpec(spec.player_actions, spec.nature_actions, spec.signals, s, spec.signal_law)
    return LiftedGame(spec, poly.A.copy(), poly.b.copy(), lifted)


def lifted_corner_payoff(lifted: LiftedGame, x, y, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Corner payoff of the lifted game (generally not the image of the base corner)."""
    return modified_payoff(lifted.lifted, x, y, tol)


@dataclass
class HiddenHalfspaceReport:
    direction: np.ndarray
    pulled_back: np.ndarray          # A' q, the base-space normal
    base_constant: float | None      # <q, T(w)> when it does not depend on w
    base_sup: float                  # sup of <q, T(w)> over the base payoff range
    base_report: ConditionReport | None
    lifted_report: ConditionReport
    lifted_value: float

    @property
    def base_passes(self) -> bool:
        if self.base_report is None:
            return self.base_constant is not None and self.base_constant <= 0.0
        return self.base_report.passed

    @property
    def consistent(self) -> bool:
        return self.base_passes == self.lifted_report.passed


def hidden_halfspace_demo(lifted: LiftedGame, q, y_grid=None, tol: Tolerances = DEFAULT) -> HiddenHalfspaceReport:
    """Compare the half-space ``<q, s> <= 0`` as seen from base payoffs and from lifted corner payoffs.

    From the base space the half-space pulls back to ``<A'q, w> <= <q, b>``;
    when ``A'q = 0`` it is all of the base space (or empty), and no base
    computation can see why it fails for corner payoffs.
    """
    q = as_point(q, lifted.rows.shape[0])
    if q.min() < 0:
        raise ValueError("direction must be nonnegative for orthant half-spaces")
    normal = lifted.rows.T @ q
    shift = float(q @ lifted.offsets)
    base_vals = lifted.base.payoff @ normal - shift
    constant = -shift if np.allclose(normal, 0.0, atol=1e-12) else None
    base_rep = None
    if constant is None:
        base_rep = one_shot_halfspace(lifted.base, HalfSpace(normal, shift), tol)
    lifted_rep = one_shot_halfspace_modified(lifted.lifted, q, 0.0, y_grid, tol)
    return HiddenHalfspaceReport(q, normal, constant, float(base_vals.max()), base_rep, lifted_rep,
                                 float(lifted_rep.method.get("grid_value", np.nan)))


# ---------------------------------------------------------------------------
# support functions -> polytopes


def support_from_points(points, grid: DirectionGrid) -> SupportSampled:
    """Support data of a point cloud (hence of its convex hull) on a direction grid."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    return SupportSampled(grid.directions, (grid.directions @ P.T).max(axis=1))


def convex_to_polytope(support: SupportSampled, grid: DirectionGrid, tol: Tolerances = DEFAULT) -> Polytope:
    """Outer polytope with one row per grid direction.

    Directions already carried by ``support`` reuse their values; others
    get the LP support of the set ``{<w, s_k> <= values_k}``. Directions in
    which that set is unbounded impose nothing and are dropped.
    """
    if grid.dim != support.dim:
        raise ValueError("grid and support data live in different dimensions")
    rows, offs = [], []
    for s in grid.directions:
        hit = np.flatnonzero(np.abs(support.directions - s).max(axis=1) <= 1e-12)
        if hit.size:
            rows.append(s)
            offs.append(float(support.values[hit].min()))
            continue
        sol = lp.solve(lp.LinearProgram(s, A_ub=support.directions, b_ub=support.values,
                                        bounds=[(-np.inf, np.inf)] * support.dim, maximize=True), tol)
        if sol.status is lp.LpStatus.INFEASIBLE:
            raise ValueError("support data describe an empty set")
        if sol.optimal:
            rows.append(s)
            offs.append(sol.value)
    if not rows:
        raise ValueError("no grid direction bounds the set")
    return Polytope(np.array(rows), np.array(offs))
