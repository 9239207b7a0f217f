"""Approachability strategies, Nature policies and the simulation loop.

Three players are provided:

* :func:`run_blackwell` steers the average of the expected payoffs
  ``r(x_n, j_n)`` under full monitoring;
* :func:`run_observed_flags` steers the average of corner payoffs
  ``R(x_n, Hbar(y_n))`` when the flag of Nature's mixed action is seen;
* :func:`run_block_signals` only sees signals, estimates one flag per
  block and steers the block averages of corner payoffs.

Every run records a :class:`Trace` that can be exported to CSV/JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .conditions import CornerHalfspaceSolver, SaddleSolverError, default_y_grid, one_shot_halfspace
from .config import DEFAULT, Tolerances
from .game import GameSpec, make_rng, maximal_information, payoff_bound
from .geometry import HalfSpace, Orthant, TargetSet, as_point, as_simplex, contains, distance, project_target, target_to_dict, uniform
from .monitoring import FlagGrid, repair_flag, upper_right_corner


# ---------------------------------------------------------------------------
# Nature


@dataclass
class NatureContext:
    """What Nature sees before choosing: the player's mixed action and the steered statistic."""

    spec: GameSpec
    n: int
    x: np.ndarray
    avg: np.ndarray
    proj: np.ndarray
    flag_grid: FlagGrid | None = None   # set when the statistic is a corner payoff


class NaturePolicy:
    kind = "abstract"

    def choose(self, ctx: NatureContext) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass
class Fixed(NaturePolicy):
    y: np.ndarray
    kind = "fixed"

    def __post_init__(self):
        self.y = as_simplex(self.y)

    def choose(self, ctx):
        return self.y

    def describe(self):
        return {"kind": self.kind, "y": self.y.tolist()}


@dataclass
class Script(NaturePolicy):
    """Cycles through a list of mixed actions, one per round."""

    ys: Sequence[np.ndarray]
    kind = "script"

    def __post_init__(self):
        if not len(self.ys):
            raise ValueError("script needs at least one mixed action")
        self.ys = [as_simplex(y) for y in self.ys]

    def choose(self, ctx):
        return self.ys[(ctx.n - 1) % len(self.ys)]

    def describe(self):
        return {"kind": self.kind, "ys": [y.tolist() for y in self.ys]}


@dataclass
class BestResponse(NaturePolicy):
    """Maximises ``<payoff(x, y) - proj, avg - proj>`` after seeing the mixed action ``x``.

    With plain payoffs the objective is linear in ``y`` so a pure action is
    optimal (first one on ties). With corner payoffs it is concave in ``y``
    and the maximum is taken over the flag grid of the run.
    """

    kind = "best_response"

    def choose(self, ctx):
        direction = ctx.avg - ctx.proj
        if not np.any(direction):
            return uniform(ctx.spec.n_nature)
        if ctx.flag_grid is None:
            scores = np.einsum("i,ijk,k->j", ctx.x, ctx.spec.payoff, direction)
            y = np.zeros(ctx.spec.n_nature)
            y[int(np.argmax(scores))] = 1.0
            return y
        scores = ctx.flag_grid.corners(ctx.x) @ direction
        return ctx.flag_grid.ys[int(np.argmax(scores))]


def nature_policy(kind: str, y=None, ys=None) -> NaturePolicy:
    if kind == "fixed":
        return Fixed(y)
    if kind == "script":
        return Script(ys)
    if kind in ("best_response", "best-response", "bestresponse"):
        return BestResponse()
    raise ValueError(f"unknown nature policy {kind!r}")


# ---------------------------------------------------------------------------
# traces


@dataclass
class Trace:
    """Round-by-round record of one simulation.

    ``mixed`` holds the expected payoff of each round given the information
    of the strategy (``r(x_n, j_n)`` for Blackwell, ``r(x_n, y_n)`` when
    flags are observed, ``r(x^(b), j_n)`` for block play); ``surrogate``
    the corner payoffs steered by the partial-monitoring strategies.
    ``condition[n]`` is ``<payoff_{n+1} - proj_n, avg_n - proj_n>`` for the
    steered payoff.
    """

    header: dict[str, Any]
    x: np.ndarray
    j: np.ndarray
    signal: np.ndarray
    pure: np.ndarray
    mixed: np.ndarray
    surrogate: np.ndarray | None
    dist: np.ndarray
    dist_surrogate: np.ndarray | None
    dist_pure: np.ndarray
    condition: np.ndarray
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)

    @staticmethod
    def running_mean(v: np.ndarray) -> np.ndarray:
        return np.cumsum(v, axis=0) / np.arange(1, v.shape[0] + 1)[:, None]

    @property
    def avg_mixed(self) -> np.ndarray:
        return self.running_mean(self.mixed)

    @property
    def avg_pure(self) -> np.ndarray:
        return self.running_mean(self.pure)

    @property
    def avg_surrogate(self) -> np.ndarray | None:
        return None if self.surrogate is None else self.running_mean(self.surrogate)

    def violations(self, tol: float = 1e-6) -> int:
        return int(np.sum(self.condition > tol))

    def columns(self) -> tuple[list[str], np.ndarray]:
        I, d = self.x.shape[1], self.mixed.shape[1]
        names = ["n", "dist", "dist_R", "dist_pure", "seed", "j", "signal"]
        names += [f"x{i}" for i in range(I)] + [f"mixed{k}" for k in range(d)] + [f"pure{k}" for k in range(d)]
        dR = self.dist_surrogate if self.dist_surrogate is not None else np.full(self.horizon, np.nan)
        cols = [self.n, self.dist, dR, self.dist_pure, np.full(self.horizon, self.header["seed"]), self.j, self.signal]
        cols += list(self.x.T) + list(self.mixed.T) + list(self.pure.T)
        if self.surrogate is not None:
            names += [f"R{k}" for k in range(d)]
            cols += list(self.surrogate.T)
        cond = np.full(self.horizon, np.nan)
        cond[self.extras.get("condition_rows", np.arange(self.condition.size))] = self.condition
        names.append("condition")
        cols.append(cond)
        return names, np.column_stack(cols)

    def to_csv(self) -> str:
        names, data = self.columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        int_cols = {"n", "seed", "j", "signal"}
        for row in data:
            w.writerow([str(int(v)) if nm in int_cols else repr(float(v)) for nm, v in zip(names, row)])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {
            "header": self.header,
            "horizon": self.horizon,
            "final_dist": float(self.dist[-1]),
            "final_dist_pure": float(self.dist_pure[-1]),
            "condition_violations": self.violations(),
            "max_condition": float(self.condition.max()),
        }
        if self.dist_surrogate is not None:
            out["final_dist_R"] = float(self.dist_surrogate[-1])
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True)


def _header(spec, seed, strategy, target, nature, **extra):
    h = {"seed": int(seed), "game_hash": spec.fingerprint, "strategy": strategy,
         "target": target_to_dict(target), "nature": nature.describe()}
    h.update(extra)
    return h


# ---------------------------------------------------------------------------
# Blackwell with full monitoring


def blackwell_step(spec: GameSpec, target: TargetSet, avg, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Mixed action pushing the average towards ``target``.

    Uniform when ``avg`` is already in the target; otherwise the one-shot
    witness for the half-space through the projection of ``avg``, normal
    to ``avg - proj``.
    """
    avg = as_point(avg, spec.dim)
    if contains(target, avg, tol.inside_target):
        return uniform(spec.n_player)
    proj = project_target(avg, target, tol)
    normal = avg - proj
    if not np.any(normal):
        return uniform(spec.n_player)
    return one_shot_halfspace(spec, HalfSpace(normal, float(normal @ proj)), tol).witness_x


def _draws(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised inverse-CDF draws; same convention as :func:`game.draw`."""
    cdf = np.cumsum(weights)
    k = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(weights > 0)[-1])
    return np.minimum(k, last)


def _signal_draw(spec: GameSpec, i: int, j: int, u: float) -> int:
    return int(_draws(spec.signal_law[i, j], np.array([u]))[0])


def run_blackwell(spec: GameSpec, target: TargetSet, nature: NaturePolicy, horizon: int, seed: int,
                  tol: Tolerances = DEFAULT) -> Trace:
    """Full-monitoring Blackwell strategy steering ``mean r(x_n, j_n)``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = make_rng(seed)
    I, J, d = spec.payoff.shape
    X = np.zeros((horizon, I))
    js = np.zeros(horizon, dtype=int)
    sig = np.zeros(horizon, dtype=int)
    pure = np.zeros((horizon, d))
    mixed = np.zeros((horizon, d))
    dist = np.zeros(horizon)
    dist_pure = np.zeros(horizon)
    cond = np.zeros(horizon - 1)
    avg = np.zeros(d)
    avg_pure = np.zeros(d)
    for t in range(horizon):
        n = t + 1
        if t == 0:
            x, proj = uniform(I), avg.copy()
        else:
            x = blackwell_step(spec, target, avg, tol)
            proj = project_target(avg, target, tol)
        y = nature.choose(NatureContext(spec, n, x, avg, proj))
        u = rng.random(3)
        i = int(_draws(x, u[:1])[0])
        j = int(_draws(y, u[1:2])[0])
        s = _signal_draw(spec, i, j, u[2])
        m = x @ spec.payoff[:, j]
        if t > 0:
            cond[t - 1] = float((m - proj) @ (avg - proj))
        avg = avg + (m - avg) / n
        avg_pure = avg_pure + (spec.payoff[i, j] - avg_pure) / n
        X[t], js[t], sig[t], pure[t], mixed[t] = x, j, s, spec.payoff[i, j], m
        dist[t] = distance(avg, target, tol)
        dist_pure[t] = distance(avg_pure, target, tol)
    return Trace(_header(spec, seed, "blackwell", target, nature, payoff_bound=payoff_bound(spec)),
                 X, js, sig, pure, mixed, None, dist, None, dist_pure, cond)


# ---------------------------------------------------------------------------
# corner-payoff steps


class OrthantStepper:
    """Keeps a flag grid and the active set of the inner LP warm across steps."""

    def __init__(self, spec: GameSpec, a, y_grid=None, tol: Tolerances = DEFAULT):
        self.spec = spec
        self.a = as_point(a, spec.dim)
        self.tol = tol
        self.fg = FlagGrid(spec, default_y_grid(spec) if y_grid is None else y_grid, tol)
        self.solver = CornerHalfspaceSolver(spec, self.fg, tol)
        self.active: list[int] | None = None
        self.last_margin = 0.0

    def step(self, avg_R) -> np.ndarray:
        avg_R = as_point(avg_R, self.spec.dim)
        if np.all(avg_R <= self.a + self.tol.inside_target):
            self.last_margin = 0.0
            return uniform(self.spec.n_player)
        proj = np.minimum(avg_R, self.a)
        q = avg_R - proj
        value, x, _, active = self.solver.solve(q, self.active)
        self.active = active[-8:]
        self.last_margin = float(q @ self.a - value)
        return x


def orthant_step_modified(spec: GameSpec, a, avg_R, y_grid=None, tol: Tolerances = DEFAULT,
                          strict: bool = False) -> np.ndarray:
    """Mixed action ``x`` minimising ``max_y <R(x, Hbar(y)) - proj, avg_R - proj>`` over the grid.

    With ``strict=True`` a :class:`SaddleSolverError` is raised when the
    best achievable value still exceeds ``tol.condition`` (the orthant
    then fails the dual condition on this direction).
    """
    st = OrthantStepper(spec, a, y_grid, tol)
    x = st.step(avg_R)
    if strict and st.last_margin < -tol.condition:
        raise SaddleSolverError(x, st.last_margin)
    return x


def run_observed_flags(spec: GameSpec, a, nature: NaturePolicy, horizon: int, seed: int, y_grid=None,
                       tol: Tolerances = DEFAULT) -> Trace:
    """Corner-payoff strategy when the flag ``Hbar(y_n)`` is revealed after each round."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    target = Orthant(a)
    st = OrthantStepper(spec, a, y_grid, tol)
    rng = make_rng(seed)
    I, J, d = spec.payoff.shape
    X = np.zeros((horizon, I))
    js = np.zeros(horizon, dtype=int)
    sig = np.zeros(horizon, dtype=int)
    pure = np.zeros((horizon, d))
    mixed = np.zeros((horizon, d))
    sur = np.zeros((horizon, d))
    dist, dist_R, dist_pure = np.zeros(horizon), np.zeros(horizon), np.zeros(horizon)
    cond = np.zeros(horizon - 1)
    avg_R = np.zeros(d)
    avg_m = np.zeros(d)
    avg_p = np.zeros(d)
    a = target.a
    for t in range(horizon):
        n = t + 1
        x = uniform(I) if t == 0 else st.step(avg_R)
        proj = np.minimum(avg_R, a)
        y = nature.choose(NatureContext(spec, n, x, avg_R, proj, st.fg))
        R = upper_right_corner(spec, x, maximal_information(spec, y), tol).corner
        u = rng.random(3)
        i = int(_draws(x, u[:1])[0])
        j = int(_draws(y, u[1:2])[0])
        s = _signal_draw(spec, i, j, u[2])
        m = np.einsum("i,j,ijk->k", x, y, spec.payoff)
        if t > 0:
            cond[t - 1] = float((R - proj) @ (avg_R - proj))
        avg_R += (R - avg_R) / n
        avg_m += (m - avg_m) / n
        avg_p += (spec.payoff[i, j] - avg_p) / n
        X[t], js[t], sig[t], pure[t], mixed[t], sur[t] = x, j, s, spec.payoff[i, j], m, R
        dist[t] = distance(avg_m, target)
        dist_R[t] = distance(avg_R, target)
        dist_pure[t] = distance(avg_p, target)
    return Trace(_header(spec, seed, "observed_flags", target, nature, payoff_bound=payoff_bound(spec),
                         flags=len(st.fg)),
                 X, js, sig, pure, mixed, sur, dist, dist_R, dist_pure, cond)


# ---------------------------------------------------------------------------
# block play from signals only


@dataclass(frozen=True)
class BlockSchedule:
    """Block lengths ``ceil(b ** length_power)`` and exploration ``b ** -explore_power`` for ``b = 1, 2, ...``."""

    length_power: float = 1.5
    explore_power: float = 0.25
    length_scale: float = 1.0
    explore_scale: float = 1.0

    def __post_init__(self):
        if self.length_power < 0 or self.explore_power < 0:
            raise ValueError("schedule exponents must be nonnegative")
        if self.length_scale <= 0 or not 0 < self.explore_scale <= 1:
            raise ValueError("length scale must be positive and exploration scale in (0, 1]")

    def length(self, b: int) -> int:
        return max(1, math.ceil(self.length_scale * b ** self.length_power))

    def gamma(self, b: int) -> float:
        return float(self.explore_scale * b ** -self.explore_power)

    def describe(self) -> dict:
        return {"length": f"ceil({self.length_scale}*b^{self.length_power})",
                "gamma": f"{self.explore_scale}*b^-{self.explore_power}"}


def run_block_signals(spec: GameSpec, a, schedule: BlockSchedule, nature: NaturePolicy, horizon: int, seed: int,
                      y_grid=None, tol: Tolerances = DEFAULT) -> Trace:
    """Block strategy fed by signals only.

    Each block plays ``(1 - gamma_b) x_b + gamma_b * uniform`` where ``x_b``
    is the corner-payoff step for the length-weighted average of past block
    corners. After the block the flag is estimated by per-action signal
    frequencies (rows of unplayed actions keep the previous estimate),
    repaired onto the feasible flags by the l1 LP, and the block corner
    ``R(x^(b), flag)`` joins the average.

    ``extras`` carries one row per block: start, length, gamma, the raw
    l1 estimation error against the flag of Nature's average block action,
    and the repair gap.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    target = Orthant(a)
    st = OrthantStepper(spec, a, y_grid, tol)
    rng = make_rng(seed)
    I, J, d = spec.payoff.shape
    S = spec.n_signals
    X = np.zeros((horizon, I))
    js = np.zeros(horizon, dtype=int)
    sig = np.zeros(horizon, dtype=int)
    pure = np.zeros((horizon, d))
    mixed = np.zeros((horizon, d))
    sur = np.zeros((horizon, d))
    cond_rows = []
    blocks = []
    cdfH = np.cumsum(spec.signal_law, axis=2)
    last_sig = S - 1 - np.argmax(spec.signal_law[:, :, ::-1] > 0, axis=2)
    estimate = np.full((I, S), 1.0 / S)
    avg_R = np.zeros(d)
    weight = 0
    t0, b = 0, 0
    while t0 < horizon:
        b += 1
        L = min(schedule.length(b), horizon - t0)
        g = schedule.gamma(b)
        x_orig = uniform(I) if b == 1 else st.step(avg_R)
        x = (1.0 - g) * x_orig + g * uniform(I)
        proj = np.minimum(avg_R, st.a)
        if isinstance(nature, Script):
            ys = np.array([nature.choose(NatureContext(spec, t0 + k + 1, x, avg_R, proj, st.fg)) for k in range(L)])
        else:
            ys = np.tile(nature.choose(NatureContext(spec, t0 + 1, x, avg_R, proj, st.fg)), (L, 1))
        u = rng.random((L, 3))
        ii = _draws(x, u[:, 0])
        jj = np.array([_draws(ys[k], u[k, 1:2])[0] for k in range(L)]) if len(set(map(bytes, ys))) > 1 \
            else _draws(ys[0], u[:, 1])
        ss = np.minimum((u[:, 2:3] >= cdfH[ii, jj]).sum(axis=1), last_sig[ii, jj])
        # per-action conditional signal frequencies
        counts = np.zeros((I, S))
        np.add.at(counts, (ii, ss), 1.0)
        played = counts.sum(axis=1)
        raw = estimate.copy()
        raw[played > 0] = counts[played > 0] / played[played > 0, None]
        y_bar = ys.mean(axis=0)
        err = float(np.abs(raw - maximal_information(spec, y_bar)).sum())
        flag, gap = repair_flag(spec, raw, tol)
        estimate = raw
        R = upper_right_corner(spec, x, flag, tol).corner
        if b > 1:
            cond_rows.append(float((R - proj) @ (avg_R - proj)))
        avg_R = (weight * avg_R + L * R) / (weight + L)
        weight += L
        sl = slice(t0, t0 + L)
        X[sl] = x
        js[sl], sig[sl] = jj, ss
        pure[sl] = spec.payoff[ii, jj]
        mixed[sl] = np.einsum("i,ilk->lk", x, spec.payoff[:, jj])
        sur[sl] = R
        blocks.append((t0, L, g, err, gap))
        t0 += L
    n = np.arange(1, horizon + 1)[:, None]
    avg_m = np.cumsum(mixed, axis=0) / n
    avg_p = np.cumsum(pure, axis=0) / n
    avg_s = np.cumsum(sur, axis=0) / n
    dist = np.sqrt((np.maximum(avg_m - st.a, 0.0) ** 2).sum(axis=1))
    dist_R = np.sqrt((np.maximum(avg_s - st.a, 0.0) ** 2).sum(axis=1))
    dist_p = np.sqrt((np.maximum(avg_p - st.a, 0.0) ** 2).sum(axis=1))
    head = _header(spec, seed, "block_signals", target, nature, payoff_bound=payoff_bound(spec),
                   schedule=schedule.describe(), blocks=b)
    starts = np.array([blk[0] for blk in blocks[1:]], dtype=int)
    return Trace(head, X, js, sig, pure, mixed, sur, dist, dist_R, dist_p, np.array(cond_rows),
                 extras={"blocks": np.array(blocks), "condition_rows": starts})
