"""Several simultaneous scalar games, one per hidden state, seen as one vector-payoff game.

Nature plays a tuple of mixed actions, one per state, constrained to give
the same flag in every state (so play reveals nothing about the state).
The vertices of that polytope become the Nature actions of an auxiliary
vector game. The value ``u(q)`` of its ``q``-scalarisation, concavified in
``q``, yields orthants that the uninformed player can approach.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import lp
from .config import DEFAULT, Tolerances
from .game import GameSpec, make_rng
from .geometry import as_simplex, simplex_grid
from .monitoring import flag_gap

NR_LIMIT = 12


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SimultaneousGames:
    """``payoffs[g]`` is the ``I x J`` payoff of state ``g``; ``signal_laws[g]`` its ``I x J x S`` law."""

    payoffs: np.ndarray      # (d, I, J)
    signal_laws: np.ndarray  # (d, I, J, S)
    player_actions: tuple[str, ...] = ()
    nature_actions: tuple[str, ...] = ()
    signals: tuple[str, ...] = ()

    def __post_init__(self):
        r = np.asarray(self.payoffs, dtype=float)
        H = np.asarray(self.signal_laws, dtype=float)
        if r.ndim != 3 or H.ndim != 4 or H.shape[:3] != r.shape:
            raise ValueError(f"need payoffs (d, I, J) and signal laws (d, I, J, S); got {r.shape} and {H.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("payoffs must be finite")
        if H.min() < -1e-9 or np.abs(H.sum(axis=3) - 1.0).max() > 1e-9:
            raise ValueError("signal laws must be distributions")
        d, I, J = r.shape
        S = H.shape[3]
        object.__setattr__(self, "payoffs", r)
        object.__setattr__(self, "signal_laws", H)
        object.__setattr__(self, "player_actions", tuple(self.player_actions) or tuple(f"i{k}" for k in range(I)))
        object.__setattr__(self, "nature_actions", tuple(self.nature_actions) or tuple(f"j{k}" for k in range(J)))
        object.__setattr__(self, "signals", tuple(self.signals) or tuple(f"s{k}" for k in range(S)))

    @property
    def count(self) -> int:
        return self.payoffs.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.payoffs.shape[1], self.payoffs.shape[2], self.signal_laws.shape[3]

    def state_game(self, g: int) -> GameSpec:
        return GameSpec(self.player_actions, self.nature_actions, self.signals,
                        self.payoffs[g][:, :, None], self.signal_laws[g])


@dataclass(frozen=True)
class NRSet:
    """Vertices of the non-revealing polytope, shape (K, d, J)."""

    vertices: np.ndarray

    def __len__(self) -> int:
        return self.vertices.shape[0]


def _nr_system(games: SimultaneousGames) -> tuple[np.ndarray, np.ndarray]:
    d = games.count
    I, J, S = games.shape
    H = games.signal_laws.transpose(0, 1, 3, 2).reshape(d, I * S, J)   # flag rows per state
    rows, rhs = [], []
    for g in range(d):
        row = np.zeros(d * J)
        row[g * J:(g + 1) * J] = 1.0
        rows.append(row)
        rhs.append(1.0)
    for g in range(1, d):
        block = np.zeros((I * S, d * J))
        block[:, :J] = -H[0]
        block[:, g * J:(g + 1) * J] = H[g]
        rows.extend(block)
        rhs.extend([0.0] * (I * S))
    return np.array(rows), np.array(rhs)


def nr_vertices(games: SimultaneousGames, tol: Tolerances = DEFAULT) -> NRSet:
    d = games.count
    I, J, S = games.shape
    if d * J > NR_LIMIT:
        raise ValueError(f"vertex enumeration is limited to d*J <= {NR_LIMIT} (got {d * J})")
    M, h = _nr_system(games)
    feas = lp.solve(lp.LinearProgram(np.zeros(d * J), M, h), tol)
    if not feas.optimal:
        raise ValueError("no non-revealing profile")
    V = lp.basic_feasible_solutions(M, h, dedup=tol.vertex_dedup)
    if not V.shape[0]:
        raise ValueError("no non-revealing profile")
    return NRSet(V.reshape(-1, d, J))


def check_common_range(games: SimultaneousGames, samples: int = 200, seed: int = 0,
                       tol: Tolerances = DEFAULT) -> None:
    """Sampled test that every state's flag map has the same range; raises :class:`ConfigurationError`."""
    rng = make_rng(seed)
    I, J, S = games.shape
    specs = [games.state_game(g) for g in range(games.count)]
    Y = np.vstack([np.eye(J), rng.dirichlet(np.ones(J), size=samples)])
    for g, sg in enumerate(specs):
        flags = np.einsum("nj,ijs->nis", Y, sg.signal_law)
        for g2, sg2 in enumerate(specs):
            if g2 == g:
                continue
            for h in flags:
                gap = flag_gap(sg2, h, tol)[0]
                if gap > tol.flag_repair:
                    raise ConfigurationError(f"flag ranges differ: state {g} produces a flag state {g2} cannot (gap {gap:.2e})")


def auxiliary_game(games: SimultaneousGames, nr: NRSet, check_range: bool = True,
                   tol: Tolerances = DEFAULT) -> GameSpec:
    """Vector game with Nature actions the NR vertices and payoff ``(r_g(i, y_k^g))_g``."""
    if not len(nr):
        raise ValueError("empty non-revealing set")
    if check_range:
        check_common_range(games, tol=tol)
    V = nr.vertices                                                # (K, d, J)
    r = np.einsum("gij,kgj->ikg", games.payoffs, V)                # (I, K, d)
    flags = np.einsum("gijs,kgj->kgis", games.signal_laws, V)  # (K, d, I, S)
    spread = np.abs(flags - flags[:, :1]).max()
    if spread > tol.flag:
        raise ValueError(f"NR vertices give different flags across states (spread {spread:.2e})")
    H = flags[:, 0].transpose(1, 0, 2)                            # (I, K, S)
    labels = tuple("(" + ";".join(",".join(f"{w:.6g}" for w in y) for y in v) + ")" for v in V)
    return GameSpec(games.player_actions, labels, games.signals, r, H)


def u_value(aux: GameSpec, q) -> float:
    """Value of the scalar game ``<r(i, k), q>``; the player minimises."""
    q = as_simplex(q, aux.dim)
    return lp.zero_sum_value(aux.payoff @ q)[0]


@dataclass
class Concavification:
    """Upper concave envelope of samples ``(p, u(p))`` on ``[0, 1]``, with ``q = (p, 1 - p)``."""

    p: np.ndarray          # all sample abscissae
    u: np.ndarray
    hull_p: np.ndarray     # envelope vertices, increasing
    hull_u: np.ndarray

    def __call__(self, p) -> np.ndarray | float:
        return np.interp(p, self.hull_p, self.hull_u)

    def segment(self, p: float) -> int:
        """Index ``k`` of the envelope segment ``[hull_p[k], hull_p[k+1]]`` containing ``p`` from the left."""
        if len(self.hull_p) < 2:
            return 0
        k = int(np.searchsorted(self.hull_p, p, side="left")) - 1
        return min(max(k, 0), len(self.hull_p) - 2)


def concavify(p_samples, u_samples, dim: int = 2) -> Concavification:
    """Monotone-chain upper hull of the sample points."""
    if dim != 2:
        raise ValueError("concavification implemented for two states only")
    p = np.asarray(p_samples, dtype=float)
    u = np.asarray(u_samples, dtype=float)
    if p.size < 3 or p.shape != u.shape:
        raise ValueError("need at least three (p, u) samples")
    order = np.lexsort((u, p))
    p, u = p[order], u[order]
    if p.min() < 0 or p.max() > 1:
        raise ValueError("p samples must lie in [0, 1]")
    hull: list[int] = []
    for k in range(p.size):
        if hull and p[hull[-1]] == p[k]:
            hull.pop()   # same abscissa: keep the larger value (sorted last)
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (p[a] - p[o]) * (u[k] - u[o]) - (u[a] - u[o]) * (p[k] - p[o])
            if cross >= 0:   # a is on or below the chord o -> k
                hull.pop()
            else:
                break
        hull.append(k)
    return Concavification(p, u, p[hull], u[hull])


def concavify_game(aux: GameSpec, n_points: int = 65, refine_rounds: int = 3) -> Concavification:
    """Envelope of ``u`` sampled on ``n_points`` beliefs, then refined between samples.

    ``u`` is not concave, so a peak can sit strictly between two samples and
    poke above the sampled hull. Each round maximises ``u - hull`` on every
    sample interval and adds the peaks that stick out.
    """
    if aux.dim != 2:
        raise ValueError("concavification implemented for two states only")

    def u(p: float) -> float:
        return u_value(aux, (p, 1.0 - p))

    ps = list(np.linspace(0.0, 1.0, n_points))
    us = [u(p) for p in ps]
    cav = concavify(ps, us)
    for _ in range(refine_rounds):
        added = False
        knots = np.unique(np.array(ps))
        for lo, hi in zip(knots[:-1], knots[1:]):
            res = minimize_scalar(lambda p: -(u(p) - float(cav(p))), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            if -res.fun > 1e-12:
                ps.append(float(res.x))
                us.append(u(float(res.x)))
                added = True
        if not added:
            break
        cav = concavify(ps, us)
    return cav


def supporting_vector(cav: Concavification, p: float) -> np.ndarray:
    """``a_p = (c + m, c)`` from the envelope segment ``c + m p`` active at ``p`` (left segment at kinks)."""
    if not cav.hull_p[0] - 1e-12 <= p <= cav.hull_p[-1] + 1e-12:
        raise ValueError("p outside the envelope domain")
    if len(cav.hull_p) == 1:
        return np.array([cav.hull_u[0], cav.hull_u[0]])
    k = cav.segment(p)
    m = (cav.hull_u[k + 1] - cav.hull_u[k]) / (cav.hull_p[k + 1] - cav.hull_p[k])
    c = cav.hull_u[k] - m * cav.hull_p[k]
    return np.array([c + m, c])


def games_from_dict(data: dict) -> SimultaneousGames:
    gs = data["games"]
    return SimultaneousGames(np.array([g["payoffs"] for g in gs], dtype=float),
                             np.array([g["signal_law"] for g in gs], dtype=float),
                             tuple(data.get("player_actions", ())), tuple(data.get("nature_actions", ())),
                             tuple(data.get("signals", ())))


def belief_grid(n: int = 65) -> np.ndarray:
    return simplex_grid(2, n - 1)
