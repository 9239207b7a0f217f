"""Finite repeated games with vector payoffs and random signals."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import DEFAULT
from .geometry import as_simplex


@dataclass(frozen=True)
class GameSpec:
    """Vector-payoff game: ``payoff[i, j]`` in ``R^d`` and ``signal_law[i, j]`` in the signal simplex.

    Player actions index the first axis, Nature's actions the second.
    Arrays are stored read-only; build a new spec to change anything.
    """

    player_actions: tuple[str, ...]
    nature_actions: tuple[str, ...]
    signals: tuple[str, ...]
    payoff: np.ndarray       # (I, J, d)
    signal_law: np.ndarray   # (I, J, S)

    def __post_init__(self):
        r = np.asarray(self.payoff, dtype=float)
        H = np.asarray(self.signal_law, dtype=float)
        pa, na, sg = tuple(map(str, self.player_actions)), tuple(map(str, self.nature_actions)), tuple(map(str, self.signals))
        I, J, S = len(pa), len(na), len(sg)
        if min(I, J, S) < 1:
            raise ValueError("need at least one player action, nature action and signal")
        if r.ndim != 3 or r.shape[:2] != (I, J) or r.shape[2] < 1:
            raise ValueError(f"payoff must have shape ({I}, {J}, d), got {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("payoffs must be finite")
        if H.shape != (I, J, S):
            raise ValueError(f"signal law must have shape ({I}, {J}, {S}), got {H.shape}")
        tol = DEFAULT.distribution
        if H.min() < -tol or np.abs(H.sum(axis=2) - 1.0).max() > tol:
            raise ValueError("every signal_law[i][j] must be a probability distribution")
        H = np.clip(H, 0.0, None)
        r = r.copy()
        r.flags.writeable = False
        H.flags.writeable = False
        for name, val in (("payoff", r), ("signal_law", H), ("player_actions", pa), ("nature_actions", na), ("signals", sg)):
            object.__setattr__(self, name, val)

    # shapes
    @property
    def n_player(self) -> int:
        return len(self.player_actions)

    @property
    def n_nature(self) -> int:
        return len(self.nature_actions)

    @property
    def n_signals(self) -> int:
        return len(self.signals)

    @property
    def dim(self) -> int:
        return self.payoff.shape[2]

    @cached_property
    def fingerprint(self) -> str:
        """sha256 of the canonical JSON encoding."""
        return hashlib.sha256(dumps_game(self).encode()).hexdigest()

    def with_signal_law(self, signals: Sequence[str], signal_law) -> "GameSpec":
        return GameSpec(self.player_actions, self.nature_actions, tuple(signals), self.payoff, signal_law)

    def __hash__(self):
        return hash(self.fingerprint)

    def __eq__(self, other):
        return isinstance(other, GameSpec) and self.fingerprint == other.fingerprint


@dataclass(frozen=True)
class RoundOutcome:
    i: int
    j: int
    signal: int
    pure_payoff: np.ndarray
    mixed_payoff: np.ndarray


# ---------------------------------------------------------------------------
# signal structures


def full_signal_law(I: int, J: int) -> np.ndarray:
    """Signals are Nature's actions, revealed exactly."""
    H = np.zeros((I, J, J))
    H[:, np.arange(J), np.arange(J)] = 1.0
    return H


def dark_signal_law(I: int, J: int) -> np.ndarray:
    return np.ones((I, J, 1))


def _labels(prefix, n):
    return tuple(f"{prefix}{k}" for k in range(n))


def make_game(payoff, signal_law=None, *, player_actions=None, nature_actions=None, signals=None) -> GameSpec:
    """Build a spec from arrays; the signal law defaults to full monitoring."""
    r = np.asarray(payoff, dtype=float)
    if r.ndim == 2:
        r = r[:, :, None]
    I, J = r.shape[:2]
    pa = tuple(player_actions) if player_actions is not None else _labels("i", I)
    na = tuple(nature_actions) if nature_actions is not None else _labels("j", J)
    if signal_law is None:
        return GameSpec(pa, na, na, r, full_signal_law(I, J))
    H = np.asarray(signal_law, dtype=float)
    sg = tuple(signals) if signals is not None else _labels("s", H.shape[2])
    return GameSpec(pa, na, sg, r, H)


def with_monitoring(spec: GameSpec, mode: str) -> GameSpec:
    """Replace the signal law by full monitoring (``"full"``), a single signal (``"dark"``), or keep it (``"spec"``)."""
    I, J = spec.n_player, spec.n_nature
    if mode == "spec":
        return spec
    if mode == "full":
        return spec.with_signal_law(spec.nature_actions, full_signal_law(I, J))
    if mode == "dark":
        return spec.with_signal_law(("none",), dark_signal_law(I, J))
    raise ValueError(f"unknown monitoring mode {mode!r}; expected full, dark or spec")


def random_signal_law(I: int, J: int, S: int, rng: np.random.Generator, deterministic: bool = False) -> np.ndarray:
    """Random law; ``deterministic=True`` gives 0/1 signals."""
    if deterministic:
        H = np.zeros((I, J, S))
        idx = rng.integers(0, S, size=(I, J))
        np.put_along_axis(H, idx[..., None], 1.0, axis=2)
        return H
    H = rng.dirichlet(np.ones(S), size=(I, J))
    return H / H.sum(axis=2, keepdims=True)


def random_game(rng: np.random.Generator, I: int, J: int, d: int, S: int = 1, scale: float = 1.0) -> GameSpec:
    r = rng.uniform(-scale, scale, size=(I, J, d))
    return make_game(r, random_signal_law(I, J, S, rng))


# ---------------------------------------------------------------------------
# the worked examples used throughout the tests


def skew_pair_game(monitoring: str = "dark") -> GameSpec:
    """2x2 game with payoffs (0,0), (1,-1) / (-1,1), (0,0).

    Its negative orthant is approachable with full monitoring and not in the dark.
    """
    r = np.array([[[0.0, 0.0], [1.0, -1.0]], [[-1.0, 1.0], [0.0, 0.0]]])
    g = GameSpec(("T", "B"), ("L", "R"), ("L", "R"), r, full_signal_law(2, 2))
    return with_monitoring(g, monitoring)


def interval_game() -> GameSpec:
    """Scalar 2x2 dark game with payoffs -1, 2 / -2, 1."""
    r = np.array([[-1.0, 2.0], [-2.0, 1.0]])[:, :, None]
    return GameSpec(("T", "B"), ("L", "R"), ("none",), r, dark_signal_law(2, 2))


def coordinate_product_game(tables: Sequence) -> GameSpec:
    """Dark game whose payoff is the vector of several scalar games.

    ``tables[g]`` is an ``I x J_g`` matrix. Nature picks one column per
    coordinate, so its actions are tuples and compatible payoff sets are
    boxes (the upper-right corner is always attained).
    """
    mats = [np.atleast_2d(np.asarray(t, dtype=float)) for t in tables]
    I = mats[0].shape[0]
    if any(m.shape[0] != I for m in mats):
        raise ValueError("all coordinate games need the same player actions")
    cols = np.array(np.meshgrid(*[np.arange(m.shape[1]) for m in mats], indexing="ij")).reshape(len(mats), -1).T
    r = np.stack([np.stack([m[:, c[g]] for g, m in enumerate(mats)], axis=-1) for c in cols], axis=1)
    na = tuple("(" + ",".join(str(v) for v in c) + ")" for c in cols)
    return GameSpec(_labels("i", I), na, ("none",), r, dark_signal_law(I, len(cols)))


# ---------------------------------------------------------------------------
# payoffs and flags


def payoff_mixed(spec: GameSpec, x, y) -> np.ndarray:
    x = as_simplex(x, spec.n_player)
    y = as_simplex(y, spec.n_nature)
    return np.einsum("i,j,ijk->k", x, y, spec.payoff)


def payoff_against(spec: GameSpec, x) -> np.ndarray:
    """``r(x, j)`` for every pure j, shape (J, d)."""
    return np.einsum("i,ijk->jk", x, spec.payoff)


def maximal_information(spec: GameSpec, y) -> np.ndarray:
    """Flag of ``y``: row ``i`` is the signal distribution seen after playing ``i``. Shape (I, S)."""
    y = as_simplex(y, spec.n_nature)
    return np.einsum("j,ijs->is", y, spec.signal_law)


def payoff_bound(spec: GameSpec) -> float:
    return float(np.linalg.norm(spec.payoff, axis=2).max())


# ---------------------------------------------------------------------------
# sampling


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded by a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def draw(weights: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from ``weights`` for a uniform ``u`` in [0, 1)."""
    k = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    if k >= weights.size:
        k = int(np.flatnonzero(weights > 0)[-1])
    return k


def sample_round(spec: GameSpec, x, y, rng: np.random.Generator) -> RoundOutcome:
    x = as_simplex(x, spec.n_player)
    y = as_simplex(y, spec.n_nature)
    u = rng.random(3)
    i = draw(x, u[0])
    j = draw(y, u[1])
    s = draw(spec.signal_law[i, j], u[2])
    return RoundOutcome(i, j, s, spec.payoff[i, j].copy(), x @ spec.payoff[:, j])


# ---------------------------------------------------------------------------
# JSON


def game_to_dict(spec: GameSpec) -> dict:
    return {
        "player_actions": list(spec.player_actions),
        "nature_actions": list(spec.nature_actions),
        "dim": spec.dim,
        "signals": list(spec.signals),
        "payoffs": spec.payoff.tolist(),
        "signal_law": spec.signal_law.tolist(),
    }


def game_from_dict(data: dict) -> GameSpec:
    missing = {"player_actions", "nature_actions", "dim", "signals", "payoffs", "signal_law"} - set(data)
    if missing:
        raise ValueError(f"game JSON lacks keys: {sorted(missing)}")
    r = np.asarray(data["payoffs"], dtype=float)
    if r.ndim != 3 or r.shape[2] != int(data["dim"]):
        raise ValueError(f"payoffs must be an I x J x dim array with dim={data['dim']}, got shape {r.shape}")
    return GameSpec(tuple(data["player_actions"]), tuple(data["nature_actions"]), tuple(data["signals"]), r, data["signal_law"])


def dumps_game(spec: GameSpec) -> str:
    """Canonical JSON: fixed key order, shortest round-trip float repr."""
    return json.dumps(game_to_dict(spec), separators=(",", ":"))


def load_game(path) -> GameSpec:
    return game_from_dict(json.loads(Path(path).read_text()))


def save_game(spec: GameSpec, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(spec), indent=1) + "\n")
