from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

import numpy as np

from approachkit.game import dark_signal_law, full_signal_law, make_rng, random_game, random_signal_law
from approachkit.kohlberg import SimultaneousGames

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_games(seed: int, count: int, max_I=3, max_J=3, max_d=3, max_S=3, **kw):
    """Small random games with mixed monitoring, reproducible from ``seed``."""
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        I, J = rng.integers(2, max_I + 1), rng.integers(2, max_J + 1)
        d = int(rng.integers(1, max_d + 1)) if "d" not in kw else kw["d"]
        S = int(rng.integers(1, max_S + 1))
        out.append(random_game(rng, int(I), int(J), d, S=S))
    return out


def two_state_instances(seed: int, count: int) -> list[SimultaneousGames]:
    """Two-state games cycling through dark, full and shared random signal laws."""
    rng = make_rng(seed)
    out = []
    for k in range(count):
        I, J = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        mode = ("dark", "full", "shared")[k % 3]
        if mode == "dark":
            H = dark_signal_law(I, J)
        elif mode == "full":
            H = full_signal_law(I, J)
        else:
            H = random_signal_law(I, J, 2, rng, deterministic=True)
        out.append(SimultaneousGames(rng.uniform(-1, 1, size=(2, I, J)), np.stack([H, H])))
    return out


@pytest.fixture
def rng():
    return make_rng(12345)


# acceptance results, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, note = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {note}")
