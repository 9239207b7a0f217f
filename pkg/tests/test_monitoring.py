from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from approachkit.game import (coordinate_product_game, dark_signal_law, interval_game, make_game, make_rng,
                              maximal_information, payoff_bound, payoff_mixed, random_game, skew_pair_game)
from approachkit.geometry import simplex_grid
from approachkit.monitoring import (FlagError, FlagGrid, corner_gap, fiber, flag_gap, has_urc_property,
                                    modified_payoff, omega_support, repair_flag, upper_right_corner)

from conftest import random_games

SKEW = skew_pair_game("dark")
FULL = skew_pair_game("full")
DARK_FLAG = np.ones((2, 1))
probs = st.floats(0, 1)


def flags_of(spec, ys):
    return [maximal_information(spec, y) for y in ys]


# ---------------------------------------------------------------------------
# fibers


def test_full_monitoring_fiber_is_a_point():
    y = np.array([0.3, 0.7])
    fib = fiber(FULL, maximal_information(FULL, y))
    np.testing.assert_allclose(fib.vertices, [y])


def test_dark_fiber_is_the_simplex():
    g = make_game(np.zeros((2, 3, 1)), dark_signal_law(2, 3))
    V = fiber(g, np.ones((2, 1))).vertices
    assert sorted(map(tuple, V)) == sorted(map(tuple, np.eye(3)))
    assert sorted(map(tuple, fiber(SKEW, DARK_FLAG).vertices)) == [(0.0, 1.0), (1.0, 0.0)]


def test_fiber_vertices_satisfy_the_system():
    for g in random_games(21, 10):
        y = make_rng(1).dirichlet(np.ones(g.n_nature))
        fib = fiber(g, maximal_information(g, y))
        for v in fib.vertices:
            assert fib.contains(v, 1e-7) and abs(v.sum() - 1) <= 1e-9 and v.min() >= -1e-12
        assert fib.contains(y, 1e-7)


def test_infeasible_flag_raises_with_certificate():
    with pytest.raises(FlagError, match="flag outside feasible set") as info:
        fiber(FULL, np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert info.value.gap > 1e-6


def test_tiny_flag_error_is_repaired():
    h = maximal_information(FULL, [0.4, 0.6]) + np.array([[1e-7, -1e-7], [0.0, 0.0]])
    fib = fiber(FULL, h)
    assert 0 < fib.repaired_gap <= 1e-6
    h2, gap = repair_flag(FULL, h)
    assert gap == pytest.approx(fib.repaired_gap)
    assert flag_gap(FULL, h2)[0] <= 1e-12


def test_bad_flag_shape():
    with pytest.raises(ValueError, match="shape"):
        fiber(SKEW, np.ones((2, 2)))


# ---------------------------------------------------------------------------
# compatible payoffs and corners


@given(probs)
def test_interval_game_support(x):
    g = interval_game()
    flag = np.ones((2, 1))
    assert omega_support(g, [x, 1 - x], flag, [1.0]) == pytest.approx(1 + x)
    assert -omega_support(g, [x, 1 - x], flag, [-1.0]) == pytest.approx(-2 + x)


@given(probs)
def test_skew_dark_support_and_corner(alpha):
    x = [alpha, 1 - alpha]
    assert omega_support(SKEW, x, DARK_FLAG, [1, 0]) == pytest.approx(alpha)
    assert omega_support(SKEW, x, DARK_FLAG, [0, 1]) == pytest.approx(1 - alpha)
    np.testing.assert_allclose(upper_right_corner(SKEW, x, DARK_FLAG).corner, [alpha, 1 - alpha], atol=1e-12)


@given(probs)
def test_skew_dark_segment_endpoints(alpha):
    # compatible payoffs are (lam, -lam); the LP gives lam in [alpha - 1, alpha]
    x = [alpha, 1 - alpha]
    lam_max = omega_support(SKEW, x, DARK_FLAG, [1, 0])
    lam_min = -omega_support(SKEW, x, DARK_FLAG, [-1, 0])
    assert lam_max == pytest.approx(alpha) and lam_min == pytest.approx(alpha - 1)
    assert omega_support(SKEW, x, DARK_FLAG, [1, 1]) == pytest.approx(0.0, abs=1e-12)


def test_full_monitoring_corner_is_the_payoff():
    rng = make_rng(4)
    g = random_game(rng, 3, 3, 2, S=1).with_signal_law(("a", "b", "c"), np.tile(np.eye(3), (3, 1, 1)))
    for _ in range(20):
        x, y = rng.dirichlet(np.ones(3), size=2)
        flag = maximal_information(g, y)
        np.testing.assert_allclose(upper_right_corner(g, x, flag).corner, payoff_mixed(g, x, y), atol=1e-9)
        d = rng.normal(size=2)
        assert omega_support(g, x, flag, d) == pytest.approx(payoff_mixed(g, x, y) @ d, abs=1e-9)


def test_corner_witnesses_and_norm_bound():
    for g in random_games(31, 15):
        rng = make_rng(2)
        x, y = rng.dirichlet(np.ones(g.n_player)), rng.dirichlet(np.ones(g.n_nature))
        flag = maximal_information(g, y)
        res = upper_right_corner(g, x, flag)
        fib = fiber(g, flag)
        for k, w in enumerate(res.argmax_y):
            assert fib.contains(w, 1e-7)
            assert payoff_mixed(g, x, w)[k] == pytest.approx(res.corner[k], abs=1e-7)
        assert np.linalg.norm(res.corner) <= payoff_bound(g) * math.sqrt(g.dim) + 1e-9


def test_corner_agrees_with_lp_support():
    # vertex route (corner) against the LP route (omega_support), coordinate by coordinate
    for g in random_games(41, 20):
        rng = make_rng(3)
        for _ in range(5):
            x, y = rng.dirichlet(np.ones(g.n_player)), rng.dirichlet(np.ones(g.n_nature))
            flag = maximal_information(g, y)
            corner = upper_right_corner(g, x, flag).corner
            lp_corner = [omega_support(g, x, flag, e) for e in np.eye(g.dim)]
            np.testing.assert_allclose(corner, lp_corner, atol=1e-9)


def test_large_nature_uses_lp_route():
    J = 12
    g = make_game(make_rng(0).normal(size=(2, J, 2)), dark_signal_law(2, J))
    x = np.array([0.3, 0.7])
    res = upper_right_corner(g, x, np.ones((2, 1)))
    np.testing.assert_allclose(res.corner, (x @ g.payoff.transpose(1, 0, 2)).max(axis=0), atol=1e-9)


def test_modified_payoff_examples():
    rng = make_rng(6)
    np.testing.assert_allclose(modified_payoff(SKEW, [0.5, 0.5], [0.9, 0.1]), [0.5, 0.5])
    for _ in range(10):
        x, y, y2 = rng.dirichlet(np.ones(2), size=3)
        np.testing.assert_allclose(modified_payoff(SKEW, x, y), modified_payoff(SKEW, x, y2))
        np.testing.assert_allclose(modified_payoff(FULL, x, y), payoff_mixed(FULL, x, y), atol=1e-12)


@given(st.integers(0, 10_000))
def test_payoff_below_modified_payoff(seed):
    g = random_games(seed, 1)[0]
    rng = make_rng(seed)
    x, y = rng.dirichlet(np.ones(g.n_player)), rng.dirichlet(np.ones(g.n_nature))
    assert np.all(payoff_mixed(g, x, y) <= modified_payoff(g, x, y) + 1e-7)


@given(st.integers(0, 10_000), probs)
def test_modified_payoff_convex_in_x_concave_in_y(seed, lam):
    g = random_games(seed, 1)[0]
    rng = make_rng(seed)
    x, x2 = rng.dirichlet(np.ones(g.n_player), size=2)
    y, y2 = rng.dirichlet(np.ones(g.n_nature), size=2)
    mix_x = modified_payoff(g, lam * x + (1 - lam) * x2, y)
    assert np.all(mix_x <= lam * modified_payoff(g, x, y) + (1 - lam) * modified_payoff(g, x2, y) + 1e-7)
    mix_y = modified_payoff(g, x, lam * y + (1 - lam) * y2)
    assert np.all(lam * modified_payoff(g, x, y) + (1 - lam) * modified_payoff(g, x, y2) <= mix_y + 1e-7)


def test_support_convex_in_x_concave_in_flag():
    for g in random_games(51, 8):
        rng = make_rng(5)
        d = rng.normal(size=g.dim)
        x, x2 = rng.dirichlet(np.ones(g.n_player), size=2)
        y, y2 = rng.dirichlet(np.ones(g.n_nature), size=2)
        h, h2 = maximal_information(g, y), maximal_information(g, y2)
        for lam in np.linspace(0, 1, 6):
            xl = lam * x + (1 - lam) * x2
            assert omega_support(g, xl, h, d) <= lam * omega_support(g, x, h, d) + (1 - lam) * omega_support(
                g, x2, h, d) + 1e-7
            hl = lam * h + (1 - lam) * h2
            assert lam * omega_support(g, x, h, d) + (1 - lam) * omega_support(g, x, h2, d) <= omega_support(
                g, x, hl, d) + 1e-7


def test_modified_payoff_empirically_lipschitz():
    for g in random_games(61, 5):
        rng = make_rng(7)
        # estimate a constant on nearby pairs, then validate on fresh pairs
        def pairs(n):
            for _ in range(n):
                x, y = rng.dirichlet(np.ones(g.n_player)), rng.dirichlet(np.ones(g.n_nature))
                x2 = 0.9 * x + 0.1 * rng.dirichlet(np.ones(g.n_player))
                y2 = 0.9 * y + 0.1 * rng.dirichlet(np.ones(g.n_nature))
                num = np.linalg.norm(modified_payoff(g, x, y) - modified_payoff(g, x2, y2))
                den = np.linalg.norm(x - x2) + np.linalg.norm(y - y2)
                yield num / den
        L = max(pairs(200))
        assert max(pairs(200)) <= 2 * L + 1e-9


# ---------------------------------------------------------------------------
# upper-right-corner property


def test_urc_full_monitoring():
    ok, wit = has_urc_property(FULL, simplex_grid(2, 20), flags_of(FULL, simplex_grid(2, 20)))
    assert ok and wit is None


def test_urc_fails_for_dark_skew_game():
    ok, wit = has_urc_property(SKEW, [[0.5, 0.5]], [DARK_FLAG])
    assert not ok
    np.testing.assert_allclose(wit.corner, [0.5, 0.5])
    assert wit.gap == pytest.approx(1.0)


def test_urc_product_game():
    g = coordinate_product_game([[[1, -1], [-1, 1]], [[0.5, -1], [-1, 0.5]]])
    ok, _ = has_urc_property(g, simplex_grid(2, 20), [np.ones((2, 1))])
    assert ok


def test_corner_gap_is_l1_distance():
    gap, corner = corner_gap(SKEW, [0.25, 0.75], DARK_FLAG)
    # closest compatible payoffs (lam, -lam) to (1/4, 3/4) in l1 are at distance 1
    assert gap == pytest.approx(1.0)


def test_flag_grid_matches_pointwise_corners():
    for g in random_games(71, 6):
        Y = simplex_grid(g.n_nature, 4)
        fg = FlagGrid(g, Y)
        x = make_rng(1).dirichlet(np.ones(g.n_player))
        C = fg.corners(x)
        for f, y in enumerate(fg.ys):
            np.testing.assert_allclose(C[f], modified_payoff(g, x, y), atol=1e-9)
        assert len(fg) <= len(Y)
