from __future__ import annotations

import math

import numpy as np
import pytest

from approachkit.conditions import SaddleSolverError, dual_condition
from approachkit.game import (coordinate_product_game, make_game, make_rng, payoff_bound, random_signal_law,
                              skew_pair_game)
from approachkit.geometry import HalfSpace, Orthant, Polytope, uniform
from approachkit.monitoring import modified_payoff
from approachkit.strategies import (BestResponse, BlockSchedule, Fixed, Script, blackwell_step, nature_policy,
                                    orthant_step_modified, run_blackwell, run_block_signals, run_observed_flags)

FULL = skew_pair_game("full")
SKEW = skew_pair_game("dark")
PRODUCT = coordinate_product_game([[[1, -1], [-1, 1]], [[0.5, -1], [-1, 0.5]]])


def test_step_inside_target_is_uniform():
    np.testing.assert_allclose(blackwell_step(FULL, Orthant([0, 0]), [-1, -0.5]), uniform(2))
    np.testing.assert_allclose(orthant_step_modified(PRODUCT, [0, 0], [-0.1, 0.0]), uniform(2))


def test_step_pushes_first_coordinate_down():
    x = blackwell_step(FULL, Orthant([0, 0]), [1, 0])
    np.testing.assert_allclose(x, [0, 1])
    assert np.all((x @ FULL.payoff.transpose(1, 0, 2))[:, 0] <= 1e-12)


@pytest.mark.parametrize("nature", [Fixed([0.3, 0.7]), Script([[1, 0], [0, 1], [0.5, 0.5]]), BestResponse()],
                         ids=["fixed", "script", "best-response"])
def test_blackwell_condition_and_rate(nature):
    tr = run_blackwell(FULL, Orthant([0, 0]), nature, 2000, seed=1)
    assert tr.violations(1e-7) == 0
    M = payoff_bound(FULL)
    assert np.all(tr.dist <= 2 * M / np.sqrt(tr.n) + 1e-9)


def test_blackwell_polytope_target():
    square = Polytope([[1, 0], [-1, 0], [0, 1], [0, -1]], [0.2, 0.2, 0.2, 0.2])
    tr = run_blackwell(FULL, square, Fixed([0.9, 0.1]), 500, seed=2)
    assert tr.violations(1e-7) == 0
    assert tr.dist[-1] <= 2 * payoff_bound(FULL) / math.sqrt(500)


def test_trace_bookkeeping():
    tr = run_observed_flags(PRODUCT, [0, 0], Fixed(uniform(4)), 200, seed=3)
    np.testing.assert_allclose(tr.avg_mixed[-1], tr.mixed.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(tr.avg_pure, np.cumsum(tr.pure, axis=0) / tr.n[:, None], atol=1e-12)
    names, data = tr.columns()
    assert names[:4] == ["n", "dist", "dist_R", "dist_pure"] and data.shape[0] == 200
    s = tr.summary()
    assert s["horizon"] == 200 and s["header"]["seed"] == 3


def test_traces_are_bit_identical():
    a = run_blackwell(FULL, Orthant([0, 0]), BestResponse(), 300, seed=4).to_csv()
    b = run_blackwell(FULL, Orthant([0, 0]), BestResponse(), 300, seed=4).to_csv()
    c = run_blackwell(FULL, Orthant([0, 0]), BestResponse(), 300, seed=5).to_csv()
    assert a == b and a != c


def test_script_bookkeeping():
    # cycling pure actions against a fixed player: average payoff is the average of the responses
    tr = run_blackwell(FULL, HalfSpace([1, 1], 5.0), Script([[1, 0], [0, 1]]), 100, seed=0)
    expect = 0.5 * (uniform(2) @ FULL.payoff[:, 0] + uniform(2) @ FULL.payoff[:, 1])
    np.testing.assert_allclose(tr.avg_mixed[-1], expect, atol=1e-12)


def test_pure_payoffs_track_mixed_payoffs():
    # pure-payoff distance exceeds mixed-payoff distance + 4M sqrt(log n / n) in < 5% of runs
    M = payoff_bound(FULL)
    checkpoints = [100, 300, 1000]
    exceed = 0
    for rep in range(50):
        tr = run_blackwell(FULL, Orthant([0, 0]), Fixed([0.5, 0.5]), 1000, seed=100 + rep)
        exceed += any(tr.dist_pure[n - 1] > tr.dist[n - 1] + 4 * M * math.sqrt(math.log(n) / n) for n in checkpoints)
    assert exceed < 0.05 * 50


# ---------------------------------------------------------------------------
# observed flags


def test_observed_flags_condition_and_domination():
    tr = run_observed_flags(PRODUCT, [0, 0], BestResponse(), 300, seed=6)
    assert tr.violations(1e-6) == 0
    assert np.all(tr.mixed <= tr.surrogate + 1e-7)
    assert np.all(tr.dist <= tr.dist_surrogate + 1e-9)


def test_surrogate_is_corner_at_flag():
    tr = run_observed_flags(SKEW, [0.5, 0.5], Fixed([0.2, 0.8]), 20, seed=7)
    for x, R in zip(tr.x, tr.surrogate):
        np.testing.assert_allclose(R, modified_payoff(SKEW, x, [0.2, 0.8]), atol=1e-12)


def test_one_action_nature():
    g = make_game(make_rng(8).uniform(-1, 1, (3, 1, 2)), random_signal_law(3, 1, 2, make_rng(9)))
    a = g.payoff[1, 0] + 0.05     # action 1 alone reaches it
    tr = run_observed_flags(g, a, Fixed([1.0]), 500, seed=8)
    M = payoff_bound(g)
    assert np.all(tr.dist <= 2 * M * math.sqrt(2) / np.sqrt(tr.n) + 1e-9)


def test_separating_nature_keeps_distance():
    rep = dual_condition(SKEW, Orthant([0, 0]))
    tr = run_observed_flags(SKEW, [0, 0], Fixed(rep.counter_y), 1000, seed=9)
    assert tr.dist_surrogate[100:].min() >= -rep.margin / 2


def test_strict_step_raises_when_unattainable():
    with pytest.raises(SaddleSolverError) as info:
        orthant_step_modified(SKEW, [0, 0], [1.0, 1.0], strict=True)
    assert info.value.margin < 0


def test_full_monitoring_steps_agree():
    # corner payoffs equal payoffs, so both steps certify the same half-space
    rng = make_rng(10)
    for _ in range(10):
        avg = rng.normal(size=2)
        if np.all(avg <= 0):
            continue
        q = np.maximum(avg, 0)
        for x in (blackwell_step(FULL, Orthant([0, 0]), avg), orthant_step_modified(FULL, [0, 0], avg)):
            assert (x @ FULL.payoff.transpose(1, 0, 2) @ q).max() <= 1e-7


# ---------------------------------------------------------------------------
# blocks


def test_schedule_invariants():
    s = BlockSchedule()
    L = [s.length(b) for b in range(1, 200)]
    g = [s.gamma(b) for b in range(1, 200)]
    assert all(x <= y for x, y in zip(L, L[1:])) and all(x >= y for x, y in zip(g, g[1:]))
    assert min(g) > 0 and max(g) <= 1
    with pytest.raises(ValueError):
        BlockSchedule(explore_scale=0)


def test_blocks_full_exploration_is_uniform_and_estimates_converge():
    g = make_game(make_rng(11).uniform(-1, 1, (2, 3, 1)), random_signal_law(2, 3, 2, make_rng(12)))
    tr = run_block_signals(g, [5.0], BlockSchedule(explore_power=0.0), Fixed([0.2, 0.5, 0.3]), 20_000, seed=13)
    np.testing.assert_allclose(tr.x, 0.5)
    blocks = tr.extras["blocks"]
    L, err = blocks[:, 1], blocks[:, 3]
    first, last = err[: len(err) // 4], err[-len(err) // 4:]
    assert np.median(last) < np.median(first)
    # O(1 / sqrt(L)) concentration, allowing a generous constant
    assert np.all(err[L >= 100] <= 10 / np.sqrt(L[L >= 100]))


def test_blocks_dark_skew_stays_away():
    tr = run_block_signals(SKEW, [0, 0], BlockSchedule(), Fixed([0.5, 0.5]), 10_000, seed=14)
    assert tr.dist_surrogate[-1] >= 0.6


def test_blocks_deterministic_and_logged():
    g = skew_pair_game("full")
    a = run_block_signals(g, [0.2, 0.2], BlockSchedule(), BestResponse(), 2000, seed=15)
    b = run_block_signals(g, [0.2, 0.2], BlockSchedule(), BestResponse(), 2000, seed=15)
    assert a.to_csv() == b.to_csv()
    blocks = a.extras["blocks"]
    assert blocks[:, 1].sum() == 2000 and np.all(blocks[:, 4] >= 0)
    assert a.header["schedule"] == BlockSchedule().describe()


def test_nature_policy_factory():
    assert isinstance(nature_policy("fixed", y=[1, 0]), Fixed)
    assert isinstance(nature_policy("script", ys=[[1, 0]]), Script)
    assert isinstance(nature_policy("best-response"), BestResponse)
    with pytest.raises(ValueError):
        nature_policy("random")


def test_best_response_maximises_step_increase():
    tr = run_blackwell(FULL, Orthant([0, 0]), BestResponse(), 2, seed=0)
    x = tr.x[1]
    avg = tr.avg_mixed[0]
    proj = np.minimum(avg, 0)
    gains = (x @ FULL.payoff.transpose(1, 0, 2) - proj) @ (avg - proj)
    assert gains[tr.j[1]] == pytest.approx(gains.max())
