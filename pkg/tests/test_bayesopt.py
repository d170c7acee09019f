import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectune.bayesopt import (
    INIT_PRESETS,
    BetaSchedule,
    BoConfig,
    BoState,
    Surrogate,
    acquisition,
    beta_value,
    bo_step,
    initialize,
    regrets,
    run_bo,
    scan_acquisition,
)
from spectune.errors import EvaluationError, InputError
from spectune.greedy import run_greedy
from spectune.kernels import Kernel, fit_interpolant, kernel_matrix

MATERN = Kernel("matern", 0.1)


def square_grid(m, lo=0.0, hi=10.0):
    a = np.linspace(lo, hi, m)
    r, w = np.meshgrid(a, a, indexing="ij")
    return np.column_stack([r.ravel(), w.ravel()])


def dense_acquisition(kernel, sites, values, beta, x):
    K = kernel_matrix(kernel, sites)
    k = kernel.from_distance(np.linalg.norm(sites - x, axis=1))
    return k @ np.linalg.solve(K, values) + beta * (1.0 - k @ np.linalg.solve(K, k))


def smooth_objective(rng):
    c = rng.uniform(2, 8, 2)
    a = rng.uniform(0.5, 2.0, 2)
    phase = rng.uniform(0, 2 * np.pi)
    return lambda x: -a[0] * (x[0] - c[0]) ** 2 / 10 - a[1] * (x[1] - c[1]) ** 2 / 10 + np.sin(x[0] + phase)


# --- schedules -------------------------------------------------------------

def test_increasing_schedule_values():
    sched = BetaSchedule("increasing")
    for m in (1, 2, 3):
        ref = mpmath.sqrt(mpmath.log(mpmath.mpf(10) / 3 * m * m * mpmath.pi ** 2))
        assert abs(beta_value(sched, m) - float(ref)) <= 1e-12
    assert beta_value(sched, 1) == pytest.approx(1.86908, abs=1e-5)
    assert beta_value(sched, 2) == pytest.approx(2.20902, abs=1e-5)


def test_decreasing_schedule_values():
    N = 3.7
    sched = BetaSchedule("decreasing", lam=0.9, norm_estimate=N)
    assert beta_value(sched, 1) == N
    for m in range(1, 8):
        assert beta_value(sched, m) == 0.9 ** (m - 1) * N


def test_constant_schedule_and_checks():
    assert beta_value(BetaSchedule("constant", norm_estimate=2.0), 5) == 2.0
    with pytest.raises(InputError):
        beta_value(BetaSchedule("constant"), 1)
    with pytest.raises(InputError):
        beta_value(BetaSchedule("increasing"), 0)
    with pytest.raises(InputError):
        BetaSchedule("decreasing", lam=1.5)
    with pytest.raises(InputError):
        BetaSchedule("linear")


# --- acquisition -----------------------------------------------------------

def test_acquisition_at_observed_site():
    state = BoState(observed_sites=[np.array([1.0, 1.0]), np.array([4.0, 2.0])], observed_values=[0.3, -1.2])
    assert acquisition(MATERN, state, 5.0, [4.0, 2.0]) == pytest.approx(-1.2, abs=1e-9)


def test_acquisition_far_away():
    state = BoState(observed_sites=[np.array([0.0, 0.0])], observed_values=[2.0])
    assert acquisition(MATERN, state, 1.5, [1e4, 0.0]) == pytest.approx(1.5, abs=1e-12)


def test_acquisition_square_center():
    sites = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    values = np.array([1.0, -2.0, 0.5, 3.0])
    state = BoState(observed_sites=list(sites), observed_values=list(values))
    x = np.array([0.5, 0.5])
    ref = dense_acquisition(MATERN, sites, values, 0.7, x)
    assert acquisition(MATERN, state, 0.7, x) == pytest.approx(ref, abs=1e-8)


def test_scan_matches_pointwise():
    rng = np.random.default_rng(0)
    grid = square_grid(15)
    idx = rng.choice(len(grid), 6, replace=False)
    values = rng.normal(size=6)
    sur = Surrogate.fit(MATERN, grid[idx], values)
    scores = scan_acquisition(sur, grid, 2.0, exclude=list(idx))
    assert np.all(np.isneginf(scores[idx]))
    free = np.setdiff1d(np.arange(len(grid)), idx)
    ref = np.array([dense_acquisition(MATERN, grid[idx], values, 2.0, grid[j]) for j in free])
    np.testing.assert_allclose(scores[free], ref, atol=1e-8)


# --- single step -----------------------------------------------------------

def test_forced_choice():
    grid = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    cfg = BoConfig(grid, BetaSchedule("increasing"), init_set=grid[:2], budget=3, kernel=MATERN)
    state = initialize(cfg, lambda x: float(x.sum()))
    bo_step(cfg, state, lambda x: 0.0)
    assert state.observed_indices[-1] == 2


def test_zero_beta_is_pure_exploitation():
    grid = square_grid(12)
    f = lambda x: -((x[0] - 3) ** 2) - (x[1] - 7) ** 2
    sched = BetaSchedule("constant", norm_estimate=0.0, refresh_norm=False)
    init = grid[[0, 20, 77, 130]]
    cfg = BoConfig(grid, sched, init_set=init, budget=5, kernel=MATERN)
    state = initialize(cfg, f)
    model = fit_interpolant(MATERN, np.array(state.observed_sites), state.observed_values)
    mean = model(grid)
    mean[cfg.init_indices] = -np.inf
    bo_step(cfg, state, f)
    assert state.observed_indices[-1] == int(np.argmax(mean))
    assert state.betas[-1] == 0.0


def test_step_matches_exhaustive_scan():
    grid = square_grid(15)
    f = lambda x: -((x[0] - 6.0) ** 2) - 0.5 * (x[1] - 4.0) ** 2
    cfg = BoConfig(grid, BetaSchedule("constant"), init_set=grid[[16, 112, 208]], budget=4, kernel=MATERN)
    state = initialize(cfg, f)
    sites, values = np.array(state.observed_sites), np.array(state.observed_values)
    K = kernel_matrix(MATERN, sites)
    beta = math.sqrt(values @ np.linalg.solve(K, values))
    scores = [
        -np.inf if j in cfg.init_indices else dense_acquisition(MATERN, sites, values, beta, grid[j])
        for j in range(len(grid))
    ]
    bo_step(cfg, state, f)
    assert state.observed_indices[-1] == int(np.argmax(scores))
    assert state.betas[-1] == pytest.approx(beta, rel=1e-10)


# --- full loop -------------------------------------------------------------

def test_config_validation():
    grid = square_grid(5)
    with pytest.raises(InputError):
        BoConfig(grid, BetaSchedule("constant"), init_set=grid[:3], budget=3)
    with pytest.raises(InputError):
        BoConfig(grid, BetaSchedule("constant"), init_set=np.zeros((0, 2)), budget=3)
    with pytest.raises(InputError):
        BoConfig(grid, BetaSchedule("increasing"), init_set=[[20.0, 20.0]], budget=3)


def test_one_acquisition_step():
    grid = square_grid(10)
    calls = []
    cfg = BoConfig(grid, BetaSchedule("decreasing"), init_set=grid[[5, 50]], budget=3, kernel=MATERN)
    rep = run_bo(cfg, lambda x: calls.append(x) or 1.0)
    assert len(calls) == 3
    assert rep.state.step == 1
    assert rep.state.betas[:2] == [None, None]


def test_constant_objective():
    grid = square_grid(10)
    cfg = BoConfig(grid, BetaSchedule("constant"), init_set=grid[[0]], budget=6, kernel=MATERN)
    rep = run_bo(cfg, lambda x: 2.5, true_optimum=2.5)
    assert rep.best_value == 2.5
    np.testing.assert_array_equal(rep.simple_regret_curve, 0.0)


def test_objective_failure_keeps_partial_state():
    grid = square_grid(6)
    cfg = BoConfig(grid, BetaSchedule("increasing"), init_set=grid[[0, 1]], budget=5, kernel=MATERN)
    n = []

    def f(x):
        n.append(1)
        if len(n) == 4:
            raise RuntimeError("detector offline")
        return -float(x.sum())

    with pytest.raises(EvaluationError) as info:
        run_bo(cfg, f)
    assert len(info.value.partial.observed_values) == 3


def test_init_presets_snap_to_grid():
    axis_r, axis_w = np.linspace(1, 10, 1000), np.linspace(0.1, 1, 1000)
    r, w = np.meshgrid(axis_r, axis_w, indexing="ij")
    grid = np.column_stack([r.ravel(), w.ravel()])
    for name, pts in INIT_PRESETS.items():
        cfg = BoConfig(grid, BetaSchedule("constant"), init_set=pts, budget=20)
        np.testing.assert_allclose(cfg.init_set, pts, atol=0.005)
    assert len(INIT_PRESETS["nine"]) == 9 and len(INIT_PRESETS["four"]) == 4


def test_quadratic_beats_random_search():
    grid = square_grid(50)
    center = np.array([5.0, 5.0])
    f = lambda x: -float(np.sum((x - np.array([7.3, 2.6])) ** 2))
    opt = max(f(x) for x in grid)
    cfg = BoConfig(grid, BetaSchedule("constant"), init_set=[center], budget=20, kernel=MATERN)
    bo_regret = run_bo(cfg, f, true_optimum=opt).simple_regret_curve[-1]
    random_regret = []
    for seed in range(10):
        idx = np.random.default_rng(seed).choice(len(grid), 20, replace=False)
        random_regret.append(opt - max(f(grid[i]) for i in idx))
    assert bo_regret <= np.median(random_regret)


def test_increasing_on_zero_matches_p_greedy():
    grid = square_grid(12)
    start = [0, 77]
    cfg = BoConfig(grid, BetaSchedule("increasing"), init_set=grid[start], budget=12, kernel=MATERN)
    rep = run_bo(cfg, lambda x: 0.0)
    hist = run_greedy("p-greedy", MATERN, grid, budget=10, start=start)
    assert rep.state.observed_indices[2:] == hist.indices


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["constant", "decreasing"]), st.floats(0.1, 50.0))
def test_argmax_invariant_under_scaling(seed, kind, scale):
    rng = np.random.default_rng(seed)
    grid = square_grid(12)
    idx = rng.choice(len(grid), 5, replace=False)
    f = smooth_objective(rng)
    values = np.array([f(grid[i]) for i in idx])

    def pick(vals):
        sur = Surrogate.fit(MATERN, grid[idx], vals)
        norm = math.sqrt(max(vals @ sur.coefficients, 0.0))
        beta = beta_value(BetaSchedule(kind, norm_estimate=norm), 2)
        return int(np.argmax(scan_acquisition(sur, grid, beta, exclude=list(idx))))

    assert pick(values) == pick(values * scale)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["constant", "increasing", "decreasing"]))
def test_budget_no_repeats_monotone_regret(seed, kind):
    rng = np.random.default_rng(seed)
    grid = square_grid(20)
    f = smooth_objective(rng)
    opt = max(f(x) for x in grid)
    calls = []
    init = grid[rng.choice(len(grid), 3, replace=False)]
    cfg = BoConfig(grid, BetaSchedule(kind), init_set=init, budget=12, kernel=MATERN)
    rep = run_bo(cfg, lambda x: calls.append(1) or f(x), true_optimum=opt)
    assert len(calls) == 12
    assert len(set(rep.state.observed_indices)) == 12
    assert np.all(np.diff(rep.simple_regret_curve) <= 0)


# --- regrets ---------------------------------------------------------------

def test_regret_absorbed_after_hit():
    cum, simple = regrets([1.0, 3.0, 2.0, 0.0], 3.0)
    np.testing.assert_array_equal(simple, [2.0, 0.0, 0.0, 0.0])
    assert cum == 2.0 + 0.0 + 1.0 + 3.0


def test_regret_constant_trace():
    cum, simple = regrets([1.5] * 4, 2.0)
    assert cum == 4 * 0.5
    np.testing.assert_array_equal(simple, 0.5)


def test_regret_matches_summation():
    rng = np.random.default_rng(3)
    v = rng.normal(size=30)
    opt = v.max() + 0.25
    cum, simple = regrets(v, opt)
    assert cum == pytest.approx(sum(opt - x for x in v))
    for t in range(30):
        assert simple[t] == pytest.approx(opt - max(v[: t + 1]))


def test_regret_rejects_bad_optimum():
    with pytest.raises(InputError):
        regrets([1.0, 2.0], 1.5)
