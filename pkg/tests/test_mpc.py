import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from softkoop.core import ReferenceTrajectory
from softkoop.dictionary import build_gripper_dictionary, build_linear_dictionary
from softkoop.koopman import KoopmanModel, predict_rollout
from softkoop.mpc import (MpcConfig, NoFeasiblePlanError, clamp_input, enumerate_plans,
                          plan_costs, select_plan, solve_step)


def _scalar_model(a=1.0, b=1.0):
    # x+ = a x + b u with lifted inputs kept as identity terms
    d = build_linear_dictionary(1, 1)
    K = np.array([[a, 0.0], [b, 0.0]])
    return KoopmanModel.from_matrix(K, d)


def test_plan_count_and_order():
    cfg = MpcConfig()
    plans = enumerate_plans(cfg, 2)
    assert plans.shape == (4**6, 3, 2)
    assert np.all(plans[0] == cfg.u_min) and np.all(plans[-1] == cfg.u_max)
    flat = plans.reshape(len(plans), -1)
    assert np.all(np.lexsort(flat.T[::-1]) == np.arange(len(plans)))


def test_identity_model_ties_pick_lowest_plan():
    # inputs have no effect, so every plan ties
    d = build_gripper_dictionary()
    K = np.zeros((30, 30))
    K[:9, :9] = np.eye(9)
    model = KoopmanModel.from_matrix(K, d)
    cfg = MpcConfig()
    ref = ReferenceTrajectory(np.ones((10, 9)), 0.1)
    sol = solve_step(model, np.zeros(9), ref, 0, cfg)
    assert np.all(sol.planned_inputs == cfg.u_min)
    assert sol.evaluations == 4096


def test_scalar_toy_exact_plan():
    model = _scalar_model()
    cfg = MpcConfig(horizon=1, u_min=0.0, u_max=1.0, grid_levels=2)
    ref = ReferenceTrajectory(np.array([[0.0], [1.0]]), 0.1)
    sol = solve_step(model, np.zeros(1), ref, 0, cfg)
    assert sol.first_input.tolist() == [1.0]
    assert sol.cost == 0.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_optimal_regardless_of_order(seed):
    rng = np.random.default_rng(seed)
    d = build_gripper_dictionary()
    model = KoopmanModel.from_matrix(rng.normal(size=(30, 30)) * 0.1, d)
    cfg = MpcConfig(horizon=2, grid_levels=3)
    plans = enumerate_plans(cfg, 2)
    x = rng.normal(size=9) * 0.05
    refs = rng.normal(size=(2, 9)) * 0.05
    costs, _ = plan_costs(model, x, refs, plans, cfg)
    perm = rng.permutation(len(plans))
    a = plans[select_plan(costs, plans)]
    b = plans[perm][select_plan(costs[perm], plans[perm])]
    assert np.array_equal(a, b)
    brute = [np.sum((predict_rollout(model, x, p) - refs) ** 2) for p in plans]
    assert costs[select_plan(costs, plans)] <= min(brute) + 1e-12


def test_nonfinite_costs():
    with pytest.raises(NoFeasiblePlanError):
        select_plan(np.array([np.inf, np.nan]), np.zeros((2, 1, 1)))


def test_clamp_and_config():
    cfg = MpcConfig()
    out = clamp_input([-1.0, 5.0], cfg)
    assert out.tolist() == [cfg.u_min, cfg.u_max]
    with pytest.raises(ValueError):
        MpcConfig(horizon=0)
    with pytest.raises(ValueError):
        MpcConfig(u_min=0.4, u_max=0.3)


def test_tracking_converges_on_toy():
    model = _scalar_model(a=0.5, b=1.0)
    cfg = MpcConfig(horizon=2, u_min=0.0, u_max=1.0, grid_levels=11)
    ref = ReferenceTrajectory(np.full((40, 1), 0.6), 0.1)
    x = np.zeros(1)
    errs = []
    for t in range(15):
        u = solve_step(model, x, ref, t, cfg).first_input
        x = 0.5 * x + u
        errs.append(abs(x[0] - 0.6))
    assert errs[-1] < 0.05
    assert max(errs[5:]) <= errs[0]
