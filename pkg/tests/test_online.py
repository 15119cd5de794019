import numpy as np
import pytest
from hypothesis import given, strategies as st

from softkoop.core import ConfigError, ReferenceTrajectory
from softkoop.dictionary import build_linear_dictionary
from softkoop.mpc import MpcConfig
from softkoop.online import OnlineLoopConfig, run_loop, run_online_trial, swap_estimator
from softkoop.plant import LinearToyPlant, PlantParams, get_object, grasp_reference

TOY_MPC = MpcConfig(horizon=2, u_min=0.0, u_max=1.0, grid_levels=5)


def _toy_trial(seed=0, total=20, window=5, estimator="acd_edmd"):
    cfg = OnlineLoopConfig(init_steps=5, window=window, total_steps=total, mpc=TOY_MPC)
    plant = LinearToyPlant([[0.8, 0.1], [0.0, 0.7]], [[0.5], [0.2]], [0.1, -0.1])
    ref = ReferenceTrajectory(np.tile([0.5, 0.3], (total + 1, 1)), 0.1)
    return run_loop(plant, ref, cfg, seed, estimator, dictionary=build_linear_dictionary(2, 1))


def test_linear_toy_predictions_exact():
    trial = _toy_trial()
    err = trial.predictions[5:] - trial.states[6:]
    assert np.max(np.abs(err)) < 1e-6
    assert np.all(np.isnan(trial.predictions[:5]))


def test_bookkeeping():
    trial = _toy_trial(total=20, window=4)
    assert trial.n_steps == 20 and len(trial.states) == 21
    t = np.arange(20)
    np.testing.assert_array_equal(trial.buffer_sizes, np.minimum(t, 4))
    # a prediction at step t only uses transitions that ended by t
    assert np.all(trial.fit_through[5:] == t[5:] - 1)
    assert np.all(trial.fit_through[:5] == -1)
    assert np.all((trial.inputs >= 0) & (trial.inputs <= 1))


@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.integers(5, 14))
def test_no_lookahead(seed, window, total):
    trial = _toy_trial(seed, total=total, window=window)
    t = np.arange(total)
    np.testing.assert_array_equal(trial.buffer_sizes, np.minimum(t, window))
    assert np.all(trial.fit_through < t)
    assert np.all(trial.fit_through[5:] == t[5:] - 1)


def test_total_equal_to_init_steps():
    trial = _toy_trial(total=5)
    assert trial.n_steps == 5 and np.all(np.isnan(trial.predictions))


def test_config_validation():
    with pytest.raises(ConfigError):
        OnlineLoopConfig(init_steps=5, total_steps=4)
    with pytest.raises(ConfigError):
        OnlineLoopConfig(window=1)
    with pytest.raises(ConfigError):
        _toy_trial(estimator="gp")


def test_gripper_trial_deterministic_and_in_band():
    params = PlantParams()
    cfg = OnlineLoopConfig(total_steps=12)
    ref = grasp_reference(params, 12)
    a = run_online_trial(params, get_object(2), ref, cfg, seed=7)
    b = run_online_trial(params, get_object(2), ref, cfg, seed=7)
    for key, val in a.deterministic_fields().items():
        np.testing.assert_array_equal(val, b.deterministic_fields()[key])
    band = cfg.mpc.band
    assert np.all((a.inputs >= band[0]) & (a.inputs <= band[1]))
    assert not a.aborted


def test_swap_estimator_same_control():
    params = PlantParams()
    cfg = OnlineLoopConfig(total_steps=10)
    ref = grasp_reference(params, 10)
    a = swap_estimator(cfg, "acd_edmd")(params, None, ref, 3)
    b = swap_estimator(cfg, "sindy")(params, None, ref, 3)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.states, b.states)
    assert b.estimator == "sindy"
    assert not np.array_equal(a.predictions[5:], b.predictions[5:])
