import numpy as np
import pytest
from hypothesis import given, strategies as st

from softkoop.core import InsufficientDataError
from softkoop.eval import (GraspReport, benchmark_predictors, format_grasp_table,
                           format_prediction_table, grasp_campaign, magnitude_exponent,
                           mse_per_finger, online_predictions, time_call, write_grasp_csv,
                           write_prediction_csv)
from softkoop.io import ExperimentConfig

SMALL = ExperimentConfig(T=14, bench_repetitions=2, offline_sets=3, offline_duration=4.0,
                         loaded_trial_length=12, timing_repeats=1)


def test_mse_example():
    truth = np.zeros((4, 9))
    pred = np.zeros((4, 9))
    pred[3, 0] = 2.0  # finger 1, x
    pred[2, 8] = 1.0  # finger 3, z
    out = mse_per_finger(pred, truth, n_t=2)
    assert out.shape == (3, 3)
    assert out[0, 0] == 2.0 and out[2, 2] == 0.5 and out.sum() == 2.5
    with pytest.raises(InsufficientDataError):
        mse_per_finger(pred, truth, n_t=4)


@given(st.integers(0, 2**32 - 1), st.integers(0, 9))
def test_mse_matches_loop(seed, n_t):
    rng = np.random.default_rng(seed)
    pred, truth = rng.normal(size=(2, 10, 9))
    oracle = np.zeros((3, 3))
    for k in range(n_t, 10):
        for i in range(3):
            for a in range(3):
                oracle[i, a] += (pred[k, 3 * i + a] - truth[k, 3 * i + a]) ** 2
    oracle /= 10 - n_t
    np.testing.assert_allclose(mse_per_finger(pred, truth, n_t), oracle, rtol=1e-12)


def test_magnitude_and_timer():
    assert magnitude_exponent([3e-7, 1e-9]) == -7
    assert magnitude_exponent([0.0]) == 0
    calls = []
    result, med, mean = time_call(lambda: calls.append(1) or len(calls), repeats=3)
    assert result == 4 and len(calls) == 4 and med >= 0 and mean >= 0


@pytest.fixture(scope="module")
def small_report():
    return benchmark_predictors(SMALL, seed=1, datasets=("offline_unloaded", "offline_loaded",
                                                         "online", "offline_drifting"))


def test_online_predictions_window():
    from softkoop.eval import online_evaluation_trials
    trial = online_evaluation_trials(SMALL.replace(bench_repetitions=1), 0)[0]
    preds, times = online_predictions("acd_edmd", trial, 5, SMALL)
    assert np.all(np.isnan(preds[:5])) and np.all(np.isfinite(preds[5:]))
    assert len(times) == len(preds) - 5


def test_benchmark_rows(small_report):
    assert len(small_report.rows) == 3 * 2 * 3
    assert small_report.absent == ["offline_drifting"]
    row = small_report.get("online", "acd_edmd", 5)
    assert row.mse.shape == (3, 3) and np.all(np.isfinite(row.mse))
    # offline models ignore N_T, but the scored range moves
    assert small_report.get("offline_loaded", "sindy", 10).fit_times


def test_prediction_outputs(small_report, tmp_path):
    write_prediction_csv(small_report, tmp_path / "a.csv")
    write_prediction_csv(small_report, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "time" not in (tmp_path / "a.csv").read_text().splitlines()[0]
    assert format_prediction_table(small_report, 5).splitlines()[0] == "N_T = 5"


def test_grasp_report(tmp_path):
    rep = grasp_campaign(SMALL.replace(T=12), seed=0, layouts=("symmetric",),
                         objects=(1, 6), repetitions=2)
    assert rep.trials == {("symmetric", 1): 2, ("symmetric", 6): 2}
    assert rep.rate("symmetric", 6) == 0.0
    write_grasp_csv(rep, tmp_path / "g.csv")
    assert len((tmp_path / "g.csv").read_text().splitlines()) == 3
    assert "symmetric" in format_grasp_table(rep)


def test_grasp_rate():
    rep = GraspReport({("asymmetric", 2): 3}, {("asymmetric", 2): 4})
    assert rep.rate("asymmetric", 2) == 0.75
