"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line
(collected again in the terminal summary) before asserting."""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from softkoop.cli import main
from softkoop.dictionary import build_gripper_dictionary, build_linear_dictionary
from softkoop.eval import SIZES, benchmark_predictors, format_grasp_table, grasp_campaign
from softkoop.io import ExperimentConfig
from softkoop.koopman import (KoopmanModel, decompose, fit_edmd, predict_mode_sum,
                              predict_one_step)

SEED = 2024
TESTS = Path(__file__).parent


def test_criterion_1_edmd_exact_on_linear_plant(verdict):
    # x+ = A x + B u driven by random in-band inputs; K restricted to the
    # state outputs must equal [A B]^T
    d = build_linear_dictionary(9, 2)
    worst, slowest = 0.0, 0.0
    for case in range(100):
        rng = np.random.default_rng([SEED, case])
        A = rng.normal(size=(9, 9))
        A *= rng.uniform(0.5, 0.98) / np.max(np.abs(np.linalg.eigvals(A)))
        B = rng.normal(size=(9, 2))
        u = rng.uniform(0.2, 0.35, (49, 2))
        x = [rng.normal(size=9)]
        for k in range(49):
            x.append(A @ x[-1] + B @ u[k])
        t0 = time.perf_counter()
        model = fit_edmd(np.array(x), u, d)
        slowest = max(slowest, time.perf_counter() - t0)
        truth = np.hstack([A, B]).T
        worst = max(worst, np.linalg.norm(model.readout - truth) / np.linalg.norm(truth))
    ok = worst <= 1e-6 and slowest < 1.0
    verdict(1, ok, f"max relative Frobenius error {worst:.2e} (<= 1e-6), "
                   f"slowest fit {slowest * 1e3:.2f} ms (< 1 s)")
    assert ok


def test_criterion_2_mode_sum_agrees(verdict):
    d = build_gripper_dictionary()
    worst = 0.0
    for case in range(100):
        rng = np.random.default_rng([SEED, 2, case])
        V = rng.normal(size=(30, 30))
        K = V @ np.diag(rng.uniform(-1, 1, 30)) @ np.linalg.inv(V)
        model = KoopmanModel.from_matrix(K, d)
        dec = decompose(model)
        s, u = rng.normal(size=9) * 0.05, rng.uniform(0.2, 0.35, 2)
        worst = max(worst, np.max(np.abs(predict_mode_sum(model, dec, s, u)
                                         - predict_one_step(model, s, u))))
    ok = worst <= 1e-7
    verdict(2, ok, f"max |mode sum - matrix| {worst:.2e} over 100 models (<= 1e-7)")
    assert ok


@pytest.fixture(scope="module")
def bench():
    cfg = ExperimentConfig()
    t0 = time.perf_counter()
    report = benchmark_predictors(cfg, SEED)
    return report, time.perf_counter() - t0


def test_criterion_3_fit_time_ordering(bench, verdict):
    report, _ = bench
    parts, ok = [], True
    for n_t in SIZES:
        edmd = report.get("online", "acd_edmd", n_t).fit_time_mean
        sindy = report.get("online", "sindy", n_t).fit_time_mean
        ok &= sindy >= 10 * edmd
        parts.append(f"N_T={n_t}: edmd {edmd * 1e3:.3f} ms, sindy {sindy * 1e3:.3f} ms "
                     f"(ratio {sindy / edmd:.2f})")
    ceiling = report.get("online", "acd_edmd", 10).fit_time_mean
    ok &= ceiling < 0.01
    verdict(3, ok, "; ".join(parts) + f"; need ratio >= 10 and edmd@10 < 10 ms")
    assert ok


def test_criterion_4_prediction_ordering(bench, verdict):
    report, elapsed = bench
    n_t = ExperimentConfig().N_T
    online = report.get("online", "acd_edmd", n_t).finger_mse
    sindy = report.get("online", "sindy", n_t).finger_mse
    offline = {ds: report.get(ds, "acd_edmd", n_t).finger_mse
               for ds in ("offline_unloaded", "offline_loaded")}
    a = all(np.all(online < v) for v in offline.values())
    b = bool(np.all(online <= sindy))
    ok = a and b and elapsed < 120
    fmt = lambda v: "[" + ", ".join(f"{x:.2e}" for x in v) + "]"
    verdict(4, ok, f"N_T={n_t}, 8 reps: online edmd {fmt(online)} vs offline unloaded "
                   f"{fmt(offline['offline_unloaded'])}, offline loaded "
                   f"{fmt(offline['offline_loaded'])}, online sindy {fmt(sindy)}; "
                   f"benchmark {elapsed:.1f} s (< 120 s)")
    # other window sizes, reported only
    for n in SIZES:
        on = report.get("online", "acd_edmd", n).finger_mse
        print(f"  N_T={n}: (a) {all(np.all(on < report.get(ds, 'acd_edmd', n).finger_mse) for ds in offline)}"
              f" (b) {bool(np.all(on <= report.get('online', 'sindy', n).finger_mse))}")
    assert ok


def test_criterion_5_grasp_campaign(verdict):
    cfg = ExperimentConfig(grasp_repetitions=10)
    t0 = time.perf_counter()
    first = grasp_campaign(cfg, SEED)
    again = grasp_campaign(cfg, SEED)
    elapsed = time.perf_counter() - t0
    sym1 = first.successes["symmetric", 1]
    heavy = (first.successes["symmetric", 6], first.successes["asymmetric", 6])
    same = first.successes == again.successes
    ok = sym1 >= 9 and heavy == (0, 0) and same and elapsed < 300
    verdict(5, ok, f"symmetric obj1 {sym1}/10 (>= 9), obj6 {heavy[0]}/10 and {heavy[1]}/10 "
                   f"(= 0), repeat identical {same}, two campaigns {elapsed:.0f} s (< 300 s)")
    print(format_grasp_table(first))
    assert ok


INVARIANT_TESTS = [
    "test_dictionary.py::test_hermite_recurrence",
    "test_dictionary.py::test_kron_associative",
    "test_koopman.py::test_pinv_moore_penrose",
    "test_sindy.py::test_objective_non_increasing",
    "test_mpc.py::test_optimal_regardless_of_order",
    "test_core.py::test_buffer_keeps_last_entries",
    "test_online.py::test_no_lookahead",
    "test_io.py::test_moving_average_linear",
]


def test_criterion_6_invariant_suites(verdict):
    nodes = [str(TESTS / n) for n in INVARIANT_TESTS]
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                          *nodes], capture_output=True, text=True, cwd=TESTS.parent)
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr
    ok = res.returncode == 0
    verdict(6, ok, f"{len(nodes)} invariant suites, 100 cases per property: {summary}")
    assert ok, res.stdout


SMALL = ("T=12\nbench_repetitions=2\noffline_sets=3\noffline_duration=4.0\n"
         "loaded_trial_length=10\ntiming_repeats=1\ngrasp_repetitions=2\n")


def _run_all(root: Path, cfg: str):
    data, model = root / "data", root / "model"
    commands = [
        ["collect", "--out", str(data)],
        ["collect", "--kind", "loaded", "--config", cfg, "--out", str(root / "loaded")],
        ["fit", "--data", str(data), "--filter", "--out", str(model)],
        ["fit", "--data", str(data), "--estimator", "sindy", "--out", str(root / "sindy")],
        ["predict", "--model", str(model), "--data", str(data / "unloaded_000.csv"),
         "--out", str(root / "pred")],
        ["control", "--object", "3", "--out", str(root / "control")],
        ["bench", "--config", cfg, "--out", str(root / "bench")],
        ["campaign", "--config", cfg, "--object", "2", "--out", str(root / "campaign")],
        ["plot", "--config", cfg, "--out", str(root / "plot")],
    ]
    for argv in commands:
        assert main([*argv, "--seed", "99"]) == 0, argv
    return len(commands)


def test_criterion_7_cli_determinism(tmp_path, verdict):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    n = _run_all(tmp_path / "a", str(cfg))
    _run_all(tmp_path / "b", str(cfg))
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    differ = [str(f) for f in files
              if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    ok = bool(files) and not differ
    verdict(7, ok, f"{n} commands run twice, {len(files)} CSVs compared, "
                   f"{len(differ)} differ {differ[:3]}")
    assert ok
