"""Prediction and grasping benchmarks on the simulated gripper.

Prediction benchmark (accuracy and per-step training time): every method is
scored on closed-loop trials grasping object 1. Offline methods are trained
once on a separate dataset; online methods refit on the ``N_T`` most recent
transitions before each one-step prediction.

Grasp campaign (success rates): repeated closed-loop trials per plate layout
and object, each judged by the lift-and-hold force check.
"""

from __future__ import annotations

import csv
import functools
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import N_FINGERS, InsufficientDataError, derive_seed, make_rng
from .dictionary import make_dictionary
from .io import ExperimentConfig, moving_average
from .koopman import fit_edmd_pairs, predict_one_step
from .online import TrialLog, run_online_trial
from .plant import LAYOUTS, GripperPlant, get_object, grasp_outcome, grasp_reference
from .sindy import fit_sindy, sindy_predict

log = logging.getLogger(__name__)

DATASETS = ("offline_unloaded", "offline_loaded", "online")
METHODS = ("acd_edmd", "sindy")
SIZES = (3, 5, 10)


def mse_per_finger(predicted, truth, n_t: int, length: int | None = None) -> np.ndarray:
    """Per-finger, per-axis MSE over indices ``n_t .. length - 1``.

    Returns a ``(3, 3)`` array: row ``i`` is ``[x, y, z]`` for finger ``i + 1``.
    """
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    length = len(truth) if length is None else length
    if length <= n_t:
        raise InsufficientDataError(f"need more than {n_t} samples, got {length}")
    err = predicted[n_t:length] - truth[n_t:length]
    return np.mean(err**2, axis=0).reshape(N_FINGERS, 3)


def magnitude_exponent(values) -> int:
    """Power of ten used to print a table row, as in ``x 10^k``."""
    peak = float(np.max(np.abs(values)))
    return int(np.floor(np.log10(peak))) if peak > 0 else 0


def time_call(fn, repeats: int = 5):
    """Run ``fn`` once as warm-up, then ``repeats`` timed calls.

    Returns ``(result, median_seconds, mean_seconds)``.
    """
    fn()
    times = []
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, statistics.median(times), statistics.fmean(times)


# -- datasets ---------------------------------------------------------------

def constant_input_sets(cfg: ExperimentConfig, seed: int, obj=None):
    """Constant-PWM segments of ``offline_duration`` seconds at ``1/dt`` Hz.

    Each set starts settled under one random in-band input and then holds a
    second one, so fingers either pressurize or depressurize. Returns a list
    of ``(times, states, inputs)``.
    """
    params = cfg.plant_params()
    rng = make_rng(derive_seed(seed, 11))
    n = int(round(cfg.offline_duration / params.dt))
    sets = []
    for k in range(cfg.offline_sets):
        plant = GripperPlant(params, obj, derive_seed(seed, 12, k))
        u_start = rng.uniform(cfg.u_min, cfg.u_max, 2)
        u_hold = rng.uniform(cfg.u_min, cfg.u_max, 2)
        for _ in range(20):
            plant.apply(u_start)
        states = [plant.observation]
        for _ in range(n):
            states.append(plant.apply(u_hold))
        inputs = np.tile(u_hold, (n + 1, 1))
        sets.append((np.arange(n + 1) * params.dt, np.array(states), inputs))
    return sets


def offline_unloaded_dataset(cfg: ExperimentConfig, seed: int):
    """Filtered constant-input sets without an object, as ``(states, inputs)`` pairs."""
    return [(moving_average(s, cfg.filter_window), u[:-1])
            for _, s, u in constant_input_sets(cfg, seed)]


def offline_loaded_dataset(cfg: ExperimentConfig, seed: int):
    """Closed-loop grasp trials: object 1 four times, objects 2 and 3 twice each."""
    params = cfg.plant_params()
    length = cfg.loaded_trial_length
    loop = cfg.replace(T=length - 1).loop_config()
    ref = _reference(cfg, params, length - 1)
    out = []
    for k, obj_id in enumerate((1, 1, 1, 1, 2, 2, 3, 3)):
        trial = run_online_trial(params, get_object(obj_id), ref, loop,
                                 derive_seed(seed, 21, k))
        out.append((trial.states, trial.inputs))
    return out


def _reference(cfg: ExperimentConfig, params, steps: int):
    return grasp_reference(params, steps, cfg.ramp_steps, cfg.theta_goal)


def online_evaluation_trials(cfg: ExperimentConfig, seed: int) -> list[TrialLog]:
    """``bench_repetitions`` closed-loop trials grasping object 1."""
    params = cfg.plant_params()
    ref = _reference(cfg, params, cfg.T)
    return [run_online_trial(params, get_object(1), ref, cfg.loop_config(),
                             derive_seed(seed, 31, r))
            for r in range(cfg.bench_repetitions)]


# -- prediction protocol ----------------------------------------------------

@functools.lru_cache(maxsize=None)
def _dictionary(name):
    return make_dictionary(name)


def fit_predictor(method: str, states, inputs, next_states, cfg: ExperimentConfig,
                  dictionary=None):
    """Fit ``method`` on transition pairs and return a one-step predict function."""
    if method == "acd_edmd":
        model = fit_edmd_pairs(states, inputs, next_states,
                               dictionary or _dictionary(cfg.dictionary), cfg.svd_tol)
        return lambda s, u: predict_one_step(model, s, u)
    if method == "sindy":
        model = fit_sindy(states, inputs, next_states, cfg.sindy_lambda,
                          cfg.sindy_max_iter, cfg.sindy_tol, cfg.sindy_standardize)
        return lambda s, u: sindy_predict(model, s, u)
    raise ValueError(f"unknown method {method!r}")


def _pairs(trajectories):
    s = np.vstack([t[0][:-1] for t in trajectories])
    u = np.vstack([t[1][: len(t[0]) - 1] for t in trajectories])
    s1 = np.vstack([t[0][1:] for t in trajectories])
    return s, u, s1


def offline_predictions(method, training, trial: TrialLog, cfg, repeats=1):
    """Train once on ``training`` trajectories; predict every transition of ``trial``."""
    s, u, s1 = _pairs(training)
    predictor, median, _ = time_call(lambda: fit_predictor(method, s, u, s1, cfg), repeats)
    return predictor(trial.states[:-1], trial.inputs), [median]


def online_predictions(method, trial: TrialLog, window: int, cfg, repeats=1):
    """Sliding-window protocol: the prediction of ``states[k + 1]`` uses the
    ``window`` transitions ending at ``states[k]``.

    Entries ``k < window`` are NaN. Returns predictions and per-fit seconds.
    """
    states, inputs = trial.states, trial.inputs
    n = len(inputs)
    preds = np.full((n, states.shape[1]), np.nan)
    times = []
    for k in range(window, n):
        lo = k - window
        predictor, median, _ = time_call(
            lambda: fit_predictor(method, states[lo:k], inputs[lo:k], states[lo + 1:k + 1], cfg),
            repeats)
        times.append(median)
        preds[k] = predictor(states[k], inputs[k])
    return preds, times


@dataclass
class PredictionRow:
    dataset: str
    method: str
    n_t: int
    mse: np.ndarray  # (3, 3), mean over repetitions
    mse_std: np.ndarray  # (3, 3)
    fit_times: list = field(default_factory=list, repr=False)

    @property
    def fit_time_mean(self) -> float:
        return float(np.mean(self.fit_times))

    @property
    def fit_time_std(self) -> float:
        return float(np.std(self.fit_times))

    @property
    def fit_time_median(self) -> float:
        return float(np.median(self.fit_times))

    @property
    def finger_mse(self) -> np.ndarray:
        """Per-finger MSE of the tip position (sum over axes)."""
        return self.mse.sum(axis=1)


@dataclass
class PredictionReport:
    rows: list
    absent: list = field(default_factory=list)

    def get(self, dataset, method, n_t) -> PredictionRow:
        for r in self.rows:
            if (r.dataset, r.method, r.n_t) == (dataset, method, n_t):
                return r
        raise KeyError((dataset, method, n_t))


def benchmark_predictors(cfg: ExperimentConfig, seed: int, datasets=DATASETS,
                         methods=METHODS, sizes=SIZES, trials=None,
                         training=None) -> PredictionReport:
    """Score every (dataset, method, N_T) cell over the evaluation trials.

    ``trials`` and ``training`` (a dict from dataset name to trajectories)
    may be supplied; otherwise they are generated from ``cfg`` and ``seed``.
    A dataset that is neither supplied nor known is listed as absent.
    """
    if trials is None:
        trials = online_evaluation_trials(cfg, seed)
    training = dict(training or {})
    rows, absent = [], []
    for ds in datasets:
        if ds.startswith("offline") and ds not in training:
            if ds == "offline_unloaded":
                training[ds] = offline_unloaded_dataset(cfg, seed)
            elif ds == "offline_loaded":
                training[ds] = offline_loaded_dataset(cfg, seed)
            else:
                absent.append(ds)
                continue
        elif not ds.startswith("offline") and ds != "online":
            absent.append(ds)
            continue
        for method in methods:
            cached = None
            for n_t in sizes:
                mses, fit_times = [], []
                for i, trial in enumerate(trials):
                    truth = trial.states[1:]
                    if ds == "online":
                        pred, ft = online_predictions(method, trial, n_t, cfg,
                                                      cfg.timing_repeats)
                    else:
                        # offline models do not depend on N_T; fit once per trial
                        if cached is None:
                            cached = [offline_predictions(method, training[ds], tr, cfg,
                                                          cfg.timing_repeats) for tr in trials]
                        pred, ft = cached[i]
                    mses.append(mse_per_finger(pred, truth, n_t))
                    fit_times.extend(ft)
                mses = np.array(mses)
                rows.append(PredictionRow(ds, method, n_t, mses.mean(axis=0),
                                          mses.std(axis=0), fit_times))
                log.info("bench %s/%s N_T=%d mse=%s", ds, method, n_t,
                         np.array2string(rows[-1].finger_mse, precision=3))
    return PredictionReport(rows, absent)


# -- grasp campaign ---------------------------------------------------------

@dataclass
class GraspReport:
    successes: dict  # (layout, object id) -> int
    trials: dict

    def rate(self, layout, obj_id) -> float:
        return self.successes[layout, obj_id] / self.trials[layout, obj_id]


def _grasp_cell(args):
    cfg, layout, obj_id, rep, seed = args
    params = cfg.plant_params(layout)
    total = cfg.T + cfg.lift_steps + cfg.hold_steps
    ref = _reference(cfg, params, total)
    loop = cfg.replace(T=total).loop_config()
    obj = get_object(obj_id)
    trial = run_online_trial(params, obj, ref, loop, derive_seed(seed, 41, LAYOUTS.index(layout),
                                                                   obj_id, rep))
    if trial.aborted:
        return False
    return grasp_outcome(trial.contact_forces[1:], obj, cfg.lift_steps, cfg.hold_steps).success


def grasp_campaign(cfg: ExperimentConfig, seed: int, layouts=LAYOUTS, objects=range(1, 7),
                   repetitions: int | None = None, parallel: int | None = None) -> GraspReport:
    """Run repeated closed-loop grasps per (layout, object) and count successes.

    The trial continues for ``lift_steps + hold_steps`` steps after the
    ``T`` control steps; those final steps are the lift and hold window.
    """
    reps = cfg.grasp_repetitions if repetitions is None else repetitions
    jobs = [(cfg, lay, o, r, seed) for lay in layouts for o in objects for r in range(reps)]
    workers = cfg.parallel if parallel is None else parallel
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_grasp_cell, jobs, chunksize=4))
    else:
        results = [_grasp_cell(j) for j in jobs]
    succ, count = {}, {}
    for (_, lay, o, _, _), ok in zip(jobs, results):
        succ[lay, o] = succ.get((lay, o), 0) + int(ok)
        count[lay, o] = count.get((lay, o), 0) + 1
    return GraspReport(succ, count)


# -- report output ----------------------------------------------------------

def write_prediction_csv(report: PredictionReport, path) -> None:
    """MSE table as CSV (deterministic for fixed seeds; no timings)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "method", "N_T"]
                   + [f"mse_{a}{i}" for i in range(1, 4) for a in "xyz"]
                   + [f"mse_finger{i}" for i in range(1, 4)])
        for r in report.rows:
            w.writerow([r.dataset, r.method, r.n_t]
                       + [repr(float(v)) for v in r.mse.ravel()]
                       + [repr(float(v)) for v in r.finger_mse])


def format_prediction_table(report: PredictionReport, n_t: int = 5) -> str:
    """Accuracy table: one row per method and dataset, bracketed per-axis MSE
    for each finger, scaled by a common power of ten."""
    lines = [f"N_T = {n_t}", f"{'Method':<10} {'Dataset':<18} {'MSE(xi1)':<24} {'MSE(xi2)':<24} "
             f"{'MSE(xi3)':<24} magnitude"]
    for r in report.rows:
        if r.n_t != n_t:
            continue
        k = magnitude_exponent(r.mse)
        cells = ["[" + ",".join(f"{v:.2f}" for v in row / 10.0**k) + "]" for row in r.mse]
        lines.append(f"{r.method:<10} {r.dataset:<18} {cells[0]:<24} {cells[1]:<24} "
                     f"{cells[2]:<24} x10^{k}")
    return "\n".join(lines) + "\n"


def format_timing_table(report: PredictionReport, dataset: str = "online") -> str:
    """Mean per-step fit time (with std and median) for each N_T and method."""
    methods = sorted({r.method for r in report.rows if r.dataset == dataset},
                     key=METHODS.index)
    sizes = sorted({r.n_t for r in report.rows if r.dataset == dataset})
    header = f"{'N_T':<6}" + "".join(f"{m + ' mean (std) [median] s':<42}" for m in methods)
    lines = [header]
    for n in sizes:
        cells = []
        for m in methods:
            r = report.get(dataset, m, n)
            cells.append(f"{r.fit_time_mean:.6f} ({r.fit_time_std:.6f}) "
                         f"[{r.fit_time_median:.6f}]")
        lines.append(f"{n:<6}" + "".join(f"{c:<42}" for c in cells))
    return "\n".join(lines) + "\n"


def write_grasp_csv(report: GraspReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layout", "object", "successes", "trials", "rate"])
        for (lay, o) in sorted(report.trials, key=lambda k: (LAYOUTS.index(k[0]), k[1])):
            w.writerow([lay, o, report.successes[lay, o], report.trials[lay, o],
                        repr(report.rate(lay, o))])


def format_grasp_table(report: GraspReport) -> str:
    objects = sorted({o for _, o in report.trials})
    lines = ["Object      " + "".join(f"{o:>7}" for o in objects)]
    for lay in LAYOUTS:
        if not any(k[0] == lay for k in report.trials):
            continue
        cells = "".join(f"{100 * report.rate(lay, o):>6.0f}%" for o in objects)
        lines.append(f"{lay:<12}{cells}")
    return "\n".join(lines) + "\n"
