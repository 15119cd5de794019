"""Online modeling and control loop.

The loop first drives the plant with uniformly random in-band inputs for
``init_steps`` steps and fits an initial Koopman model on those
transitions. Afterwards, at every step it solves the MPC problem with the
current model, applies the first planned input, pushes the observation into
a sliding window of ``window`` transitions and refits on that window.
"""

from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, ReferenceTrajectory, SnapshotBuffer, derive_seed, make_rng
from .dictionary import Dictionary, make_dictionary
from .koopman import DEFAULT_SVD_TOL, fit_edmd, predict_one_step
from .mpc import MpcConfig, NoFeasiblePlanError, enumerate_plans, solve_step
from .plant import GripperPlant, ObjectSpec, PlantParams
from .sindy import DEFAULT_LAMBDA, DEFAULT_MAX_ITER, DEFAULT_TOL, fit_sindy, sindy_predict

log = logging.getLogger(__name__)

ESTIMATORS = ("acd_edmd", "sindy")


@dataclass(frozen=True)
class OnlineLoopConfig:
    init_steps: int = 5
    window: int = 5
    total_steps: int = 40
    dictionary: str = "gripper"
    mpc: MpcConfig = field(default_factory=MpcConfig)
    svd_tol: float = DEFAULT_SVD_TOL
    sindy_lambda: float = DEFAULT_LAMBDA
    sindy_max_iter: int = DEFAULT_MAX_ITER
    sindy_tol: float = DEFAULT_TOL
    sindy_standardize: bool = True
    hold_tol: float = 0.0  # 0 disables early termination
    hold_steps: int = 6

    def __post_init__(self) -> None:
        if self.init_steps < 1:
            raise ConfigError("M", "init_steps must be >= 1")
        if self.window < 2:
            raise ConfigError("N_T", "window must be >= 2")
        if self.total_steps < self.init_steps:
            raise ConfigError("T", "total_steps must be >= init_steps")


@dataclass
class TrialLog:
    """Everything recorded during one trial.

    ``states`` has one more row than ``inputs``: ``inputs[t]`` moved the
    plant from ``states[t]`` to ``states[t + 1]``. ``predictions[t]`` is the
    one-step prediction of ``states[t + 1]`` made before applying
    ``inputs[t]`` (NaN during the random phase). ``fit_through[t]`` is the
    index of the last transition the predicting model was trained on.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    references: np.ndarray
    predictions: np.ndarray
    fit_times: np.ndarray
    solve_times: np.ndarray
    contact_forces: np.ndarray
    fit_through: np.ndarray
    buffer_sizes: np.ndarray
    estimator: str = "acd_edmd"
    seed: int = 0
    aborted: bool = False
    error: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.inputs)

    def deterministic_fields(self) -> dict:
        """Fields that are reproducible bit for bit (everything but wall-clock timings)."""
        return {k: getattr(self, k) for k in (
            "times", "states", "inputs", "references", "predictions",
            "contact_forces", "fit_through", "buffer_sizes")}


class _Recorder:
    def __init__(self, n_state, n_input, first_state, first_force):
        self.states = [first_state]
        self.forces = [first_force]
        self.inputs, self.preds, self.fit_times = [], [], []
        self.solve_times, self.fit_through, self.buffer_sizes = [], [], []
        self.n_state = n_state

    def add(self, u, next_state, force, pred, fit_time, solve_time, through, bufsize):
        self.inputs.append(np.asarray(u, float))
        self.states.append(next_state)
        self.forces.append(force)
        self.preds.append(pred if pred is not None else np.full(self.n_state, np.nan))
        self.fit_times.append(fit_time)
        self.solve_times.append(solve_time)
        self.fit_through.append(through)
        self.buffer_sizes.append(bufsize)

    def build(self, reference, dt, estimator, seed, aborted=False, error=""):
        n = len(self.states)
        m = len(self.inputs)
        states = np.array(self.states)
        return TrialLog(
            times=np.arange(n) * dt,
            states=states,
            inputs=np.array(self.inputs).reshape(m, -1),
            references=np.array([reference.at(t) for t in range(n)]),
            predictions=np.array(self.preds).reshape(m, states.shape[1]),
            fit_times=np.array(self.fit_times, dtype=float),
            solve_times=np.array(self.solve_times, dtype=float),
            contact_forces=np.array(self.forces),
            fit_through=np.array(self.fit_through, dtype=int),
            buffer_sizes=np.array(self.buffer_sizes, dtype=int),
            estimator=estimator, seed=seed, aborted=aborted, error=error)


def _refit(estimator, states, inputs, dictionary, cfg):
    """Fit the control model and the logged predictor on one trajectory.

    Returns ``(koopman_model, predict_fn, seconds)`` where ``seconds`` times
    only the logged estimator's fit.
    """
    t0 = time.perf_counter()
    model = fit_edmd(states, inputs, dictionary, cfg.svd_tol)
    elapsed = time.perf_counter() - t0
    if estimator == "acd_edmd":
        return model, functools.partial(predict_one_step, model), elapsed
    t0 = time.perf_counter()
    sindy = fit_sindy(states[:-1], inputs, states[1:], cfg.sindy_lambda,
                      cfg.sindy_max_iter, cfg.sindy_tol, cfg.sindy_standardize)
    elapsed = time.perf_counter() - t0
    return model, functools.partial(sindy_predict, sindy), elapsed


def run_loop(plant, reference: ReferenceTrajectory, cfg: OnlineLoopConfig, seed: int,
             estimator: str = "acd_edmd", dictionary: Dictionary | None = None,
             dt: float | None = None) -> TrialLog:
    """Run the online loop on any plant exposing ``observation``,
    ``contact_force`` and ``apply(u)``."""
    if estimator not in ESTIMATORS:
        raise ConfigError("estimator", f"unknown estimator {estimator!r}")
    if dictionary is None:
        dictionary = make_dictionary(cfg.dictionary)
    dt = reference.dt if dt is None else dt
    mpc_cfg = cfg.mpc
    rng = make_rng(derive_seed(seed, 1))
    n_in = dictionary.n_input
    buffer = SnapshotBuffer(cfg.window)
    state = plant.observation
    rec = _Recorder(len(state), n_in, state, plant.contact_force)

    # random-input phase
    states, inputs = [state], []
    for t in range(cfg.init_steps):
        u = rng.uniform(mpc_cfg.u_min, mpc_cfg.u_max, n_in)
        nxt = plant.apply(u)
        rec.add(u, nxt, plant.contact_force, None, np.nan, np.nan, -1, len(buffer))
        buffer.push(t, state, u)
        states.append(nxt)
        inputs.append(u)
        state = nxt

    model, predictor, fit_time = _refit(estimator, np.array(states), np.array(inputs),
                                        dictionary, cfg)
    through = cfg.init_steps - 1
    plans = enumerate_plans(mpc_cfg, n_in)

    hold_run = 0
    final_ref = reference.points[-1]
    for t in range(cfg.init_steps, cfg.total_steps):
        try:
            sol = solve_step(model, state, reference, t, mpc_cfg, plans)
        except NoFeasiblePlanError as exc:
            log.warning("trial aborted at step %d: %s", t, exc)
            return rec.build(reference, dt, estimator, seed, aborted=True, error=str(exc))
        u = sol.first_input
        pred = predictor(state, u)
        nxt = plant.apply(u)
        rec.add(u, nxt, plant.contact_force, pred, fit_time, sol.solve_time, through,
                len(buffer))
        buffer.push(t, state, u)
        state = nxt
        model, predictor, fit_time = _refit(estimator, *buffer.transitions(state),
                                            dictionary, cfg)
        through = t
        if cfg.hold_tol > 0:
            hold_run = hold_run + 1 if np.max(np.abs(state - final_ref)) <= cfg.hold_tol else 0
            if hold_run >= cfg.hold_steps:
                break
    return rec.build(reference, dt, estimator, seed)


def run_online_trial(plant_params: PlantParams, obj: ObjectSpec | None,
                     reference: ReferenceTrajectory, cfg: OnlineLoopConfig, seed: int,
                     estimator: str = "acd_edmd") -> TrialLog:
    """One closed-loop trial on the gripper simulator."""
    plant = GripperPlant(plant_params, obj, derive_seed(seed, 2))
    return run_loop(plant, reference, cfg, seed, estimator, dt=plant_params.dt)


def swap_estimator(cfg: OnlineLoopConfig, estimator: str):
    """Trial runner with the given one-step predictor used for logged predictions.

    Control always uses the Koopman model.
    """
    if estimator not in ESTIMATORS:
        raise ConfigError("estimator", f"unknown estimator {estimator!r}")

    def runner(plant_params, obj, reference, seed):
        return run_online_trial(plant_params, obj, reference, cfg, seed, estimator)

    return runner
