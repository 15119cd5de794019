"""Trajectory files, offline filtering, experiment configuration and result files."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import ConfigError, INPUT_NAMES, STATE_NAMES, SoftKoopError
from .mpc import MpcConfig
from .online import ESTIMATORS, OnlineLoopConfig, TrialLog
from .plant import LAYOUTS, PlantParams

log = logging.getLogger(__name__)

TRAJECTORY_HEADER = ("t",) + STATE_NAMES + INPUT_NAMES


class TrajectoryParseError(SoftKoopError):
    def __init__(self, path, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class SchemaError(SoftKoopError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def save_trajectory(path, times, states, inputs) -> None:
    """Write a trajectory CSV with the exact header ``t,x1,...,z3,u1,u2``."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if not (len(times) == len(states) == len(inputs)):
        raise ValueError("times, states and inputs need one row each per sample")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for t, s, u in zip(times, states, inputs):
            writer.writerow([_fmt(t), *map(_fmt, s), *map(_fmt, u)])


def load_trajectory(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a trajectory CSV; returns ``(times, states (n, 9), inputs (n, 2))``.

    Rows must be strictly time-ordered and every cell a finite number.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise SchemaError(f"{path}: header must be {','.join(TRAJECTORY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRAJECTORY_HEADER):
                raise TrajectoryParseError(path, lineno,
                                           f"expected {len(TRAJECTORY_HEADER)} cells, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise TrajectoryParseError(path, lineno, str(exc)) from None
            if not all(math.isfinite(v) for v in vals):
                raise TrajectoryParseError(path, lineno, "non-finite value")
            if rows and vals[0] <= rows[-1][0]:
                raise TrajectoryParseError(path, lineno, "time is not increasing")
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_HEADER))
    return data[:, 0], data[:, 1:10], data[:, 10:12]


def moving_average(signal, window: int) -> np.ndarray:
    """Centered moving average whose window shrinks symmetrically at the ends.

    Sample ``i`` averages ``signal[i - h : i + h + 1]`` with
    ``h = min((window - 1) // 2, i, n - 1 - i)``, so the output keeps the
    input length and an even ``window`` behaves like ``window - 1``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(signal, dtype=float)
    n = x.shape[0]
    half = (window - 1) // 2
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    idx = np.arange(n)
    h = np.minimum(half, np.minimum(idx, n - 1 - idx))
    totals = csum[idx + h + 1] - csum[idx - h]
    return totals / (2 * h + 1).reshape((-1,) + (1,) * (x.ndim - 1))


@dataclass(frozen=True)
class ExperimentConfig:
    """Every tunable of an experiment, as flat ``key=value`` entries."""

    dictionary: str = "gripper"
    svd_tol: float = 1e-8
    N_T: int = 5
    M: int = 5
    T: int = 40
    H_p: int = 3
    grid_levels: int = 4
    Q: tuple = (1.0,)
    R: float = 0.0
    u_min: float = 0.20
    u_max: float = 0.35
    layout: str = "symmetric"
    object: int = 1
    seed: int = 0
    estimator: str = "acd_edmd"
    sindy_lambda: float = 1e-3
    sindy_max_iter: int = 1000
    sindy_tol: float = 1e-8
    sindy_standardize: bool = True
    hold_tol: float = 0.0
    hold_steps: int = 6
    lift_steps: int = 4
    ramp_steps: int = 10
    theta_goal: float = 0.45
    grasp_repetitions: int = 10
    bench_repetitions: int = 8
    timing_repeats: int = 5
    offline_sets: int = 32
    offline_duration: float = 16.0
    loaded_trial_length: int = 26
    filter_window: int = 5
    parallel: int = 1
    dt: float = 0.5
    plate_radius: float = 0.04
    finger_length: float = 0.08
    tau: float = 1.0
    gain: float = 50.0
    alpha: float = 0.0075
    k1: float = 0.1
    k3: float = 0.03
    theta_max: float = 2.0
    noise_std: float = 1e-3

    def __post_init__(self) -> None:
        positive_ints = ("N_T", "M", "T", "H_p", "grid_levels", "sindy_max_iter",
                         "hold_steps", "grasp_repetitions", "bench_repetitions",
                         "timing_repeats", "offline_sets", "loaded_trial_length",
                         "filter_window", "parallel")
        for key in positive_ints:
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be a positive integer")
        if self.N_T < 2:
            raise ConfigError("N_T", "must be >= 2")
        if self.grid_levels < 2:
            raise ConfigError("grid_levels", "must be >= 2")
        if self.T < self.M:
            raise ConfigError("T", "must be >= M")
        if not 0 <= self.u_min < self.u_max <= 1:
            raise ConfigError("u_min", "need 0 <= u_min < u_max <= 1")
        if self.layout not in LAYOUTS:
            raise ConfigError("layout", f"must be one of {LAYOUTS}")
        if not 1 <= self.object <= 6:
            raise ConfigError("object", "must be in 1..6")
        if self.estimator not in ESTIMATORS:
            raise ConfigError("estimator", f"must be one of {ESTIMATORS}")
        if len(self.Q) not in (1, 9) or any(q < 0 for q in self.Q):
            raise ConfigError("Q", "must be one nonnegative weight or nine")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        for key in ("svd_tol", "dt", "tau", "finger_length", "plate_radius", "k1"):
            if getattr(self, key) <= 0:
                raise ConfigError(key, "must be positive")
        for key in ("R", "sindy_lambda", "noise_std", "hold_tol", "lift_steps"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be nonnegative")

    def mpc_config(self) -> MpcConfig:
        q = self.Q[0] if len(self.Q) == 1 else tuple(self.Q)
        return MpcConfig(self.H_p, self.u_min, self.u_max, self.grid_levels, q, self.R)

    def loop_config(self, window: int | None = None) -> OnlineLoopConfig:
        return OnlineLoopConfig(
            init_steps=self.M, window=self.N_T if window is None else window,
            total_steps=self.T, dictionary=self.dictionary, mpc=self.mpc_config(),
            svd_tol=self.svd_tol, sindy_lambda=self.sindy_lambda,
            sindy_max_iter=self.sindy_max_iter, sindy_tol=self.sindy_tol,
            sindy_standardize=self.sindy_standardize, hold_tol=self.hold_tol,
            hold_steps=self.hold_steps)

    def plant_params(self, layout: str | None = None) -> PlantParams:
        return PlantParams(
            layout=layout or self.layout, plate_radius=self.plate_radius,
            finger_length=self.finger_length, tau=self.tau, gain=self.gain,
            alpha=self.alpha, k1=self.k1, k3=self.k3, theta_max=self.theta_max,
            noise_std=self.noise_std, dt=self.dt)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _parse_value(key: str, ftype, raw: str):
    raw = raw.strip()
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError("not finite")
            return val
        if ftype in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype in ("tuple", tuple):
            vals = tuple(float(v) for v in raw.split(",") if v.strip())
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ValueError("empty or non-finite list")
            return vals
        return raw
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Merge ``key=value`` lines over defaults. ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    changes = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, "expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(key, "unknown key")
        changes[key] = _parse_value(key, types[key], value)
    base = base or ExperimentConfig()
    return dataclasses.replace(base, **changes)


def load_config(path=None) -> ExperimentConfig:
    """Read a config file (or defaults when ``path`` is None) and echo it to the log."""
    text = Path(path).read_text() if path is not None else ""
    cfg = parse_config(text)
    for line in config_lines(cfg):
        log.info("config %s", line)
    return cfg


def config_lines(cfg: ExperimentConfig) -> list[str]:
    out = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ",".join(repr(float(v)) for v in val)
        out.append(f"{f.name}={val}")
    return out


TRIAL_COLUMNS = (
    ("t",) + STATE_NAMES + INPUT_NAMES
    + tuple(f"r_{n}" for n in STATE_NAMES)
    + tuple(f"p_{n}" for n in STATE_NAMES)
    + ("f1", "f2", "f3", "fit_through", "buffer_size"))


def save_trial_log(path, trial: TrialLog, timing_path=None) -> None:
    """Write a trial as CSV, one row per observed state.

    Row ``t`` holds the state at ``t``, the input applied at ``t`` and the
    prediction made at ``t`` for ``t + 1``; the final row carries the last
    state with empty input and prediction cells. Wall-clock timings are not
    reproducible, so they go to the optional ``timing_path`` instead.
    """
    n = len(trial.states)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)
        for t in range(n):
            last = t == n - 1
            u = [""] * 2 if last else list(map(_fmt, trial.inputs[t]))
            p = [""] * 9 if last else [_fmt(v) if np.isfinite(v) else "" for v in trial.predictions[t]]
            extra = ["", ""] if last else [str(int(trial.fit_through[t])),
                                           str(int(trial.buffer_sizes[t]))]
            writer.writerow([_fmt(trial.times[t]), *map(_fmt, trial.states[t]), *u,
                             *map(_fmt, trial.references[t]), *p,
                             *map(_fmt, trial.contact_forces[t]), *extra])
    if timing_path is not None:
        with open(timing_path, "w") as fh:
            fh.write("step fit_time_s solve_time_s\n")
            for t, (ft, st) in enumerate(zip(trial.fit_times, trial.solve_times)):
                fh.write(f"{t} {ft:.9f} {st:.9f}\n")


def append_results_index(path, row: dict) -> None:
    """Append one summary row, writing the header when the file is new."""
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        if new:
            writer.writeheader()
        writer.writerow(row)
