"""Command-line entry point: ``softkoop <command> [options]``.

Every command writes its outputs and a ``run.log`` (resolved config, seed
and command line) into ``--out``. CSV outputs depend only on the command,
config and seed; wall-clock timings go to ``*timing.txt`` files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import STATE_NAMES, SoftKoopError
from .dictionary import Dictionary, make_dictionary
from .eval import (SIZES, benchmark_predictors, constant_input_sets, format_grasp_table,
                   format_prediction_table, format_timing_table, grasp_campaign,
                   mse_per_finger, offline_loaded_dataset, write_grasp_csv,
                   write_prediction_csv)
from .io import (ExperimentConfig, append_results_index, config_lines, load_config, load_trajectory,
                 moving_average, save_trajectory, save_trial_log)
from .koopman import (fit_edmd_trajectories, model_from_text, model_to_text,
                      predict_one_step, predict_rollout)
from .online import run_online_trial
from .plant import LAYOUTS, get_object, grasp_outcome, grasp_reference
from .sindy import (export_coefficients, fit_sindy, load_coefficients, sindy_predict)

log = logging.getLogger("softkoop")

COMMANDS = ("collect", "fit", "predict", "control", "bench", "campaign", "plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softkoop",
        description="Online Koopman modeling and MPC for a simulated soft gripper.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", type=int, help="64-bit unsigned seed (overrides config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--estimator", choices=("acd_edmd", "sindy"))
    common.add_argument("--layout", choices=LAYOUTS)
    common.add_argument("--object", type=int, choices=range(1, 7), metavar="{1..6}")
    common.add_argument("--nt", type=int, choices=SIZES)
    common.add_argument("--parallel", type=int, metavar="N")

    helps = {
        "collect": "simulate offline datasets (constant-input sets or loaded trials)",
        "fit": "fit a model from trajectory CSVs",
        "predict": "one-step and rollout predictions of a fitted model, with MSE",
        "control": "run one online grasp trial",
        "bench": "prediction accuracy and fit-time benchmark",
        "campaign": "grasp success rates per layout and object",
        "plot": "plot-ready CSV of one trial's tracking and prediction errors",
    }
    cmds = {name: sub.add_parser(name, parents=[common], help=helps[name],
                                 description=helps[name]) for name in COMMANDS}
    cmds["collect"].add_argument("--kind", choices=("unloaded", "loaded"), default="unloaded")
    cmds["fit"].add_argument("--data", nargs="+", required=True,
                             help="trajectory CSVs or directories of them")
    cmds["fit"].add_argument("--filter", action="store_true",
                             help="moving-average filter states with filter_window")
    cmds["predict"].add_argument("--model", required=True, help="directory written by fit")
    cmds["predict"].add_argument("--data", required=True, help="trajectory CSV")
    cmds["control"].add_argument("--index", help="append a summary row to this results index CSV")
    cmds["plot"].add_argument("--data", help="trial CSV from control (else a trial is run)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    for flag, key in (("seed", "seed"), ("estimator", "estimator"), ("layout", "layout"),
                      ("object", "object"), ("nt", "N_T"), ("parallel", "parallel")):
        val = getattr(args, flag, None)
        if val is not None:
            changes[key] = val
    return cfg.replace(**changes) if changes else cfg


def _setup_log(out: Path, argv) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    log.info("command: softkoop %s", " ".join(argv))
    return handler


def _trajectory_files(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    if not files:
        raise SoftKoopError("no trajectory files found")
    return files


def cmd_collect(cfg, args, out):
    if args.kind == "unloaded":
        for k, (t, s, u) in enumerate(constant_input_sets(cfg, cfg.seed)):
            save_trajectory(out / f"unloaded_{k:03d}.csv", t, s, u)
        n = cfg.offline_sets
    else:
        trajs = offline_loaded_dataset(cfg, cfg.seed)
        for k, (s, u) in enumerate(trajs):
            u = np.vstack([u, u[-1:]])
            save_trajectory(out / f"loaded_{k:03d}.csv", np.arange(len(s)) * cfg.dt, s, u)
        n = len(trajs)
    log.info("wrote %d %s trajectories", n, args.kind)


def cmd_fit(cfg, args, out):
    trajs = []
    for path in _trajectory_files(args.data):
        _, s, u = load_trajectory(path)
        if args.filter:
            s = moving_average(s, cfg.filter_window)
        trajs.append((s, u[:-1]))
    if cfg.estimator == "acd_edmd":
        dictionary = make_dictionary(cfg.dictionary)
        model = fit_edmd_trajectories(trajs, dictionary, cfg.svd_tol)
        (out / "dictionary.txt").write_text(dictionary.to_text())
        (out / "koopman_K.txt").write_text(model_to_text(model))
        log.info("fitted %dx%d Koopman matrix on %d snapshots (rank %d)",
                 *model.K.shape, model.n_snapshots, model.rank)
    else:
        s = np.vstack([t[0][:-1] for t in trajs])
        u = np.vstack([t[1] for t in trajs])
        s1 = np.vstack([t[0][1:] for t in trajs])
        model = fit_sindy(s, u, s1, cfg.sindy_lambda, cfg.sindy_max_iter, cfg.sindy_tol,
                          cfg.sindy_standardize)
        export_coefficients(model, out / "sindy_coefficients.csv",
                            STATE_NAMES + ("u1", "u2"), STATE_NAMES)
        log.info("fitted SINDy model, %d sweeps, sparsity %.3f", model.n_iter, model.sparsity)


def _load_predictor(model_dir: Path):
    if (model_dir / "koopman_K.txt").exists():
        dictionary = Dictionary.from_text((model_dir / "dictionary.txt").read_text())
        model = model_from_text((model_dir / "koopman_K.txt").read_text(), dictionary)
        return (lambda s, u: predict_one_step(model, s, u),
                lambda s0, us: predict_rollout(model, s0, us))
    if (model_dir / "sindy_coefficients.csv").exists():
        model = load_coefficients(model_dir / "sindy_coefficients.csv")

        def rollout(s0, us):
            out, s = [], s0
            for u in us:
                s = sindy_predict(model, s, u)
                out.append(s)
            return np.array(out)
        return (lambda s, u: sindy_predict(model, s, u)), rollout
    raise SoftKoopError(f"{model_dir}: no koopman_K.txt or sindy_coefficients.csv")


def cmd_predict(cfg, args, out):
    one_step, rollout = _load_predictor(Path(args.model))
    t, s, u = load_trajectory(args.data)
    pred = one_step(s[:-1], u[:-1])
    roll = rollout(s[0], u[:-1])
    header = ["t"] + [f"p_{n}" for n in STATE_NAMES]
    _write_rows(out / "predictions.csv", header, np.column_stack([t[1:], pred]))
    _write_rows(out / "rollout.csv", header, np.column_stack([t[1:], roll]))
    rows = []
    for name, p in (("one_step", pred), ("rollout", roll)):
        mse = mse_per_finger(p, s[1:], 0)
        for i, row in enumerate(mse, start=1):
            rows.append([name, i, *row])
    _write_rows(out / "mse.csv", ["kind", "finger", "mse_x", "mse_y", "mse_z"], rows)


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else repr(v if isinstance(v, int)
                                                                else float(v))
                              for v in row) + "\n")


def _control_trial(cfg):
    params = cfg.plant_params()
    total = cfg.T + cfg.lift_steps + cfg.hold_steps
    ref = grasp_reference(params, total, cfg.ramp_steps, cfg.theta_goal)
    obj = get_object(cfg.object)
    trial = run_online_trial(params, obj, ref, cfg.replace(T=total).loop_config(), cfg.seed,
                             cfg.estimator)
    return trial, obj


def cmd_control(cfg, args, out):
    trial, obj = _control_trial(cfg)
    save_trial_log(out / "trial.csv", trial, out / "trial_timing.txt")
    check = None if trial.aborted else grasp_outcome(trial.contact_forces[1:], obj,
                                                    cfg.lift_steps, cfg.hold_steps)
    summary = {"seed": cfg.seed, "layout": cfg.layout, "object": cfg.object,
               "estimator": cfg.estimator, "steps": trial.n_steps,
               "aborted": str(trial.aborted), "grasp_success": str(bool(check and check.success)),
               "min_contacts": check.min_contacts if check else 0,
               "min_force_margin": repr(check.min_margin) if check else "nan"}
    _write_rows(out / "summary.csv", list(summary), [[str(v) for v in summary.values()]])
    if args.index:
        append_results_index(args.index, summary)
    log.info("trial: %d steps, grasp %s", trial.n_steps,
             "held" if check and check.success else "failed")


def cmd_bench(cfg, args, out):
    sizes = (cfg.N_T,) if args.nt else SIZES
    report = benchmark_predictors(cfg, cfg.seed, sizes=sizes)
    write_prediction_csv(report, out / "prediction.csv")
    (out / "prediction_table.txt").write_text(
        "".join(format_prediction_table(report, n) for n in sizes))
    (out / "timing.txt").write_text(format_timing_table(report))
    if report.absent:
        log.warning("absent datasets: %s", ", ".join(report.absent))


def cmd_campaign(cfg, args, out):
    layouts = (args.layout,) if args.layout else LAYOUTS
    objects = (args.object,) if args.object else range(1, 7)
    report = grasp_campaign(cfg, cfg.seed, layouts, objects)
    write_grasp_csv(report, out / "grasp.csv")
    (out / "grasp_table.txt").write_text(format_grasp_table(report))


def cmd_plot(cfg, args, out):
    if args.data:
        data = np.genfromtxt(args.data, delimiter=",", names=True)
        t = data["t"]
        states = np.column_stack([data[n] for n in STATE_NAMES])
        refs = np.column_stack([data[f"r_{n}"] for n in STATE_NAMES])
        preds = np.column_stack([data[f"p_{n}"] for n in STATE_NAMES])
        preds = np.vstack([np.full((1, 9), np.nan), preds[:-1]])
    else:
        trial, _ = _control_trial(cfg)
        t, states, refs = trial.times, trial.states, trial.references
        preds = np.vstack([np.full((1, 9), np.nan), trial.predictions])
    track = np.linalg.norm((states - refs).reshape(len(t), 3, 3), axis=2)
    perr = np.linalg.norm((preds - states).reshape(len(t), 3, 3), axis=2)
    header = (["t"] + [f"z{i}" for i in (1, 2, 3)] + [f"ref_z{i}" for i in (1, 2, 3)]
              + [f"track_err{i}" for i in (1, 2, 3)] + [f"pred_err{i}" for i in (1, 2, 3)])
    rows = np.column_stack([t, states[:, 2::3], refs[:, 2::3], track, perr])
    with open(out / "plot.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if np.isnan(v) else repr(float(v)) for v in row) + "\n")


HANDLERS = {"collect": cmd_collect, "fit": cmd_fit, "predict": cmd_predict,
            "control": cmd_control, "bench": cmd_bench, "campaign": cmd_campaign,
            "plot": cmd_plot}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    handler = None
    try:
        cfg = resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = _setup_log(out, argv)
        for line in config_lines(cfg):
            log.info("config %s", line)
        HANDLERS[args.command](cfg, args, out)
    except (SoftKoopError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        if handler is not None:
            logging.getLogger().removeHandler(handler)
            handler.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
