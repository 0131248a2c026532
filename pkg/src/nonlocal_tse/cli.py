"""Command-line driver: ``nonlocal-tse {ingest,train,eval,solve,sweep}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, load_config, parse_kernel, sweep_train_config
from .core import DensityField, FDParams, Grid, InvalidInputError
from .data import (EstimationError, ParseError, bin_trajectories, estimate_fd_params,
                   read_trajectories, relative_l2_error, sample_points)
from .diffnet import NonFiniteError
from .kernels import ThickBoundaryError
from .solver import BENCHMARKS, SolverConfig, SolverError, make_benchmark
from .trainer import TrainingAborted, default_net, estimate_field, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("nonlocal_tse")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- pipeline pieces ----------------------------------------------------------

def _ground_truth(cfg: RunConfig) -> tuple[DensityField, FDParams]:
    """Density field to sample from and the FD parameters for the physics term."""
    if cfg.benchmark is not None:
        fd = cfg.fd
        s = cfg.solver
        scfg = SolverConfig(cfg.grid, fd, kernel=s.kernel, cfl=s.cfl, refine=s.refine,
                            quad_points=s.quad_points)
        return make_benchmark(cfg.benchmark, scfg)[1], fd
    if cfg.truth is not None:
        field = DensityField.from_csv(cfg.truth)
        if field.grid != cfg.grid:
            raise InvalidInputError(f"{cfg.truth} is not on the configured grid")
        field.check_against(cfg.fd)
        return field, cfg.fd
    traj = read_trajectories(cfg.trajectories, cfg.columns)
    binned = bin_trajectories(traj, cfg.grid, cfg.fd)
    fd = cfg.fd or estimate_fd_params(binned.density, binned.speed)
    return binned.density, fd


def _train_once(cfg: RunConfig, truth: DensityField, fd: FDParams, tcfg=None):
    tcfg = tcfg or cfg.train
    obs, coll = sample_points(truth, cfg.sampling)
    net = default_net(cfg.grid, fd, tcfg)
    report = train(net, obs, coll, fd, tcfg)
    return report, estimate_field(report.net, cfg.grid)


def _limits(deterministic: bool):
    # a single BLAS thread fixes the floating-point reduction order
    return threadpool_limits(1) if deterministic else contextlib.nullcontext()


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out) if args.out else (cfg.output_dir if cfg else Path("."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.deterministic:
        cfg = replace(cfg, train=replace(cfg.train, deterministic=True))
    return cfg


# -- commands -----------------------------------------------------------------

def cmd_ingest(args) -> int:
    if args.config:
        grid = load_config(args.config).grid
    else:
        need = ("x0", "length", "t0", "duration", "dx", "dt")
        if any(getattr(args, k) is None for k in ("length", "duration")):
            raise UsageError("give --config or --length and --duration (plus --dx/--dt)")
        vals = {k: getattr(args, k) for k in need}
        try:
            grid = Grid.from_cells(vals["x0"], vals["dx"], round(vals["length"] / vals["dx"]),
                                   vals["t0"], vals["dt"], round(vals["duration"] / vals["dt"]))
        except InvalidInputError as exc:
            raise UsageError(str(exc)) from exc
    traj = read_trajectories(args.trajectories)
    binned = bin_trajectories(traj, grid)
    out = _out_dir(args)
    binned.density.to_csv(out / "density.csv")
    binned.speed.to_csv(out / "speed.csv")
    binned.spill.to_jsonl(out / "spill.jsonl")
    if binned.spill.entries:
        log.warning("%d segment(s), %.3f vehicle-seconds outside the grid; see spill.jsonl",
                    len(binned.spill.entries), binned.spill.vehicle_seconds)
    print(f"binned {len(traj)} records into {grid.nx}x{grid.nt} cells -> {out}")
    if args.fit_fd:
        fd = estimate_fd_params(binned.density, binned.speed)
        print(f"v_f = {fd.v_f:.4f} ft/s, rho_m = {fd.rho_m:.5f} veh/ft")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    with _limits(cfg.train.deterministic):
        truth, fd = _ground_truth(cfg)
        truth.to_csv(out / "truth.csv")
        try:
            report, est = _train_once(cfg, truth, fd)
        except TrainingAborted as exc:
            exc.report.to_csv(out / "report.csv")
            exc.snapshot.save(out / "checkpoint.npz")
            raise
    report.to_csv(out / "report.csv")
    report.net.save(out / "checkpoint.npz")
    est.to_csv(out / "estimate.csv")
    if not args.no_plots:
        from .plotting import cost_curves
        cost_curves(report, out / "cost.png")
    l2 = relative_l2_error(est, truth)
    print(f"epochs {len(report)} ({report.reason}), J = {report.J[-1]:.6g}, "
          f"relative L2 = {l2:.2f}%")
    return EXIT_OK


def cmd_eval(args) -> int:
    est = DensityField.from_csv(args.estimate)
    truth = DensityField.from_csv(args.truth)
    l2 = relative_l2_error(est, truth)
    print(f"{l2:.2f}")
    if not args.no_plots:
        from .plotting import heatmap
        out = _out_dir(args)
        vmax = max(est.values.max(), truth.values.max())
        heatmap(est.values, est.grid, out / "estimate.png", "estimate", vmin=0, vmax=vmax)
        heatmap(truth.values, truth.grid, out / "truth.png", "truth", vmin=0, vmax=vmax)
        heatmap(np.abs(est.values - truth.values), est.grid, out / "abs_error.png",
                "absolute error", cmap="viridis")
    return EXIT_OK


def cmd_solve(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        grid, fd, s = cfg.grid, cfg.fd, cfg.solver
        kernel, refine, cfl, quad = s.kernel, s.refine, s.cfl, s.quad_points
        if fd is None:
            raise UsageError("solve needs explicit [fd] parameters")
    else:
        grid = Grid.from_cells(0.0, 20.0, 120, 0.0, 5.0, 60)
        fd, kernel, refine, cfl, quad = FDParams(54.3, 0.11), None, 1, 0.5, 33
    if args.kernel:
        fam, mode, w = (args.kernel.split(",") + [None, None])[:3]
        if w is None:
            raise UsageError("--kernel takes family,mode,w_ft")
        kernel = parse_kernel({"family": fam, "mode": mode, "w_or_w0_ft": float(w)}, "--kernel")[0]
    if args.refine is not None:
        refine = args.refine
    scfg = SolverConfig(grid, fd, kernel=kernel, cfl=cfl, refine=refine, quad_points=quad)
    field = make_benchmark(args.scenario, scfg)[1]
    out = _out_dir(args)
    path = out / f"{args.scenario}.csv"
    field.to_csv(path)
    print(f"{args.scenario}: {grid.nx}x{grid.nt} field -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if not cfg.sweep_runs:
        raise UsageError("config has no [sweep] runs")
    out = _out_dir(args, cfg)
    seeds = cfg.sweep_seeds or (cfg.train.seed,)
    rows, detail = [], []
    with _limits(cfg.train.deterministic):
        truth, fd = _ground_truth(cfg)
        for run in cfg.sweep_runs:
            tcfg = sweep_train_config(cfg.train, run)
            errs = []
            for seed in seeds:
                report, est = _train_once(cfg, truth, fd, replace(tcfg, seed=seed))
                errs.append(relative_l2_error(est, truth))
                detail.append((run.model, run.kernel_label, run.window, seed, errs[-1], len(report)))
                log.info("%s %s %g seed %d: L2 %.4f%%", *detail[-1][:5])
            window = "" if run.model == "local" else f"{run.window:g}"
            rows.append((run.model, run.kernel_label, window, float(np.median(errs))))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "kernel", "window", "L2"])
        w.writerows([m, k, win, f"{l2:.4f}"] for m, k, win, l2 in rows)
    with open(out / "sweep_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "kernel", "window", "seed", "L2", "epochs"])
        w.writerows([m, k, f"{win:g}", s, f"{e:.6f}", n] for m, k, win, s, e, n in detail)
    for m, k, win, l2 in rows:
        print(f"{m:9s} {k:18s} {win:>6s} {l2:8.2f}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (TOML)")
    common.add_argument("--seed", type=int, help="override train.seed")
    common.add_argument("--out", help="output directory (default: config output_dir or .)")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded BLAS for bit-reproducible output")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="nonlocal-tse", description="Traffic state estimation with nonlocal physics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", parents=[common], help="bin trajectories into density/speed CSVs")
    ing.add_argument("trajectories")
    ing.add_argument("--x0", type=float, default=0.0)
    ing.add_argument("--length", type=float)
    ing.add_argument("--t0", type=float, default=0.0)
    ing.add_argument("--duration", type=float)
    ing.add_argument("--dx", type=float, default=20.0)
    ing.add_argument("--dt", type=float, default=5.0)
    ing.add_argument("--fit-fd", action="store_true", help="also fit Greenshields parameters")
    ing.set_defaults(func=cmd_ingest)

    tr = sub.add_parser("train", parents=[common], help="train a field estimator from a config")
    tr.add_argument("--no-plots", action="store_true")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", parents=[common], help="relative L2 error plus heat maps")
    ev.add_argument("estimate")
    ev.add_argument("truth")
    ev.add_argument("--no-plots", action="store_true")
    ev.set_defaults(func=cmd_eval)

    so = sub.add_parser("solve", parents=[common], help="solve a benchmark scenario")
    so.add_argument("scenario", choices=BENCHMARKS)
    so.add_argument("--kernel", help="family,mode,w_ft for a nonlocal solve")
    so.add_argument("--refine", type=int)
    so.set_defaults(func=cmd_solve)

    sw = sub.add_parser("sweep", parents=[common], help="train every model of the [sweep] table")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, EstimationError, InvalidInputError, ThickBoundaryError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingAborted, NonFiniteError, SolverError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
