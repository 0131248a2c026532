"""Run configuration: a versioned TOML document validated into typed objects.

Layout (all sections optional except ``grid`` and a data source)::

    schema_version = 1
    output_dir = "runs/demo"

    [grid]                 # x0, t0 default to 0; give either nx/nt or length/duration
    dx = 20.0
    dt = 5.0
    nx = 120
    nt = 60

    [fd]                   # or: fit = true  (fit-from-data, needs trajectories)
    v_f = 54.3
    rho_m = 0.11

    [data]                 # exactly one of benchmark / truth / trajectories
    benchmark = "gaussian-jam"
    solver = { kernel = { family = "constant", mode = "fixed", w_or_w0_ft = 60.0 }, refine = 2 }

    [train]
    mu = 0.5
    residual_kind = "nonlocal-two-var"
    hidden_layers = [20, 20, 20, 20]
    kernel = { family = "constant", mode = "fixed", w_or_w0_ft = 60.0, quad_points = 33 }

    [sampling]
    n_obs = 1000
    n_coll = 5000

    [sweep]
    seeds = [0, 1, 2]
    runs = [
      { model = "local" },
      { model = "nonlocal", family = "constant", mode = "fixed", window = 60.0 },
    ]

Relative paths are resolved against the config file's directory.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .core import FDParams, Grid, InvalidInputError
from .data import SamplingPlan
from .kernels import CONSTANT, FAMILIES, FIXED, MODES, KernelSpec
from .physics import LOCAL, TWO_VAR
from .trainer import TrainConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (a usage error)."""


@dataclass(frozen=True)
class SolverSettings:
    kernel: KernelSpec | None = None
    refine: int = 1
    cfl: float = 0.5
    quad_points: int = 33


@dataclass(frozen=True)
class SweepRun:
    model: str                 # "local" or "nonlocal"
    family: str = CONSTANT
    mode: str = FIXED
    window: float = 60.0

    @property
    def kernel_label(self) -> str:
        if self.model == "local":
            return "none"
        return self.family if self.mode == FIXED else f"{self.family}-variable"


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    fd: FDParams | None          # None means fit from the trajectory data
    train: TrainConfig
    sampling: SamplingPlan
    output_dir: Path
    benchmark: str | None = None
    truth: Path | None = None
    trajectories: Path | None = None
    columns: dict = field(default_factory=dict)
    solver: SolverSettings = SolverSettings()
    sweep_runs: tuple = ()
    sweep_seeds: tuple = ()

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, train=replace(self.train, seed=seed))


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _reject_unknown(sec: dict, allowed, where: str):
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {where}")


def parse_kernel(raw: dict, where: str = "kernel") -> tuple[KernelSpec, int | None]:
    """``{family, mode, w_or_w0_ft, quad_points, truncate}`` -> (KernelSpec, quad_points)."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an inline table")
    _reject_unknown(raw, ("family", "mode", "w_or_w0_ft", "quad_points", "truncate"), where)
    try:
        spec = KernelSpec(raw.get("family", CONSTANT), raw.get("mode", FIXED),
                          float(raw["w_or_w0_ft"]), raw.get("truncate"))
    except KeyError:
        raise ConfigError(f"{where} needs w_or_w0_ft") from None
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return spec, raw.get("quad_points")


def _grid(sec: dict) -> Grid:
    _reject_unknown(sec, ("x0", "t0", "dx", "dt", "nx", "nt", "length", "duration"), "[grid]")
    try:
        dx, dt = float(sec["dx"]), float(sec["dt"])
        x0, t0 = float(sec.get("x0", 0.0)), float(sec.get("t0", 0.0))
        nx = int(sec["nx"]) if "nx" in sec else round(float(sec["length"]) / dx)
        nt = int(sec["nt"]) if "nt" in sec else round(float(sec["duration"]) / dt)
        grid = Grid.from_cells(x0, dx, nx, t0, dt, nt)
    except KeyError as exc:
        raise ConfigError(f"[grid] missing {exc.args[0]}") from None
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"[grid]: {exc}") from exc
    for key, want in (("length", grid.length), ("duration", grid.duration)):
        if key in sec and abs(float(sec[key]) - want) > 1e-9 * want:
            raise ConfigError(f"[grid] {key}={sec[key]} is not a whole number of cells")
    return grid


def _train(sec: dict) -> TrainConfig:
    allowed = ("mu", "max_epochs", "learning_rate", "beta1", "beta2", "eps", "tolerance",
               "patience", "seed", "residual_kind", "kernel", "hidden_layers", "deterministic")
    _reject_unknown(sec, allowed, "[train]")
    kw = {k: sec[k] for k in allowed[:9] if k in sec}
    kw["residual_kind"] = sec.get("residual_kind", TWO_VAR)
    kw["deterministic"] = bool(sec.get("deterministic", True))
    if "hidden_layers" in sec:
        kw["layer_sizes"] = (2, *[int(h) for h in sec["hidden_layers"]], 1)
    if "kernel" in sec:
        spec, quad = parse_kernel(sec["kernel"], "[train] kernel")
        if spec.truncate is None and spec.mode == FIXED:
            spec = replace(spec, truncate=True)
        kw["kernel"] = spec
        if quad is not None:
            kw["quad_points"] = int(quad)
    try:
        return TrainConfig(**kw)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"[train]: {exc}") from exc


def _resolve(base: Path, p) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def parse_config(doc: dict, base_dir=".") -> RunConfig:
    base = Path(base_dir)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    _reject_unknown(doc, ("schema_version", "output_dir", "grid", "fd", "data", "train",
                          "sampling", "sweep"), "config")
    if "grid" not in doc:
        raise ConfigError("config needs a [grid] section")
    grid = _grid(_section(doc, "grid"))

    fd_sec = _section(doc, "fd")
    _reject_unknown(fd_sec, ("v_f", "rho_m", "fit"), "[fd]")
    if fd_sec.get("fit", False):
        fd = None
    else:
        try:
            fd = FDParams(float(fd_sec.get("v_f", 54.3)), float(fd_sec.get("rho_m", 0.11)))
        except InvalidInputError as exc:
            raise ConfigError(f"[fd]: {exc}") from exc

    data = _section(doc, "data")
    _reject_unknown(data, ("benchmark", "truth", "trajectories", "columns", "solver"), "[data]")
    sources = [k for k in ("benchmark", "truth", "trajectories") if k in data]
    if len(sources) != 1:
        raise ConfigError("[data] needs exactly one of benchmark, truth, trajectories")
    truth = _resolve(base, data["truth"]) if "truth" in data else None
    traj = _resolve(base, data["trajectories"]) if "trajectories" in data else None
    for p in (truth, traj):
        if p is not None and not p.is_file():
            raise ConfigError(f"data file not found: {p}")
    if fd is None and traj is None:
        raise ConfigError("[fd] fit = true needs [data] trajectories")
    solver_raw = data.get("solver", {})
    _reject_unknown(solver_raw, ("kernel", "refine", "cfl", "quad_points"), "[data] solver")
    solver = SolverSettings(
        parse_kernel(solver_raw["kernel"], "[data] solver kernel")[0] if "kernel" in solver_raw else None,
        int(solver_raw.get("refine", 1)), float(solver_raw.get("cfl", 0.5)),
        int(solver_raw.get("quad_points", 33)))

    samp = _section(doc, "sampling")
    _reject_unknown(samp, ("n_obs", "n_coll", "seed", "strategy"), "[sampling]")
    try:
        sampling = SamplingPlan(**samp)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"[sampling]: {exc}") from exc

    sweep = _section(doc, "sweep")
    _reject_unknown(sweep, ("runs", "seeds"), "[sweep]")
    runs = []
    for k, raw in enumerate(sweep.get("runs", [])):
        _reject_unknown(raw, ("model", "family", "mode", "window"), f"[sweep] run {k}")
        model = raw.get("model")
        if model not in ("local", "nonlocal"):
            raise ConfigError(f"[sweep] run {k}: model must be 'local' or 'nonlocal'")
        run = SweepRun(model, raw.get("family", CONSTANT), raw.get("mode", FIXED),
                       float(raw.get("window", 60.0)))
        if run.family not in FAMILIES or run.mode not in MODES:
            raise ConfigError(f"[sweep] run {k}: bad family or mode")
        runs.append(run)

    return RunConfig(
        grid=grid, fd=fd, train=_train(_section(doc, "train")), sampling=sampling,
        output_dir=_resolve(base, doc.get("output_dir", "out")),
        benchmark=data.get("benchmark"), truth=truth, trajectories=traj,
        columns=dict(data.get("columns", {})), solver=solver,
        sweep_runs=tuple(runs), sweep_seeds=tuple(int(s) for s in sweep.get("seeds", ())))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc, path.parent)


def sweep_train_config(base: TrainConfig, run: SweepRun) -> TrainConfig:
    if run.model == "local":
        return replace(base, residual_kind=LOCAL)
    kind = base.residual_kind if base.residual_kind != LOCAL else TWO_VAR
    return replace(base, residual_kind=kind,
                   kernel=KernelSpec(run.family, run.mode, run.window, truncate=True))
