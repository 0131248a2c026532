"""Physics-informed training: data cost, physics cost and the Adam loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .core import DensityField, FDParams, Grid, InvalidInputError
from .diffnet import DEFAULT_LAYERS, FieldNet, NonFiniteError, cost_gradient
from .kernels import CONSTANT, FIXED, KernelSpec, Quadrature
from .physics import RESIDUAL_KINDS, TWO_VAR, residual


@dataclass(frozen=True)
class ObservationSet:
    x: np.ndarray
    t: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.x, self.t, self.rho)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise InvalidInputError("observation arrays must be 1-D and equally long")
        if len(arrays[0]) < 1:
            raise InvalidInputError("need at least one observation")
        if np.any(arrays[2] < 0) or not np.all(np.isfinite(np.concatenate(arrays))):
            raise InvalidInputError("observations must be finite with rho >= 0")
        for name, a in zip(("x", "t", "rho"), arrays):
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class CollocationSet:
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if x.shape != t.shape or x.ndim != 1 or len(x) < 1:
            raise InvalidInputError("collocation arrays must be 1-D, equally long and non-empty")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class TrainConfig:
    mu: float = 0.5
    max_epochs: int = 20000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tolerance: float = 1e-6
    patience: int = 500
    seed: int = 42
    residual_kind: str = TWO_VAR
    # trainer default: windows crossing the downstream end are truncated
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(CONSTANT, FIXED, 60.0, truncate=True))
    quad_points: int = 33
    layer_sizes: tuple = DEFAULT_LAYERS
    deterministic: bool = True

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise InvalidInputError("mu must lie in [0, 1]")
        if self.max_epochs < 1 or self.learning_rate <= 0:
            raise InvalidInputError("max_epochs and learning_rate must be positive")
        if self.residual_kind not in RESIDUAL_KINDS:
            raise InvalidInputError(f"unknown residual kind {self.residual_kind!r}")

    @property
    def quadrature(self) -> Quadrature:
        return Quadrature(self.quad_points)


class TrainingAborted(RuntimeError):
    """Cost went non-finite; carries the epoch and the last finite parameters."""

    def __init__(self, epoch: int, snapshot: FieldNet, report: TrainReport, cause: Exception):
        super().__init__(f"training aborted at epoch {epoch}: {cause}")
        self.epoch = epoch
        self.snapshot = snapshot
        self.report = report


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    J: list = field(default_factory=list)
    J_DL: list = field(default_factory=list)
    J_PHY: list = field(default_factory=list)
    net: FieldNet | None = None
    wall_time: float = 0.0
    reason: str = ""

    def log(self, epoch, j, j_dl, j_phy):
        self.epochs.append(epoch)
        self.J.append(j)
        self.J_DL.append(j_dl)
        self.J_PHY.append(j_phy)

    def __len__(self):
        return len(self.epochs)

    def to_csv(self, path) -> None:
        rows = ["epoch,J,J_DL,J_PHY"]
        rows += [f"{e},{j:.17g},{a:.17g},{b:.17g}"
                 for e, j, a, b in zip(self.epochs, self.J, self.J_DL, self.J_PHY)]
        Path(path).write_text("\n".join(rows) + "\n")


class Adam:
    """Full-batch Adam on a list of parameter arrays (updated in place)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)


def _require_finite(values, x, t, what):
    vals = ad.value(values)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NonFiniteError(f"non-finite {what} at point {k} (x={x[k]:.6g}, t={t[k]:.6g})")


def data_cost(sampler, obs: ObservationSet):
    pred = sampler.rho(obs.x, obs.t)
    _require_finite(pred, obs.x, obs.t, "prediction")
    err = pred - obs.rho
    return (err * err).mean()


def physics_cost(sampler, coll: CollocationSet, fd: FDParams, cfg: TrainConfig):
    r = residual(cfg.residual_kind, sampler, coll.x, coll.t, fd, cfg.kernel, cfg.quadrature)
    _require_finite(r, coll.x, coll.t, "residual")
    return (r * r).mean()


def compute_J_DL(net: FieldNet, obs: ObservationSet) -> float:
    """Mean squared misfit against the observations."""
    return float(data_cost(net.sampler(), obs))


def compute_J_PHY(net: FieldNet, coll: CollocationSet, fd: FDParams, cfg: TrainConfig) -> float:
    """Mean squared PDE residual of ``cfg.residual_kind`` over collocation points."""
    return float(physics_cost(net.sampler(), coll, fd, cfg))


def _make_cost(obs, coll, fd, cfg, parts):
    mu = cfg.mu

    def cost(sampler):
        # a zero-weight term is evaluated for the log only, outside the graph
        plain = sampler.net.sampler()
        j_dl = data_cost(sampler if mu > 0 else plain, obs)
        j_phy = physics_cost(sampler if mu < 1 else plain, coll, fd, cfg)
        parts[:] = [float(ad.value(j_dl)), float(ad.value(j_phy))]
        return mu * j_dl + (1.0 - mu) * j_phy

    return cost


def train(net: FieldNet, obs: ObservationSet, coll: CollocationSet, fd: FDParams,
          cfg: TrainConfig, callback=None) -> TrainReport:
    """Minimize ``mu J_DL + (1 - mu) J_PHY`` with Adam.

    Stops at ``max_epochs`` or once the relative change of J stays below
    ``tolerance`` for ``patience`` consecutive epochs. ``net`` is not modified;
    the trained copy is ``report.net``. Row ``e`` of the report holds the cost
    evaluated before the ``e``-th update.
    """
    start = time.perf_counter()
    work = net.copy()
    report = TrainReport(net=work)
    opt = Adam(work.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    parts = [0.0, 0.0]
    cost = _make_cost(obs, coll, fd, cfg, parts)
    prev, streak = None, 0
    report.reason = "max_epochs"
    for epoch in range(cfg.max_epochs):
        snapshot = work.copy()
        try:
            _, grads = cost_gradient(work, cost)
        except NonFiniteError as exc:
            report.net = snapshot
            report.wall_time = time.perf_counter() - start
            raise TrainingAborted(epoch, snapshot, report, exc) from exc
        j_dl, j_phy = parts
        j = cfg.mu * j_dl + (1.0 - cfg.mu) * j_phy
        report.log(epoch, j, j_dl, j_phy)
        if callback is not None:
            callback(epoch, j, j_dl, j_phy)
        if prev is not None and abs(prev - j) < cfg.tolerance * j:
            streak += 1
            if streak >= cfg.patience:
                report.reason = "plateau"
                break
        else:
            streak = 0
        prev = j
        opt.step(work.params, grads)
    report.wall_time = time.perf_counter() - start
    return report


def estimate_field(net: FieldNet, grid: Grid) -> DensityField:
    """Evaluate the network at every cell center."""
    xx, tt = grid.mesh()
    return DensityField(grid, net.forward(xx, tt))


def default_net(grid: Grid, fd: FDParams, cfg: TrainConfig) -> FieldNet:
    return FieldNet.initialize(fd.rho_m, (grid.x0, grid.x1), (grid.t0, grid.t1),
                               seed=cfg.seed, layer_sizes=cfg.layer_sizes)

