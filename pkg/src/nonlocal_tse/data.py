"""Trajectory ingestion, Edie binning, FD calibration and point sampling."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .core import DensityField, FDParams, Grid, InvalidInputError, SpeedField
from .trainer import CollocationSet, ObservationSet

REQUIRED_COLUMNS = ("vehicle_id", "time_s", "position_ft")


class ParseError(InvalidInputError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EstimationError(ValueError):
    """FD parameters cannot be fitted; supply FDParams manually."""


@dataclass(frozen=True)
class TrajectoryTable:
    """Flat trajectory records, sorted by vehicle then time."""

    vehicle_id: np.ndarray
    time: np.ndarray
    position: np.ndarray
    speed: np.ndarray | None = None
    lane: np.ndarray | None = None

    def __post_init__(self):
        vid = np.asarray(self.vehicle_id)
        t = np.asarray(self.time, dtype=float)
        x = np.asarray(self.position, dtype=float)
        if not (vid.shape == t.shape == x.shape) or t.ndim != 1:
            raise InvalidInputError("trajectory columns must be 1-D and equally long")
        order = np.lexsort((t, vid))
        vid, t, x = vid[order], t[order], x[order]
        same = vid[1:] == vid[:-1]
        if np.any(same & (np.diff(t) <= 0)):
            raise InvalidInputError("time must be strictly increasing within each vehicle")
        object.__setattr__(self, "vehicle_id", vid)
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "position", x)
        for name in ("speed", "lane"):
            col = getattr(self, name)
            if col is not None:
                object.__setattr__(self, name, np.asarray(col)[order])

    def __len__(self):
        return len(self.time)

    @classmethod
    def empty(cls) -> TrajectoryTable:
        return cls(np.array([], dtype=str), np.array([]), np.array([]))


def read_trajectories(path, columns: dict | None = None) -> TrajectoryTable:
    """Read ``vehicle_id,time_s,position_ft[,speed_fps][,lane]`` CSV.

    ``columns`` maps canonical names to the file's own headers, which is how
    NGSIM or CitySim exports are adapted.
    """
    names = {c: c for c in (*REQUIRED_COLUMNS, "speed_fps", "lane")}
    names.update(columns or {})
    vid, t, x, v, lane = [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if names[c] not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", 1)
        has_v, has_lane = names["speed_fps"] in header, names["lane"] in header
        for row in reader:
            line = reader.line_num
            try:
                vid.append(row[names["vehicle_id"]].strip())
                t.append(float(row[names["time_s"]]))
                x.append(float(row[names["position_ft"]]))
                if has_v:
                    v.append(float(row[names["speed_fps"]]))
                if has_lane:
                    lane.append(int(row[names["lane"]]))
            except (TypeError, ValueError, AttributeError) as exc:
                raise ParseError(f"malformed row: {exc}", line) from exc
            if not (np.isfinite(t[-1]) and np.isfinite(x[-1])):
                raise ParseError("non-finite time or position", line)
    try:
        return TrajectoryTable(np.array(vid, dtype=str), np.array(t), np.array(x),
                               np.array(v) if has_v else None,
                               np.array(lane) if has_lane else None)
    except InvalidInputError as exc:
        raise ParseError(str(exc)) from exc


@dataclass
class SpillReport:
    """Trajectory pieces that fell outside the grid."""

    vehicle_seconds: float = 0.0
    entries: list = field(default_factory=list)

    def to_jsonl(self, path) -> None:
        Path(path).write_text("".join(json.dumps(e) + "\n" for e in self.entries))


@dataclass(frozen=True)
class BinnedTraffic:
    density: DensityField
    speed: SpeedField
    vehicle_seconds: np.ndarray
    vehicle_feet: np.ndarray
    spill: SpillReport


def _segment_pieces(t0, x0, t1, x1, grid: Grid):
    """Split straight segments at every grid line; returns piece arrays."""
    ua = (x0 - grid.x0) / grid.dx
    ub = (x1 - grid.x0) / grid.dx
    va = (t0 - grid.t0) / grid.dt
    vb = (t1 - grid.t0) / grid.dt
    lam = [np.zeros_like(ua), np.ones_like(ua)]
    seg = [np.arange(len(ua))] * 2
    for a, b in ((ua, ub), (va, vb)):
        lo = np.floor(np.minimum(a, b)) + 1
        hi = np.ceil(np.maximum(a, b)) - 1
        count = np.maximum(hi - lo + 1, 0).astype(int)
        owner = np.repeat(np.arange(len(a)), count)
        start = np.repeat(lo, count)
        offset = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
        line = start + offset
        span = (b - a)[owner]
        lam.append((line - a[owner]) / span)
        seg.append(owner)
    lam = np.concatenate(lam)
    seg = np.concatenate(seg)
    order = np.lexsort((lam, seg))
    lam, seg = lam[order], seg[order]
    keep = seg[1:] == seg[:-1]
    owner = seg[1:][keep]
    la, lb = lam[:-1][keep], lam[1:][keep]
    mid = 0.5 * (la + lb)
    frac = lb - la
    dtime = (t1 - t0)[owner] * frac
    dist = np.abs(x1 - x0)[owner] * frac
    xm = x0[owner] + (x1 - x0)[owner] * mid
    tm = t0[owner] + (t1 - t0)[owner] * mid
    return owner, dtime, dist, xm, tm


def bin_trajectories(traj: TrajectoryTable, grid: Grid, fd: FDParams | None = None) -> BinnedTraffic:
    """Edie-style density and speed per space-time cell, aggregated over lanes.

    Positions are linearly interpolated between consecutive samples of one
    vehicle. Density is vehicle-seconds / (dx dt); speed is vehicle-feet over
    vehicle-seconds and is masked in empty cells.
    """
    occ = np.zeros(grid.shape)
    dist_acc = np.zeros(grid.shape)
    spill = SpillReport()
    if len(traj) > 1:
        link = traj.vehicle_id[1:] == traj.vehicle_id[:-1]
        t0, t1 = traj.time[:-1][link], traj.time[1:][link]
        x0, x1 = traj.position[:-1][link], traj.position[1:][link]
        seg_vid = traj.vehicle_id[:-1][link]
        owner, dtime, dist, xm, tm = _segment_pieces(t0, x0, t1, x1, grid)
        i = np.floor((xm - grid.x0) / grid.dx).astype(int)
        j = np.floor((tm - grid.t0) / grid.dt).astype(int)
        inside = (i >= 0) & (i < grid.nx) & (j >= 0) & (j < grid.nt)
        np.add.at(occ, (i[inside], j[inside]), dtime[inside])
        np.add.at(dist_acc, (i[inside], j[inside]), dist[inside])
        if np.any(~inside):
            spill.vehicle_seconds = float(dtime[~inside].sum())
            out_segs = np.unique(owner[~inside])
            for k in out_segs:
                spill.entries.append({
                    "vehicle_id": str(seg_vid[k]),
                    "t_start": float(t0[k]), "t_end": float(t1[k]),
                    "x_start": float(x0[k]), "x_end": float(x1[k]),
                    "reason": "outside grid",
                })
    area = grid.dx * grid.dt
    density = DensityField(grid, occ / area)
    mask = occ > 0
    speed_vals = np.divide(dist_acc, occ, out=np.full(grid.shape, np.nan), where=mask)
    speed = SpeedField(grid, speed_vals, mask)
    if fd is not None:
        density.check_against(fd)
    return BinnedTraffic(density, speed, occ, dist_acc, spill)


def estimate_fd_params(density: DensityField, speed: SpeedField, min_pairs: int = 10) -> FDParams:
    """Least-squares Greenshields fit ``v = v_f + s rho``; ``rho_m = -v_f / s``."""
    mask = speed.mask
    rho = density.values[mask]
    v = speed.values[mask]
    if len(rho) < min_pairs:
        raise EstimationError(f"need >= {min_pairs} occupied cells, have {len(rho)}; "
                              "supply FDParams manually")
    if rho.max() <= 0 or np.ptp(rho) < 0.1 * rho.max():
        raise EstimationError("density spread too small to fit; supply FDParams manually")
    design = np.column_stack([np.ones_like(rho), rho])
    (v_f, slope), *_ = np.linalg.lstsq(design, v, rcond=None)
    if slope >= 0 or v_f <= 0:
        raise EstimationError(f"fit gives slope {slope:.4g}, v_f {v_f:.4g}; "
                              "supply FDParams manually")
    return FDParams(float(v_f), float(-v_f / slope))


@dataclass(frozen=True)
class SamplingPlan:
    n_obs: int = 1000
    n_coll: int = 5000
    seed: int = 0
    strategy: str = "lhs"  # collocation: "lhs" or "uniform"

    def __post_init__(self):
        if self.n_obs < 1 or self.n_coll < 1:
            raise InvalidInputError("n_obs and n_coll must be positive")
        if self.strategy not in ("lhs", "uniform"):
            raise InvalidInputError(f"unknown sampling strategy {self.strategy!r}")


def sample_points(field: DensityField, plan: SamplingPlan) -> tuple[ObservationSet, CollocationSet]:
    """Observations at distinct random cell centres; collocation points in the open domain."""
    g = field.grid
    n_cells = g.nx * g.nt
    if plan.n_obs > n_cells:
        raise InvalidInputError(f"n_obs={plan.n_obs} exceeds the {n_cells} grid cells")
    rng = np.random.default_rng(plan.seed)
    cells = rng.choice(n_cells, size=plan.n_obs, replace=False)
    i, j = np.unravel_index(cells, g.shape)
    obs = ObservationSet(g.x_center(i), g.t_center(j), field.values[i, j])
    if plan.strategy == "lhs":
        unit = qmc.LatinHypercube(d=2, seed=rng).random(plan.n_coll)
    else:
        unit = rng.random((plan.n_coll, 2))
    coll = CollocationSet(g.x0 + unit[:, 0] * g.length, g.t0 + unit[:, 1] * g.duration)
    return obs, coll


def relative_l2_error(est: DensityField, truth: DensityField) -> float:
    """100 * ||est - truth||_2 / ||truth||_2 over all cells, in percent."""
    if est.grid != truth.grid:
        raise InvalidInputError("fields live on different grids")
    norm = np.linalg.norm(truth.values)
    if norm == 0:
        raise InvalidInputError("truth field is identically zero")
    return float(100.0 * np.linalg.norm(est.values - truth.values) / norm)
