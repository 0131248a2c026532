"""Units, Greenshields fundamental-diagram algebra and gridded field containers.

Everything is in feet and seconds. Densities are aggregated across lanes
(veh/ft for the whole cross-section).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


@dataclass(frozen=True)
class FDParams:
    """Greenshields parameters: free-flow speed ``v_f`` (ft/s), jam density ``rho_m`` (veh/ft)."""

    v_f: float
    rho_m: float

    def __post_init__(self):
        for name in ("v_f", "rho_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be finite and > 0, got {value!r}")


def _check_finite(rho):
    if not np.all(np.isfinite(rho)):
        raise InvalidInputError("density must be finite")


def greenshields_speed(rho, fd: FDParams):
    """Speed ``v_f (1 - rho/rho_m)``. Not clamped: super-jam densities give negative speed."""
    _check_finite(rho)
    return fd.v_f * (1.0 - rho / fd.rho_m)


def greenshields_flow(rho, fd: FDParams):
    _check_finite(rho)
    return rho * (fd.v_f * (1.0 - rho / fd.rho_m))


def nonlocal_greenshields_speed(rho_n, fd: FDParams):
    """Speed driven by the convolved (look-ahead) density ``rho_n``."""
    return greenshields_speed(rho_n, fd)


_REL_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform space-time mesh of ``nx`` x ``nt`` cells."""

    x0: float
    length: float
    t0: float
    duration: float
    dx: float
    dt: float
    nx: int
    nt: int

    def __post_init__(self):
        for name in ("length", "duration", "dx", "dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"grid {name} must be finite and > 0, got {value!r}")
        if int(self.nx) != self.nx or int(self.nt) != self.nt or self.nx < 2 or self.nt < 2:
            raise InvalidInputError("nx and nt must be integers >= 2")
        if abs(self.nx * self.dx - self.length) > _REL_TOL * self.length:
            raise InvalidInputError("nx * dx must equal length")
        if abs(self.nt * self.dt - self.duration) > _REL_TOL * self.duration:
            raise InvalidInputError("nt * dt must equal duration")

    @classmethod
    def from_cells(cls, x0: float, dx: float, nx: int, t0: float, dt: float, nt: int) -> Grid:
        return cls(x0=x0, length=nx * dx, t0=t0, duration=nt * dt, dx=dx, dt=dt, nx=nx, nt=nt)

    @property
    def x1(self) -> float:
        return self.x0 + self.length

    @property
    def t1(self) -> float:
        return self.t0 + self.duration

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nt)

    def x_center(self, i):
        return self.x0 + (np.asarray(i) + 0.5) * self.dx

    def t_center(self, j):
        return self.t0 + (np.asarray(j) + 0.5) * self.dt

    def x_centers(self) -> np.ndarray:
        return self.x_center(np.arange(self.nx))

    def t_centers(self) -> np.ndarray:
        return self.t_center(np.arange(self.nt))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as two ``(nx, nt)`` arrays."""
        return np.meshgrid(self.x_centers(), self.t_centers(), indexing="ij")

    def contains(self, x, t):
        x = np.asarray(x)
        t = np.asarray(t)
        return (x >= self.x0) & (x <= self.x1) & (t >= self.t0) & (t <= self.t1)

    def header_values(self) -> list:
        return [self.x0, self.length, self.t0, self.duration, self.dx, self.dt, self.nx, self.nt]


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise InvalidInputError(f"values must have shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DensityField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, self.grid.shape)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidInputError("density values must be finite and >= 0")
        object.__setattr__(self, "values", arr)

    def check_against(self, fd: FDParams) -> bool:
        """Warn (and return False) if any cell exceeds 1.5 x jam density."""
        n_bad = int(np.count_nonzero(self.values > 1.5 * fd.rho_m))
        if n_bad:
            warnings.warn(f"{n_bad} cells exceed 1.5*rho_m; data suspect", stacklevel=2)
        return n_bad == 0

    def to_csv(self, path) -> None:
        write_field_csv(path, self.grid, self.values)

    @classmethod
    def from_csv(cls, path) -> DensityField:
        grid, values, _ = read_field_csv(path)
        return cls(grid, values)


@dataclass(frozen=True)
class SpeedField:
    """Speed per cell; ``mask`` is True where the bin holds data."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        mask = np.isfinite(arr) if self.mask is None else np.array(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise InvalidInputError("mask shape mismatch")
        arr = np.where(mask, arr, np.nan)
        valid = arr[mask]
        if not np.all(np.isfinite(valid)) or np.any(valid < 0):
            raise InvalidInputError("valid speed entries must be finite and >= 0")
        mask.flags.writeable = False
        object.__setattr__(self, "values", _frozen(arr, self.grid.shape))
        object.__setattr__(self, "mask", mask)

    def to_csv(self, path) -> None:
        write_field_csv(path, self.grid, self.values, self.mask)

    @classmethod
    def from_csv(cls, path) -> SpeedField:
        grid, values, mask = read_field_csv(path)
        return cls(grid, values, mask)


# Field CSV: a '# grid,...' comment naming the header fields, a 'grid,...' record
# carrying them, then 'i,j,value' rows with i as the outer loop.
_GRID_KEYS = "grid,x0,length,t0,duration,dx,dt,nx,nt"


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_field_csv(path, grid: Grid, values: np.ndarray, mask: np.ndarray | None = None) -> None:
    lines = [f"# {_GRID_KEYS}"]
    head = [_fmt(v) for v in grid.header_values()[:6]] + [str(grid.nx), str(grid.nt)]
    lines.append("grid," + ",".join(head))
    lines.append("i,j,value")
    for i in range(grid.nx):
        for j in range(grid.nt):
            if mask is not None and not mask[i, j]:
                lines.append(f"{i},{j},")
            else:
                lines.append(f"{i},{j},{_fmt(values[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> tuple[Grid, np.ndarray, np.ndarray]:
    """Parse a field CSV; returns (grid, values, mask). Missing values are masked."""
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip()]
    if not rows or rows[0] != f"# {_GRID_KEYS}":
        raise InvalidInputError(f"{path}: missing field CSV header")
    parts = rows[1].split(",")
    if parts[0] != "grid" or len(parts) != 9:
        raise InvalidInputError(f"{path}: malformed grid record")
    x0, length, t0, duration, dx, dt = (float(p) for p in parts[1:7])
    grid = Grid(x0, length, t0, duration, dx, dt, int(parts[7]), int(parts[8]))
    values = np.full(grid.shape, np.nan)
    mask = np.zeros(grid.shape, dtype=bool)
    for lineno, row in enumerate(rows[3:], start=4):
        try:
            i, j, v = row.split(",")
            i, j = int(i), int(j)
            if v:
                values[i, j] = float(v)
                mask[i, j] = True
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"{path}:{lineno}: malformed row {row!r}") from exc
    return grid, values, mask
