"""Lax-Friedrichs reference solver for the local and nonlocal LWR equations.

Used to manufacture ground-truth density fields. The scheme runs on a mesh
``refine`` times finer than the output grid with as many sub-steps per output
interval as the CFL bound requires; the output is the cell average over each
coarse cell, taken at the centre of each output time bin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import DensityField, FDParams, Grid, InvalidInputError, greenshields_flow
from .kernels import KernelSpec, ProfileSampler, Quadrature, convolve, window_samples

PERIODIC = "periodic"
INFLOW_OUTFLOW = "inflow-outflow"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """``kernel=None`` gives the local flux. ``inflow`` is a constant or ``f(t)``;
    None holds the initial upstream density."""

    grid: Grid
    fd: FDParams
    kernel: KernelSpec | None = None
    bc: str = PERIODIC
    inflow: object = None
    cfl: float = 0.5
    refine: int = 1
    quad_points: int = 33
    max_substeps: int = 100_000

    def __post_init__(self):
        if self.bc not in (PERIODIC, INFLOW_OUTFLOW):
            raise InvalidInputError(f"unknown boundary condition {self.bc!r}")
        if not 0 < self.cfl < 1:
            raise InvalidInputError("cfl must lie in (0, 1)")
        if self.refine < 1:
            raise InvalidInputError("refine must be >= 1")


def _initial(ic, grid: Grid, refine: int) -> np.ndarray:
    n = grid.nx * refine
    dx = grid.dx / refine
    if callable(ic):
        return np.asarray(ic(grid.x0 + (np.arange(n) + 0.5) * dx), dtype=float)
    arr = np.asarray(ic, dtype=float)
    if arr.shape == (grid.nx,):
        return np.repeat(arr, refine)
    if arr.shape == (n,):
        return arr.copy()
    raise InvalidInputError(f"initial profile must have {grid.nx} or {n} cells")


class _Flux:
    def __init__(self, cfg: SolverConfig, x0: float, dx: float, n: int):
        self.cfg = cfg
        self.x0, self.dx = x0, dx
        self.xc = x0 + (np.arange(n) + 0.5) * dx
        self.periodic = cfg.bc == PERIODIC
        self.kernel = cfg.kernel
        if self.kernel is not None and not self.periodic:
            self.kernel = replace(self.kernel, truncate=True)
        self.quad = Quadrature(cfg.quad_points)

    def rho_n(self, rho):
        if self.kernel is None:
            return rho
        sampler = ProfileSampler(self.x0, self.dx, rho, periodic=self.periodic)
        ws = window_samples(sampler, self.xc, np.zeros_like(self.xc), self.kernel,
                            self.cfg.fd, self.quad)
        return convolve(ws)[0]

    def __call__(self, rho, rho_n):
        fd = self.cfg.fd
        return rho * fd.v_f * (1.0 - rho_n / fd.rho_m)


def solve(ic, cfg: SolverConfig) -> DensityField:
    """Integrate from ``grid.t0`` and sample every output bin centre."""
    grid, fd = cfg.grid, cfg.fd
    rho = _initial(ic, grid, cfg.refine)
    if np.any(rho < 0) or np.any(rho > fd.rho_m) or not np.all(np.isfinite(rho)):
        raise InvalidInputError("initial density must lie in [0, rho_m]")
    dx = grid.dx / cfg.refine
    n_sub = math.ceil(grid.dt / (cfg.cfl * dx / fd.v_f))
    n_sub += n_sub % 2  # even, so bin centres fall on a step
    if n_sub > cfg.max_substeps:
        raise SolverError(f"CFL needs {n_sub} sub-steps per output step (cap {cfg.max_substeps})")
    dt = grid.dt / n_sub
    lam = dt / dx
    flux = _Flux(cfg, grid.x0, dx, len(rho))
    if cfg.inflow is None:
        inflow = (lambda _t, v=float(rho[0]): v)
    elif callable(cfg.inflow):
        inflow = cfg.inflow
    else:
        inflow = (lambda _t, v=float(cfg.inflow): v)

    out = np.empty(grid.shape)
    for step in range(grid.nt * n_sub):
        j, k = divmod(step, n_sub)
        if k == n_sub // 2:
            out[:, j] = rho.reshape(grid.nx, cfg.refine).mean(axis=1)
        rho_n = flux.rho_n(rho)
        q = flux(rho, rho_n)
        if cfg.bc == PERIODIC:
            r_ext = np.concatenate(([rho[-1]], rho, [rho[0]]))
            q_ext = np.concatenate(([q[-1]], q, [q[0]]))
        else:
            r_in = float(inflow(grid.t0 + step * dt))
            q_in = float(greenshields_flow(r_in, fd)) if cfg.kernel is None else \
                r_in * fd.v_f * (1.0 - rho_n[0] / fd.rho_m)
            r_ext = np.concatenate(([r_in], rho, [rho[-1]]))
            q_ext = np.concatenate(([q_in], q, [q[-1]]))
        f = 0.5 * (q_ext[:-1] + q_ext[1:]) - (0.5 / lam) * (r_ext[1:] - r_ext[:-1])
        rho = rho - lam * (f[1:] - f[:-1])
        if not np.all(np.isfinite(rho)):
            raise SolverError(f"non-finite density at step {step}")
    return DensityField(grid, out)


def riemann_exact(rho_left: float, rho_right: float, fd: FDParams, x, t: float,
                  x_jump: float = 0.0):
    """Entropy solution of the local Greenshields Riemann problem at time ``t``."""
    x = np.asarray(x, dtype=float)
    xi = (x - x_jump) / t
    speed = lambda r: fd.v_f * (1.0 - 2.0 * r / fd.rho_m)  # noqa: E731
    if rho_left <= rho_right:
        s = fd.v_f * (1.0 - (rho_left + rho_right) / fd.rho_m)
        return np.where(xi < s, rho_left, rho_right)
    fan = 0.5 * fd.rho_m * (1.0 - xi / fd.v_f)
    return np.where(xi <= speed(rho_left), rho_left,
                    np.where(xi >= speed(rho_right), rho_right, fan))


BENCHMARKS = ("riemann", "gaussian-jam", "two-wave")


def make_benchmark(name: str, cfg: SolverConfig, **params):
    """Named initial condition plus its solved field.

    The scenario fixes the boundary condition: inflow-outflow for ``riemann``
    and ``gaussian-jam``, periodic for ``two-wave``. Keyword overrides:
    densities in veh/ft, positions and widths as fractions of the segment length.
    """
    g, rho_m = cfg.grid, cfg.fd.rho_m
    if name == "riemann":
        left = params.get("left", 0.08 / 0.11 * rho_m)
        right = params.get("right", 0.02 / 0.11 * rho_m)
        jump = g.x0 + params.get("at", 0.5) * g.length

        def ic(x):
            return np.where(x < jump, left, right)

        cfg = replace(cfg, bc=INFLOW_OUTFLOW, inflow=left)
    elif name == "gaussian-jam":
        base = params.get("background", 0.3 * rho_m)
        peak = params.get("peak", 0.9 * rho_m)
        centre = g.x0 + params.get("at", 0.8) * g.length
        width = params.get("width", 0.2) * g.length

        def ic(x):
            return base + (peak - base) * np.exp(-(((x - centre) / width) ** 2))

        cfg = replace(cfg, bc=INFLOW_OUTFLOW, inflow=base)
    elif name == "two-wave":
        mean = params.get("mean", 0.45 * rho_m)

        def ic(x):
            phase = 2.0 * np.pi * (x - g.x0) / g.length
            return mean + 0.2 * rho_m * np.sin(phase) + 0.1 * rho_m * np.sin(2.0 * phase + 1.0)

        cfg = replace(cfg, bc=PERIODIC)
    else:
        raise InvalidInputError(f"unknown benchmark {name!r}; choose from {BENCHMARKS}")
    return ic, solve(ic, cfg)
