"""Look-ahead kernels and the nonlocal (convolved) density.

All kernels are written on the unit window ``s in [0, 1]``. A kernel of length
``w`` evaluated at offset ``tau`` is ``profile(tau / w) / w``, so both the
fixed-length and the density-dependent (variable-length) kernels share one
quadrature layout:

    rho_n(x)   = sum_k c_k rho(x + w s_k)
    d rho_n/dx = sum_k c_k rho_x(x + w s_k) (1 + s_k dw/dx)

with ``c_k`` the trapezoid weights times the unit profile. ``dw/dx`` is zero for
a fixed window, ``-1`` where the window is cut at the downstream end and
``-(w0/rho_m) rho_x`` for the variable-length law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .core import FDParams, InvalidInputError

CONSTANT = "constant"
LINEAR = "linear"
FIXED = "fixed"
VARIABLE = "variable"

FAMILIES = (CONSTANT, LINEAR)
MODES = (FIXED, VARIABLE)

# windows shorter than this collapse to a delta kernel
DELTA_THRESHOLD = 1e-9


class ThickBoundaryError(ValueError):
    """The look-ahead window leaves the road segment and truncation is off."""


class _Delta:
    """Degenerate zero-length kernel: the nonlocal density is the local one."""

    def __repr__(self):
        return "DELTA"


DELTA = _Delta()


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus window: ``length`` is ``w`` (fixed) or ``w0`` (variable).

    ``truncate`` selects the thick-boundary policy. ``None`` means the mode's
    default: raise for fixed windows, truncate-and-renormalize for variable ones.
    """

    family: str = CONSTANT
    mode: str = FIXED
    length: float = 60.0
    truncate: bool | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown kernel mode {self.mode!r}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise InvalidInputError("kernel length must be > 0")

    @property
    def truncates(self) -> bool:
        if self.truncate is None:
            return self.mode == VARIABLE
        return self.truncate

    def label(self) -> str:
        kind = "w0" if self.mode == VARIABLE else "w"
        return f"{self.family}-{self.mode}-{kind}={self.length:g}"


@dataclass(frozen=True)
class Quadrature:
    """Composite trapezoid rule on the unit window."""

    n_points: int = 33

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise InvalidInputError("quadrature needs n_points >= 3")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        h = 1.0 / (self.n_points - 1)
        w = np.full(self.n_points, h)
        w[0] = w[-1] = 0.5 * h
        return w


def unit_profile(family: str, s):
    """Kernel shape on [0, 1], normalized to unit mass."""
    s = np.asarray(s, dtype=float)
    inside = (s >= 0) & (s <= 1)
    if family == CONSTANT:
        prof = np.ones_like(s)
    elif family == LINEAR:
        prof = 2.0 * (1.0 - s)
    else:
        raise InvalidInputError(f"unknown kernel family {family!r}")
    return np.where(inside, prof, 0.0)


def kernel_weight(spec: KernelSpec, offset):
    """theta(offset) for a fixed-length kernel; zero outside [0, w]."""
    offset = np.asarray(offset, dtype=float)
    if np.any(offset < 0):
        raise InvalidInputError("kernel offset must be >= 0")
    w = spec.length
    out = unit_profile(spec.family, offset / w) / w
    return float(out) if out.ndim == 0 else out


def kernel_mass(spec: KernelSpec, quad: Quadrature = Quadrature()) -> float:
    """Trapezoid integral of the kernel over its support."""
    if spec.mode != FIXED:
        raise InvalidInputError("kernel_mass expects a fixed-length kernel")
    w = spec.length
    tau = quad.nodes * w
    return float(np.sum(quad.weights * w * kernel_weight(spec, tau)))


def window_length(spec: KernelSpec, rho_local, fd: FDParams):
    """Variable window ``w0 (1 - rho/rho_m)``, clamped at 0 beyond jam density."""
    if not np.all(np.isfinite(ad.value(rho_local))):
        raise InvalidInputError("local density must be finite")
    w = spec.length * (1.0 - rho_local / fd.rho_m)
    return ad.maximum(w, 0.0)


def modulated_weight(spec: KernelSpec, w_xt: float, offset):
    """Base kernel of length ``w0`` rescaled to length ``w_xt``.

    Returns :data:`DELTA` when the window has collapsed; callers then use the
    local density as the nonlocal one.
    """
    if w_xt < 0 or np.any(np.asarray(offset) < 0):
        raise InvalidInputError("window length and offset must be >= 0")
    if w_xt < DELTA_THRESHOLD:
        return DELTA
    w0 = spec.length
    scale = w0 / w_xt
    # (w0/w) y / w0 written as y / w, so the support edge maps to exactly 1
    base = unit_profile(spec.family, np.asarray(offset, dtype=float) / w_xt) / w0
    out = scale * base
    return float(out) if np.ndim(out) == 0 else out


def modulated_mass(spec: KernelSpec, w_xt: float, quad: Quadrature = Quadrature()) -> float:
    tau = quad.nodes * w_xt
    theta = modulated_weight(spec, w_xt, tau)
    if theta is DELTA:
        return 1.0
    return float(np.sum(quad.weights * w_xt * theta))


# -- density samplers --------------------------------------------------------

class Sample(NamedTuple):
    rho: object
    rho_x: object = None
    rho_t: object = None


class DensitySampler:
    """Something that yields rho and its first derivatives at (x, t).

    ``x_range`` is the road segment ``(x_start, x_end)`` or None if unbounded.
    Subclasses implement :meth:`sample`.
    """

    x_range: tuple[float, float] | None = None

    def sample(self, x, t, dx: bool = True, dt: bool = False) -> Sample:
        raise NotImplementedError

    def rho(self, x, t):
        return self.sample(x, t, dx=False).rho

    def drho_dx(self, x, t):
        return self.sample(x, t).rho_x

    def drho_dt(self, x, t):
        return self.sample(x, t, dx=False, dt=True).rho_t


class FunctionSampler(DensitySampler):
    """Analytic field given as callables ``f(x, t)``, ``f_x(x, t)``, ``f_t(x, t)``."""

    def __init__(self, f, f_x, f_t=None, x_range=None):
        self.f, self.f_x, self.f_t = f, f_x, f_t
        self.x_range = x_range

    def sample(self, x, t, dx=True, dt=False):
        x, t = np.broadcast_arrays(np.asarray(ad.value(x), float), np.asarray(t, float))
        rho = self.f(x, t)
        rho_x = self.f_x(x, t) if dx else None
        rho_t = None
        if dt:
            if self.f_t is None:
                raise InvalidInputError("sampler has no time derivative")
            rho_t = self.f_t(x, t)
        return Sample(rho, rho_x, rho_t)


def _locate(u, n, periodic):
    # u: coordinate in units of cells measured from the first center
    if periodic:
        base = np.floor(u)
        frac = u - base
        i = base.astype(int) % n
        return i, (i + 1) % n, frac, np.ones_like(frac)
    i = np.clip(np.floor(u).astype(int), 0, n - 2)
    frac = u - i
    inside = (frac >= 0) & (frac <= 1)
    return i, i + 1, np.clip(frac, 0.0, 1.0), inside.astype(float)


class ProfileSampler(DensitySampler):
    """Piecewise-linear reconstruction of cell averages along x (time ignored).

    Beyond the outermost cell centers the profile is held constant unless
    ``periodic``.
    """

    def __init__(self, x0: float, dx: float, values, periodic: bool = False):
        self.x0, self.dx = x0, dx
        self.values = np.asarray(values, dtype=float)
        self.periodic = periodic
        n = len(self.values)
        self.x_range = None if periodic else (x0, x0 + n * dx)

    def sample(self, x, t=0.0, dx=True, dt=False):
        x = np.asarray(x, dtype=float)
        v = self.values
        u = (x - self.x0) / self.dx - 0.5
        i, ip, a, inside = _locate(u, len(v), self.periodic)
        rho = (1.0 - a) * v[i] + a * v[ip]
        rho_x = inside * (v[ip] - v[i]) / self.dx if dx else None
        rho_t = np.zeros_like(rho) if dt else None
        return Sample(rho, rho_x, rho_t)


class GridSampler(DensitySampler):
    """Bilinear interpolation of a DensityField between cell centers."""

    def __init__(self, field):
        self.field = field
        g = field.grid
        self.x_range = (g.x0, g.x1)

    def sample(self, x, t, dx=True, dt=False):
        g = self.field.grid
        v = self.field.values
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        i, ip, a, in_x = _locate((x - g.x0) / g.dx - 0.5, g.nx, False)
        j, jp, b, in_t = _locate((t - g.t0) / g.dt - 0.5, g.nt, False)
        v00, v10, v01, v11 = v[i, j], v[ip, j], v[i, jp], v[ip, jp]
        rho = (1 - a) * (1 - b) * v00 + a * (1 - b) * v10 + (1 - a) * b * v01 + a * b * v11
        rho_x = rho_t = None
        if dx:
            rho_x = in_x * ((1 - b) * (v10 - v00) + b * (v11 - v01)) / g.dx
        if dt:
            rho_t = in_t * ((1 - a) * (v01 - v00) + a * (v11 - v10)) / g.dt
        return Sample(rho, rho_x, rho_t)


# -- convolution --------------------------------------------------------------

class WindowSamples(NamedTuple):
    """Everything one residual evaluation needs, on shared quadrature nodes.

    Center quantities have shape (N,); node quantities (N, K).
    """

    rho: object
    rho_x: object
    rho_t: object
    window: object
    window_dx: object
    delta: np.ndarray
    s: np.ndarray
    coeffs: np.ndarray
    node_rho: object
    node_rho_x: object


def _flat(x, t):
    xv = ad.value(x)
    shape = np.broadcast_shapes(np.shape(xv), np.shape(t))
    n = int(np.prod(shape))
    if ad.is_var(x):
        xf = x.reshape(n) if x.shape == shape else (x + np.zeros(shape)).reshape(n)
    else:
        xf = np.broadcast_to(np.asarray(x, float), shape).reshape(n)
    tf = np.broadcast_to(np.asarray(t, float), shape).reshape(n)
    return xf, tf, shape


def window_samples(sampler: DensitySampler, x, t, spec: KernelSpec, fd: FDParams,
                   quad: Quadrature = Quadrature(), need_dt: bool = False) -> WindowSamples:
    """Sample rho at (x, t) and at every quadrature node of the look-ahead window."""
    x, t, _ = _flat(x, t)
    n = len(t)
    center = sampler.sample(x, t, dx=True, dt=need_dt)
    rho, rho_x = center.rho, center.rho_x

    if spec.mode == FIXED:
        w = np.full(n, spec.length)
        w_x = np.zeros(n)
    else:
        w_var = spec.length * (1.0 - rho / fd.rho_m)
        open_ = ad.value(w_var) > 0
        w = ad.maximum(w_var, 0.0)
        w_x = ad.where(open_, rho_x * (-spec.length / fd.rho_m), 0.0)

    if sampler.x_range is not None:
        xs, xe = sampler.x_range
        xv = ad.value(x)
        if np.any(xv < xs - 1e-9) or np.any(xv > xe + 1e-9):
            raise InvalidInputError("evaluation point outside the road segment")
        avail = np.maximum(xe - xv, 0.0)
        cut = ad.value(w) > avail
        if np.any(cut):
            if not spec.truncates:
                k = int(np.argmax(cut))
                raise ThickBoundaryError(
                    f"window of {float(ad.value(w)[k]):.6g} ft at x={float(xv[k]):.6g} leaves the "
                    f"segment ending at {xe:.6g} ft; enable truncation or move the point")
            w = ad.where(cut, avail, w)
            w_x = ad.where(cut, -1.0, w_x)

    delta = ad.value(w) < DELTA_THRESHOLD
    s = quad.nodes
    coeffs = quad.weights * unit_profile(spec.family, s)
    # the first node sits at the centre, so it reuses the centre sample
    first = 1 if len(s) > 1 and s[0] == 0.0 else 0
    xn = ad.reshape(x, (n, 1)) + ad.reshape(w, (n, 1)) * s[first:]
    tn = np.broadcast_to(t[:, None], (n, len(s) - first))
    nodes = sampler.sample(xn, tn, dx=True)
    node_rho, node_rho_x = nodes.rho, nodes.rho_x
    if first:
        node_rho = ad.prepend_column(rho, node_rho)
        node_rho_x = ad.prepend_column(rho_x, node_rho_x)
    return WindowSamples(rho, rho_x, center.rho_t, w, w_x, delta, s, coeffs, node_rho, node_rho_x)


def convolve(ws: WindowSamples):
    """(rho_n, d rho_n / dx) from shared window samples."""
    n = len(ws.delta)
    rho_n = (ws.node_rho * ws.coeffs).sum(axis=1)
    stretch = 1.0 + ad.reshape(ws.window_dx, (n, 1)) * ws.s
    rho_n_x = (ws.node_rho_x * stretch * ws.coeffs).sum(axis=1)
    if np.any(ws.delta):
        rho_n = ad.where(ws.delta, ws.rho, rho_n)
        rho_n_x = ad.where(ws.delta, ws.rho_x, rho_n_x)
    return rho_n, rho_n_x


def _reshaped(v, shape):
    return ad.reshape(v, shape) if shape != () else (v.reshape(()) if ad.is_var(v) else float(v[0]))


def nonlocal_density(sampler, x, t, spec: KernelSpec, fd: FDParams,
                     quad: Quadrature = Quadrature()):
    """Look-ahead weighted mean of the downstream density."""
    _, _, shape = _flat(x, t)
    rho_n, _ = convolve(window_samples(sampler, x, t, spec, fd, quad))
    return _reshaped(rho_n, shape)


def nonlocal_density_dx(sampler, x, t, spec: KernelSpec, fd: FDParams,
                        quad: Quadrature = Quadrature()):
    _, _, shape = _flat(x, t)
    _, rho_n_x = convolve(window_samples(sampler, x, t, spec, fd, quad))
    return _reshaped(rho_n_x, shape)
