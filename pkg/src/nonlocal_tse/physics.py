"""Pointwise residuals of the local and nonlocal LWR equations.

The functions work on any :class:`~nonlocal_tse.kernels.DensitySampler`;
with a network sampler on traced parameters the residuals are themselves
traced, which is how the physics cost gets its gradient.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .core import FDParams, InvalidInputError
from .kernels import FIXED, KernelSpec, Quadrature, convolve, window_samples

LOCAL = "local"
TWO_VAR = "nonlocal-two-var"
INTEGRO = "nonlocal-integro"
RESIDUAL_KINDS = (LOCAL, TWO_VAR, INTEGRO)


def _flat(x, t):
    shape = np.broadcast_shapes(np.shape(x), np.shape(t))
    n = int(np.prod(shape))
    return (np.broadcast_to(np.asarray(x, float), shape).reshape(n),
            np.broadcast_to(np.asarray(t, float), shape).reshape(n), shape)


def _shaped(r, shape):
    if shape == ():
        return r.reshape(()) if ad.is_var(r) else float(r[0])
    return ad.reshape(r, shape)


def local_residual(sampler, x, t, fd: FDParams):
    """rho_t + v_f (1 - 2 rho/rho_m) rho_x."""
    x, t, shape = _flat(x, t)
    s = sampler.sample(x, t, dx=True, dt=True)
    r = fd.v_f * (1.0 - 2.0 * s.rho / fd.rho_m) * s.rho_x + s.rho_t
    return _shaped(r, shape)


def nonlocal_residual_two_var(sampler, x, t, fd: FDParams, spec: KernelSpec,
                              quad: Quadrature = Quadrature()):
    """Residual with rho and its look-ahead mean rho_n as separate variables."""
    x, t, shape = _flat(x, t)
    ws = window_samples(sampler, x, t, spec, fd, quad, need_dt=True)
    rho_n, rho_n_x = convolve(ws)
    r = (ws.rho_t + fd.v_f * (1.0 - rho_n / fd.rho_m) * ws.rho_x
         - ws.rho * (fd.v_f / fd.rho_m) * rho_n_x)
    return _shaped(r, shape)


def nonlocal_residual_integro(sampler, x, t, fd: FDParams, spec: KernelSpec,
                              quad: Quadrature = Quadrature()):
    """Single-variable form: the integrand is assembled per quadrature node.

    Near the downstream end the truncated window shrinks with x; the extra
    ``(1 + s dw/dx)`` factor keeps this form equal to the two-variable one there.
    """
    if spec.mode != FIXED:
        raise InvalidInputError("the integro-differential form needs a fixed-length kernel")
    x, t, shape = _flat(x, t)
    ws = window_samples(sampler, x, t, spec, fd, quad, need_dt=True)
    n = len(t)
    rho = ad.reshape(ws.rho, (n, 1))
    rho_x = ad.reshape(ws.rho_x, (n, 1))
    stretch = 1.0 + ad.reshape(ws.window_dx, (n, 1)) * ws.s
    integrand = rho_x - (rho * (ws.node_rho_x * stretch) + rho_x * ws.node_rho) * (1.0 / fd.rho_m)
    integral = (integrand * ws.coeffs).sum(axis=1)
    if np.any(ws.delta):
        local = ws.rho_x - 2.0 * ws.rho * ws.rho_x / fd.rho_m
        integral = ad.where(ws.delta, local, integral)
    r = ws.rho_t + fd.v_f * integral
    return _shaped(r, shape)


def residual(kind: str, sampler, x, t, fd: FDParams, spec: KernelSpec | None = None,
             quad: Quadrature = Quadrature()):
    """Dispatch on residual kind."""
    if kind == LOCAL:
        return local_residual(sampler, x, t, fd)
    if spec is None:
        raise InvalidInputError(f"{kind} residual requires a kernel")
    if kind == TWO_VAR:
        return nonlocal_residual_two_var(sampler, x, t, fd, spec, quad)
    if kind == INTEGRO:
        return nonlocal_residual_integro(sampler, x, t, fd, spec, quad)
    raise InvalidInputError(f"unknown residual kind {kind!r}")
