"""Differentiable density field: a tanh MLP with a bounded logistic head.

The network maps ``(x, t)`` (affinely normalized to the unit square) to
``rho_m * sigmoid(z)``. Input derivatives are propagated alongside the values
as forward-mode tangents. For training, the MLP with its tangents is one node
of the :mod:`autodiff` graph whose reverse sweep is written out by hand, so
parameter gradients of costs containing ``d rho / dx`` (including at
quadrature nodes whose position depends on the network) come from a single
backward pass. :func:`propagate_reference` builds the same program from
generic operations and serves as a cross-check.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .core import InvalidInputError
from .kernels import DensitySampler, Sample

CHECKPOINT_VERSION = 1
DEFAULT_LAYERS = (2,) + (20,) * 8 + (1,)


class NonFiniteError(FloatingPointError):
    """A cost or one of its intermediates stopped being finite."""


class FieldNet:
    """Parameterized field rho(x, t) on ``x_range`` x ``t_range``.

    ``params`` alternates weight matrices (fan_in, fan_out) and bias vectors.
    """

    def __init__(self, layer_sizes, rho_m: float, x_range, t_range, params):
        layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(layer_sizes) < 2 or layer_sizes[0] != 2 or layer_sizes[-1] != 1:
            raise InvalidInputError("layer sizes must start with 2 and end with 1")
        if min(layer_sizes) < 1:
            raise InvalidInputError("layer sizes must be positive")
        self.layer_sizes = layer_sizes
        self.rho_m = float(rho_m)
        self.x_range = (float(x_range[0]), float(x_range[1]))
        self.t_range = (float(t_range[0]), float(t_range[1]))
        self.params = [np.array(p, dtype=float) for p in params]
        expected = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            expected += [(n_in, n_out), (n_out,)]
        if [p.shape for p in self.params] != expected:
            raise InvalidInputError("parameter shapes do not match layer sizes")

    @classmethod
    def initialize(cls, rho_m, x_range, t_range, seed: int = 42,
                   layer_sizes=DEFAULT_LAYERS) -> FieldNet:
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        params = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            params.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            params.append(np.zeros(n_out))
        return cls(layer_sizes, rho_m, x_range, t_range, params)

    @classmethod
    def zeros(cls, rho_m, x_range, t_range, layer_sizes=DEFAULT_LAYERS) -> FieldNet:
        net = cls.initialize(rho_m, x_range, t_range, 0, layer_sizes)
        net.params = [np.zeros_like(p) for p in net.params]
        return net

    def copy(self) -> FieldNet:
        return FieldNet(self.layer_sizes, self.rho_m, self.x_range, self.t_range,
                        [p.copy() for p in self.params])

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def sampler(self, params=None) -> NetSampler:
        return NetSampler(self, self.params if params is None else params)

    def forward(self, x, t):
        """rho_hat at (x, t); result has the broadcast shape of the inputs."""
        return self.sampler().sample(x, t, dx=False).rho

    def input_gradients(self, x, t):
        """Exact (d rho/dx, d rho/dt) at (x, t)."""
        s = self.sampler().sample(x, t, dx=True, dt=True)
        return s.rho_x, s.rho_t

    def save(self, path) -> None:
        arrays = {f"p{k}": p for k, p in enumerate(self.params)}
        np.savez(path, version=CHECKPOINT_VERSION, layer_sizes=np.array(self.layer_sizes),
                 rho_m=self.rho_m, x_range=np.array(self.x_range),
                 t_range=np.array(self.t_range), **arrays)

    @classmethod
    def load(cls, path) -> FieldNet:
        with np.load(path) as data:
            if int(data["version"]) != CHECKPOINT_VERSION:
                raise InvalidInputError(f"unsupported checkpoint version {int(data['version'])}")
            sizes = tuple(int(n) for n in data["layer_sizes"])
            params = [data[f"p{k}"] for k in range(2 * (len(sizes) - 1))]
            return cls(sizes, float(data["rho_m"]), tuple(data["x_range"]),
                       tuple(data["t_range"]), params)


def propagate_reference(net: FieldNet, params, x, t, dx=True, dt=False):
    """Op-by-op version of :func:`propagate`, traced through generic autodiff ops.

    Slower; kept as an independent check of the fused reverse sweep.
    """
    m = len(t)
    lx = net.x_range[1] - net.x_range[0]
    lt = net.t_range[1] - net.t_range[0]
    u = ad.reshape((x - net.x_range[0]) * (1.0 / lx), (m, 1))
    v = np.reshape((t - net.t_range[0]) / lt, (m, 1))
    w_in, b_in = params[0], params[1]
    z = u * w_in[0] + v * w_in[1] + b_in
    tx = w_in[0] * (1.0 / lx) if dx else None
    tt = w_in[1] * (1.0 / lt) if dt else None
    for k in range(2, len(params), 2):
        a = ad.tanh(z)
        slope = 1.0 - a * a
        w, b = params[k], params[k + 1]
        z = a @ w + b
        if dx:
            tx = (slope * tx) @ w
        if dt:
            tt = (slope * tt) @ w
    sig = ad.sigmoid(z)
    rho = ad.reshape(sig * net.rho_m, (m,))
    if dx or dt:
        gain = sig * (1.0 - sig) * net.rho_m
    rho_x = ad.reshape(gain * tx, (m,)) if dx else None
    rho_t = ad.reshape(gain * tt, (m,)) if dt else None
    return rho, rho_x, rho_t


def _mlp_forward(net, params, x, t, scales):
    """Values and input tangents; ``scales`` holds d(normalized input)/d(input) per tangent."""
    m = len(t)
    u = ((x - net.x_range[0]) / (net.x_range[1] - net.x_range[0])).reshape(m, 1)
    v = ((t - net.t_range[0]) / (net.t_range[1] - net.t_range[0])).reshape(m, 1)
    w_in, b_in = params[0], params[1]
    z = u * w_in[0] + v * w_in[1] + b_in
    tans = [c * w_in[d] for d, c in scales]
    layers = []
    for k in range(2, len(params), 2):
        a = np.tanh(z)
        s = 1.0 - a * a
        pre = [s * tn for tn in tans]
        w = params[k]
        z = a @ w + params[k + 1]
        layers.append((a, s, tans, pre))
        tans = [p @ w for p in pre]
    sig = ad.sigmoid(z)[:, 0]
    gain = net.rho_m * sig * (1.0 - sig)
    outs = [net.rho_m * sig] + [gain * tn[:, 0] for tn in tans]
    cache = (u, v, sig, gain, tans, layers)
    return outs, cache


def _mlp_backward(net, params, scales, cache, g_outs):
    """Reverse sweep through :func:`_mlp_forward`; returns (param grads, d/du)."""
    u, v, sig, gain, tans, layers = cache
    g_rho, g_tan = g_outs[0], g_outs[1:]
    d_sig = g_rho * net.rho_m
    for g, tn in zip(g_tan, tans):
        d_sig = d_sig + g * net.rho_m * (1.0 - 2.0 * sig) * tn[:, 0]
    g_z = (d_sig * sig * (1.0 - sig))[:, None]
    g_t = [(g * gain)[:, None] for g in g_tan]
    grads = [None] * len(params)
    for idx in range(len(layers) - 1, -1, -1):
        k = 2 * idx + 2
        a, s, tans_prev, pre = layers[idx]
        w = params[k]
        g_w = a.T @ g_z
        for p, gt in zip(pre, g_t):
            g_w = g_w + p.T @ gt
        grads[k] = g_w
        grads[k + 1] = g_z.sum(axis=0)
        g_a = g_z @ w.T
        g_pre = [gt @ w.T for gt in g_t]
        g_s = 0.0
        for gp, tn in zip(g_pre, tans_prev):
            g_s = g_s + gp * tn
        g_t = [gp * s for gp in g_pre]
        g_z = (g_a - 2.0 * a * g_s) * s
    w_in = params[0]
    g_w_in = np.empty_like(w_in)
    g_w_in[0] = u[:, 0] @ g_z
    g_w_in[1] = v[:, 0] @ g_z
    for (d, c), gt in zip(scales, g_t):
        g_w_in[d] += c * gt.sum(axis=0)
    grads[0] = g_w_in
    grads[1] = g_z.sum(axis=0)
    g_u = g_z @ w_in[0]
    return grads, g_u


def propagate(net: FieldNet, params, x, t, dx=True, dt=False):
    """Run the MLP on flat inputs of shape (M,), carrying input tangents.

    ``params`` and ``x`` may be :class:`autodiff.Var` (``t`` is a plain
    array); the result is then one fused graph node whose backward pass is
    hand-derived. Returns (rho, rho_x or None, rho_t or None), each (M,).
    """
    lx = net.x_range[1] - net.x_range[0]
    lt = net.t_range[1] - net.t_range[0]
    scales = ([(0, 1.0 / lx)] if dx else []) + ([(1, 1.0 / lt)] if dt else [])
    traced = ad.is_var(x) or any(ad.is_var(p) for p in params)
    raw = [ad.value(p) for p in params]
    outs, cache = _mlp_forward(net, raw, np.asarray(ad.value(x), float), np.asarray(t, float), scales)
    if traced:
        parents = tuple(params) + (x,) if ad.is_var(x) else tuple(params)
        parents = tuple(p if ad.is_var(p) else ad.Var(p, requires_grad=False) for p in parents)
        packed = np.stack(outs, axis=1)

        def back(g):
            grads, g_u = _mlp_backward(net, raw, scales, cache, [g[:, c] for c in range(g.shape[1])])
            if ad.is_var(x):
                grads.append(g_u / lx)
            return grads

        node = ad.Var(packed, parents, back)
        outs = [ad.column(node, c) for c in range(len(outs))]
    it = iter(outs)
    rho = next(it)
    rho_x = next(it) if dx else None
    rho_t = next(it) if dt else None
    return rho, rho_x, rho_t


class NetSampler(DensitySampler):
    """Adapts a FieldNet (with concrete or traced parameters) to the sampler protocol."""

    def __init__(self, net: FieldNet, params):
        self.net = net
        self.params = params
        self.x_range = net.x_range

    def sample(self, x, t, dx=True, dt=False):
        xv = ad.value(x)
        shape = np.broadcast_shapes(np.shape(xv), np.shape(t))
        if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(t))):
            raise InvalidInputError("network inputs must be finite")
        m = int(np.prod(shape))
        if ad.is_var(x):
            xf = (x if x.shape == shape else x + np.zeros(shape)).reshape(m)
        else:
            xf = np.broadcast_to(np.asarray(x, float), shape).reshape(m)
        tf = np.broadcast_to(np.asarray(t, float), shape).reshape(m)
        out = propagate(self.net, self.params, xf, tf, dx=dx, dt=dt)
        if shape == ():
            out = [None if o is None else (o.reshape(()) if ad.is_var(o) else float(o[0]))
                   for o in out]
        else:
            out = [None if o is None else ad.reshape(o, shape) for o in out]
        return Sample(*out)


def cost_gradient(net: FieldNet, cost):
    """Value and parameter gradient of ``cost(sampler)``.

    ``cost`` receives a sampler backed by traced parameters and returns a
    scalar (Var, or a plain number when it does not depend on the network).
    The gradient is a list of arrays shaped like ``net.params``.
    """
    traced = [ad.Var(p) for p in net.params]
    j = cost(NetSampler(net, traced))
    if not ad.is_var(j):
        return float(j), [np.zeros_like(p) for p in net.params]
    if not np.isfinite(j.data):
        raise NonFiniteError("cost is not finite")
    j.backward()
    grads = [np.zeros_like(p) if v.grad is None else v.grad for p, v in zip(net.params, traced)]
    for k, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"gradient of parameter block {k} is not finite")
    return float(j.data), grads

