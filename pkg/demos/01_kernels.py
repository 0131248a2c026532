"""
Look-ahead kernels and the nonlocal density
===========================================

A driver reacts to the density ahead. The kernels below average the density
over a window of length w downstream of x; the variable window shrinks as
the local density approaches jam density.
"""
import numpy as np

from nonlocal_tse.core import FDParams
from nonlocal_tse.kernels import (CONSTANT, FIXED, LINEAR, VARIABLE, FunctionSampler, KernelSpec,
                                  kernel_mass, kernel_weight, modulated_mass, nonlocal_density,
                                  nonlocal_density_dx, window_length)

fd = FDParams(v_f=54.3, rho_m=0.11)

# kernel weights on [0, w] and their numeric mass
for fam in (CONSTANT, LINEAR):
    spec = KernelSpec(fam, FIXED, 60.0)
    y = np.linspace(0.0, 60.0, 5)
    print(f"{fam:8s} weights {np.round(kernel_weight(spec, y), 5)}  mass {kernel_mass(spec):.15f}")

# variable window: w(rho) = w0 (1 - rho/rho_m)
var = KernelSpec(LINEAR, VARIABLE, 100.0)
for rho in (0.0, 0.0275, 0.055, 0.0825, 0.11):
    w = float(window_length(var, rho, fd))
    print(f"rho = {rho:.4f}  window = {w:6.2f} ft  mass = {modulated_mass(var, w):.15f}")

# a smooth bump of congestion at x = 1500 ft
f = lambda x, t: 0.03 + 0.05 * np.exp(-((x - 1500.0) / 200.0) ** 2)  # noqa: E731
fx = lambda x, t: -0.05 * 2 * (x - 1500.0) / 200.0 ** 2 * np.exp(-((x - 1500.0) / 200.0) ** 2)  # noqa: E731
field = FunctionSampler(f, fx, x_range=(0.0, 2400.0))
x = np.linspace(1000.0, 2000.0, 6)
print("\nx        rho      rho_n(const 60)  rho_n(linear 60)  d rho_n/dx (variable 100)")
for xi, r, a, b, d in zip(x, f(x, 0),
                          nonlocal_density(field, x, 0.0, KernelSpec(CONSTANT, FIXED, 60.0), fd),
                          nonlocal_density(field, x, 0.0, KernelSpec(LINEAR, FIXED, 60.0), fd),
                          nonlocal_density_dx(field, x, 0.0, var, fd)):
    print(f"{xi:6.0f}  {r:.5f}  {a:.5f}          {b:.5f}           {d: .3e}")
# upstream of the bump rho_n > rho: drivers already see the queue ahead
