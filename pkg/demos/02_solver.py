"""
Finite-volume reference solutions
=================================

Lax-Friedrichs solves of the local and nonlocal LWR equations for the three
built-in scenarios, written as CSV plus heat maps in demos/out/.
"""
from pathlib import Path

import numpy as np

from nonlocal_tse.core import FDParams, Grid
from nonlocal_tse.kernels import CONSTANT, FIXED, KernelSpec
from nonlocal_tse.plotting import heatmap
from nonlocal_tse.solver import BENCHMARKS, SolverConfig, make_benchmark

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
fd = FDParams(54.3, 0.11)
grid = Grid.from_cells(0.0, 20.0, 120, 0.0, 5.0, 60)   # 2400 ft x 300 s

for name in BENCHMARKS:
    local = make_benchmark(name, SolverConfig(grid, fd, refine=2))[1]
    nonlocal_ = make_benchmark(name, SolverConfig(grid, fd, KernelSpec(CONSTANT, FIXED, 60.0),
                                                  refine=2, quad_points=9))[1]
    gap = np.abs(local.values - nonlocal_.values)
    print(f"{name:13s} mass(t=end) local {local.values[:, -1].sum() * grid.dx:8.2f}  "
          f"nonlocal {nonlocal_.values[:, -1].sum() * grid.dx:8.2f}  max |gap| {gap.max():.4f} veh/ft")
    nonlocal_.to_csv(out / f"{name}.csv")
    heatmap(nonlocal_.values, grid, out / f"{name}.png", f"{name}, constant 60-ft kernel",
            vmin=0.0, vmax=fd.rho_m)
    heatmap(gap, grid, out / f"{name}_gap.png", "|local - nonlocal|", cmap="viridis")
print("figures in", out)
