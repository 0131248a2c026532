"""
Local versus nonlocal physics-informed estimation
=================================================

Ground truth comes from the nonlocal solver on a small grid. A field network
is fitted to sparse samples under local and under nonlocal LWR physics, with
the same seed, and both estimates are scored against the full truth.
About a minute on one core.
"""
from pathlib import Path

from nonlocal_tse.core import FDParams, Grid
from nonlocal_tse.data import SamplingPlan, relative_l2_error, sample_points
from nonlocal_tse.kernels import CONSTANT, FIXED, KernelSpec
from nonlocal_tse.plotting import cost_curves, heatmap
from nonlocal_tse.solver import SolverConfig, make_benchmark
from nonlocal_tse.trainer import TrainConfig, default_net, estimate_field, train

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
fd = FDParams(54.3, 0.11)
grid = Grid.from_cells(0.0, 40.0, 60, 0.0, 10.0, 30)
kernel = KernelSpec(CONSTANT, FIXED, 60.0, truncate=True)
truth = make_benchmark("gaussian-jam", SolverConfig(grid, fd, kernel, refine=4, quad_points=9))[1]
obs, coll = sample_points(truth, SamplingPlan(n_obs=300, n_coll=1500, seed=0))

for kind in ("local", "nonlocal-two-var"):
    cfg = TrainConfig(mu=0.1, max_epochs=2000, learning_rate=5e-3, residual_kind=kind,
                      kernel=kernel, quad_points=5, layer_sizes=(2, 20, 20, 20, 1), seed=0)
    report = train(default_net(grid, fd, cfg), obs, coll, fd, cfg)
    est = estimate_field(report.net, grid)
    print(f"{kind:17s} epochs {len(report)}  J_DL {report.J_DL[-1]:.3e}  J_PHY {report.J_PHY[-1]:.3e}  "
          f"relative L2 {relative_l2_error(est, truth):.2f}%")
    heatmap(est.values, grid, out / f"estimate_{kind}.png", kind, vmin=0.0, vmax=fd.rho_m)
    cost_curves(report, out / f"cost_{kind}.png")
heatmap(truth.values, grid, out / "truth.png", "truth", vmin=0.0, vmax=fd.rho_m)
