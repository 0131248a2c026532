"""
From trajectories to density and speed fields
=============================================

Vehicles are placed according to a solved density field and then driven by
its Greenshields speed. Binning their trajectories with Edie's definitions
should give back the solver's density, and a straight-line fit of speed
against density should give back v_f and rho_m.
"""
import numpy as np

from nonlocal_tse.core import FDParams, Grid, greenshields_speed
from nonlocal_tse.data import TrajectoryTable, bin_trajectories, estimate_fd_params
from nonlocal_tse.solver import SolverConfig, make_benchmark

fd = FDParams(54.3, 0.11)
grid = Grid.from_cells(0.0, 20.0, 120, 0.0, 5.0, 60)
fine = Grid.from_cells(0.0, 20.0, 120, 0.0, 0.25, 1200)   # the field the vehicles drive through
field = make_benchmark("gaussian-jam", SolverConfig(fine, fd, refine=2))[1].values
xc = fine.x_centers()

# initial vehicles at the quantiles of the cumulative count, then arrivals at the inflow rate
cum = np.concatenate([[0.0], np.cumsum(field[:, 0]) * fine.dx])
positions = list(np.interp(np.arange(0.5, cum[-1]), cum, np.concatenate([[0.0], xc + fine.dx / 2])))
rho_in = field[0, 0]
q_in = rho_in * greenshields_speed(rho_in, fd)
arrivals = np.arange(0.5 / q_in, fine.t1, 1.0 / q_in)

ids, times, pos, spd = [], [], [], []
alive = {k: x for k, x in enumerate(positions)}
next_id, a = len(positions), 0
for j in range(fine.nt):
    t = fine.t0 + j * fine.dt
    while a < len(arrivals) and arrivals[a] <= t:
        alive[next_id] = 0.0
        next_id, a = next_id + 1, a + 1
    for k, x in list(alive.items()):
        v = float(greenshields_speed(np.interp(x, xc, field[:, j]), fd))
        ids.append(f"car{k}"), times.append(t), pos.append(x), spd.append(v)
        if x > fine.x1:
            del alive[k]
        else:
            alive[k] = x + v * fine.dt
traj = TrajectoryTable(np.array(ids), np.array(times), np.array(pos), np.array(spd))

binned = bin_trajectories(traj, grid)
coarse_truth = field.reshape(grid.nx, grid.nt, 20).mean(axis=2)
rho = binned.density.values
print(f"{len(traj)} samples from {next_id} vehicles")
print(f"binned density {rho.min():.4f}..{rho.max():.4f} veh/ft, solver {coarse_truth.min():.4f}..{coarse_truth.max():.4f}")
inner = (slice(5, -5), slice(2, -2))   # skip the partially filled edge cells
print(f"mean |binned - solver| away from the edges: {np.abs(rho - coarse_truth)[inner].mean():.4f} veh/ft")
print(f"spilled outside the grid: {binned.spill.vehicle_seconds:.1f} vehicle-seconds")
fit = estimate_fd_params(binned.density, binned.speed)
print(f"fitted v_f = {fit.v_f:.2f} ft/s (true {fd.v_f}), rho_m = {fit.rho_m:.4f} veh/ft (true {fd.rho_m})")
