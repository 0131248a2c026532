"""Traffic density estimation with local and nonlocal LWR physics.

The package is split by concern: ``core`` (fundamental diagram, grids,
fields), ``kernels`` (look-ahead kernels and the nonlocal density),
``autodiff`` and ``diffnet`` (the differentiable field), ``physics``
(PDE residuals), ``trainer`` (costs and the Adam loop), ``data``
(trajectories, binning, sampling), ``solver`` (finite-volume reference)
and ``cli``.
"""
from .core import (DensityField, FDParams, Grid, InvalidInputError, SpeedField,
                   greenshields_flow, greenshields_speed, nonlocal_greenshields_speed)
from .data import (SamplingPlan, TrajectoryTable, bin_trajectories, estimate_fd_params,
                   read_trajectories, relative_l2_error, sample_points)
from .diffnet import FieldNet, cost_gradient
from .kernels import (CONSTANT, FIXED, LINEAR, VARIABLE, KernelSpec, Quadrature,
                      ThickBoundaryError, kernel_mass, kernel_weight, modulated_weight,
                      nonlocal_density, nonlocal_density_dx, window_length)
from .physics import (INTEGRO, LOCAL, TWO_VAR, local_residual, nonlocal_residual_integro,
                      nonlocal_residual_two_var, residual)
from .solver import SolverConfig, make_benchmark, riemann_exact, solve
from .trainer import (CollocationSet, ObservationSet, TrainConfig, TrainReport,
                      compute_J_DL, compute_J_PHY, train)

__version__ = "0.1.0"

__all__ = [
    "DensityField",
    "FDParams",
    "Grid",
    "InvalidInputError",
    "SpeedField",
    "greenshields_flow",
    "greenshields_speed",
    "nonlocal_greenshields_speed",
    "SamplingPlan",
    "TrajectoryTable",
    "bin_trajectories",
    "estimate_fd_params",
    "read_trajectories",
    "relative_l2_error",
    "sample_points",
    "FieldNet",
    "cost_gradient",
    "CONSTANT",
    "FIXED",
    "LINEAR",
    "VARIABLE",
    "KernelSpec",
    "Quadrature",
    "ThickBoundaryError",
    "kernel_mass",
    "kernel_weight",
    "modulated_weight",
    "nonlocal_density",
    "nonlocal_density_dx",
    "window_length",
    "INTEGRO",
    "LOCAL",
    "TWO_VAR",
    "local_residual",
    "nonlocal_residual_integro",
    "nonlocal_residual_two_var",
    "residual",
    "SolverConfig",
    "make_benchmark",
    "riemann_exact",
    "solve",
    "CollocationSet",
    "ObservationSet",
    "TrainConfig",
    "TrainReport",
    "compute_J_DL",
    "compute_J_PHY",
    "train",
]
