"""Pseudo-spectral 2-D Boussinesq temperature-patch simulator with
dyadic-analysis diagnostics and inequality probes."""

__version__ = "0.1.0"

from .fields import Grid, ScalarField, VectorField2
from .spectral import (biot_savart, curl, divergence, gradient, grad_perp,
                       heat_multiplier, laplacian, leray_project,
                       recover_pressure, velocity_from_vorticity)
from .lp import (BesovSpec, DyadicFilterBank, TimeNormAccumulator, besov_norm,
                 dyadic_block, filter_bank, para_vector_field, paraproduct,
                 remainder, striated_source)
from .solver import SimState, StepperConfig, run, solve_transport_diffusion, step
from .lagrangian import (LevelSet, PatchState, advect_level_set,
                         advect_markers, boundary_c1eps_norm,
                         evolve_X_eulerian, x_from_jacobian)
from .config import Config, load_config, parse_config, save_config
from .driver import analyze_run, build_scenario, execute_run, render_run, run_probe

__all__ = [
    "Grid", "ScalarField", "VectorField2",
    "biot_savart", "curl", "divergence", "gradient", "grad_perp",
    "heat_multiplier", "laplacian", "leray_project", "recover_pressure",
    "velocity_from_vorticity",
    "BesovSpec", "DyadicFilterBank", "TimeNormAccumulator", "besov_norm",
    "dyadic_block", "filter_bank", "para_vector_field", "paraproduct",
    "remainder", "striated_source",
    "SimState", "StepperConfig", "run", "solve_transport_diffusion", "step",
    "LevelSet", "PatchState", "advect_level_set", "advect_markers",
    "boundary_c1eps_norm", "evolve_X_eulerian", "x_from_jacobian",
    "Config", "load_config", "parse_config", "save_config",
    "analyze_run", "build_scenario", "execute_run", "render_run", "run_probe",
]
