"""Planar inextensible active filaments in viscoelastic fluids.

Resistive-force-theory simulation of a curvature-driven filament with a
linear viscoelastic memory field, plus the spectral small-amplitude
swimming-speed theory on the clamped-free beam eigenbasis, diagnostics,
and a batch runner for sweeps and validation.
"""

from .beambasis import EigenBasis, EigenPair, build_basis
from .diagnostics import (
    Observable,
    TensionProfile,
    center_of_mass,
    decay_rate_fit,
    delta_scaling_study,
    displacement,
    energy,
    kappa_bar_midpoints,
    mode_amplitude_series,
    periodicity_residual,
    solve_tension,
    speed_formula,
    standard_observables,
    velocity_reconstruction_check,
    write_observables_csv,
)
from .forcing import (
    ForcingSpec,
    ModalProfile,
    PolynomialProfile,
    TabulatedProfile,
    WaveProfile,
)
from .runner import PRESETS, ConfigError, RunConfig, config_from_manifest, parse_config, run
from .simcore import (
    FilamentState,
    SimParams,
    Trajectory,
    com_velocity,
    eigenmode_state,
    integrate,
    read_trajectory_csv,
    straight_state,
    write_positions_csv,
    write_trajectory_csv,
)
from .theory import (
    FluidParams,
    OptimalForcing,
    SpeedTable,
    avg_speed_newtonian,
    avg_speed_ve,
    build_speed_table,
    lin_periodic_solution,
    matrix_eigenvalues,
    optimize_forcing,
)

__version__ = "0.1.0"

__all__ = [
    "EigenBasis", "EigenPair", "build_basis",
    "ForcingSpec", "PolynomialProfile", "WaveProfile", "ModalProfile",
    "TabulatedProfile",
    "FluidParams", "SpeedTable", "OptimalForcing", "build_speed_table",
    "lin_periodic_solution", "avg_speed_ve", "avg_speed_newtonian",
    "matrix_eigenvalues", "optimize_forcing",
    "SimParams", "FilamentState", "Trajectory", "straight_state",
    "eigenmode_state", "integrate", "com_velocity",
    "write_trajectory_csv", "read_trajectory_csv", "write_positions_csv",
    "Observable", "TensionProfile", "center_of_mass", "displacement",
    "speed_formula", "energy", "kappa_bar_midpoints", "solve_tension",
    "velocity_reconstruction_check", "periodicity_residual",
    "delta_scaling_study", "decay_rate_fit", "mode_amplitude_series",
    "standard_observables", "write_observables_csv",
    "RunConfig", "ConfigError", "PRESETS", "parse_config",
    "config_from_manifest", "run",
    "__version__",
]
