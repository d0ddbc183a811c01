"""Adaptive Langevin (stochastic-gradient Nose-Hoover) thermostats and splitting integrators."""

from .core import (
    ConfigurationError,
    ForceModel,
    ForceSample,
    PhaseState,
    RngStream,
    SingularityError,
    ThermostatParams,
    draw_standard_normals,
    force,
)
from .integrators import (
    SplittingScheme,
    compile_scheme,
    initial_xi,
    make_stepper,
    step_A,
    step_adaptive_brownian,
    step_B,
    step_D,
    step_msgld,
    step_O,
    step_sgld,
    step_sgnht_n,
    step_sgnht_s,
    step_splitting,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ForceModel",
    "ForceSample",
    "PhaseState",
    "RngStream",
    "SingularityError",
    "SplittingScheme",
    "ThermostatParams",
    "compile_scheme",
    "draw_standard_normals",
    "force",
    "initial_xi",
    "make_stepper",
    "step_A",
    "step_B",
    "step_D",
    "step_O",
    "step_adaptive_brownian",
    "step_msgld",
    "step_sgld",
    "step_sgnht_n",
    "step_sgnht_s",
    "step_splitting",
]
