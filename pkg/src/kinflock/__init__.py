"""Particle and phase-space solvers for kinetic flocking models, with the
conservation, energy and entropy diagnostics used to verify them."""

from .kernels import (
    ConfinementPotential, InteractionKernel, covering_constant, eval_kernel, kernel_bound,
    mt_normalization_bound,
)
from .kinetic import (
    CFLError, MomentFields, PhaseGrid, RegularizationParams, compute_moments, compute_u, compute_u_delta,
    mt_field, nonlocal_field, truncate,
)
from .model import MODELS, ModelConfig
from .particles import ParticleEnsemble

__all__ = [
    "CFLError", "ConfinementPotential", "InteractionKernel", "MODELS", "ModelConfig", "MomentFields",
    "ParticleEnsemble", "PhaseGrid", "RegularizationParams", "compute_moments", "compute_u", "compute_u_delta",
    "covering_constant", "eval_kernel", "kernel_bound", "mt_field", "mt_normalization_bound", "nonlocal_field",
    "truncate",
]
__version__ = "0.1.0"
