"""Calmed stochastic Navier-Stokes on the periodic 3-torus.

A pseudo-spectral Galerkin implementation of the calmed velocity equation
driven by additive Ornstein-Uhlenbeck noise, together with the random
dynamical system layer (cocycle, pullback, absorbing radius, tail flattening,
attractor Cauchy test) and runtime monitors for the energy estimates.
"""
__version__ = "0.1.0"

from .calming import CalmingSpec, Variant, verify_calming_axioms
from .exceptions import (
    BlowUpError,
    CalmedNSError,
    CheckpointError,
    ConfigError,
    GridMismatchError,
    InsufficientHorizonError,
    TheoryRangeError,
)
from .integrator import StepperConfig, TrajectoryRecord, integrate, step
from .model import ForcingSpec, ModelParams, preset_field, validate_assumptions
from .noise import OUPath, WienerPath, ou_path, sample_wiener
from .spectral import SpectralField, WaveGrid

__all__ = [
    "__version__",
    "BlowUpError",
    "CalmedNSError",
    "CalmingSpec",
    "CheckpointError",
    "ConfigError",
    "ForcingSpec",
    "GridMismatchError",
    "InsufficientHorizonError",
    "ModelParams",
    "OUPath",
    "SpectralField",
    "StepperConfig",
    "TheoryRangeError",
    "TrajectoryRecord",
    "Variant",
    "WaveGrid",
    "WienerPath",
    "integrate",
    "ou_path",
    "preset_field",
    "sample_wiener",
    "step",
    "validate_assumptions",
    "verify_calming_axioms",
]
