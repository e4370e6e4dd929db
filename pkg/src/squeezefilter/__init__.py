"""Posterior evolution of a squeezed coherent cavity mode under continuous
single- and double-heterodyne observation, with a truncated Fock-space oracle."""

from .core import (
    ConfigError,
    GammaParam,
    ModelParams,
    NumericGuardError,
    QuadratureMoments,
    Scheme,
    SingularityError,
    SqueezedCoherentRecord,
    SqueezeFilterError,
    SqueezeParam,
    gamma_from_squeeze,
    kappa,
    moments_from_record,
    squeeze_from_gamma,
)
from .noise import NoiseKind, NoisePath, TimeGrid, generate_path, ito_integrate

__version__ = "0.1.0"
