"""Spectral Landau-Coulomb solver with entropy, moment and weighted-norm diagnostics."""

__version__ = "0.1.0"

from .collision import (
    CoulombSymbols,
    TruncatedKernelBank,
    build_symbols,
    conv_a,
    conv_b,
    q_conservative,
    q_nonconservative,
    weak_form_oracle,
)
from .diagnostics import (
    ExpMomentSpec,
    GevreySpec,
    TrajectoryRecord,
    bimodal,
    dissipation,
    entropy_to_equilibrium,
    exp_moment_norm,
    fisher,
    gevrey_norm,
    maxwellian,
    moments,
    relative_entropy,
)
from .dyadic import NormSpec, ProjectorBank, build_partition, norm_hmsl_direct, norm_hmsl_dyadic
from .estimators import DyadicProfile, LandauFlow, PowerLawRateRegressor, WeightedSobolevNorm
from .grid import ScalarField, VelocityGrid, load_field, save_field
from .integrator import Model, SchemeConfig, run

__all__ = [
    "__version__",
    "VelocityGrid",
    "ScalarField",
    "load_field",
    "save_field",
    "CoulombSymbols",
    "TruncatedKernelBank",
    "build_symbols",
    "conv_a",
    "conv_b",
    "q_conservative",
    "q_nonconservative",
    "weak_form_oracle",
    "NormSpec",
    "ProjectorBank",
    "build_partition",
    "norm_hmsl_direct",
    "norm_hmsl_dyadic",
    "moments",
    "maxwellian",
    "bimodal",
    "relative_entropy",
    "entropy_to_equilibrium",
    "dissipation",
    "fisher",
    "ExpMomentSpec",
    "exp_moment_norm",
    "GevreySpec",
    "gevrey_norm",
    "TrajectoryRecord",
    "Model",
    "SchemeConfig",
    "run",
    "LandauFlow",
    "WeightedSobolevNorm",
    "DyadicProfile",
    "PowerLawRateRegressor",
]
