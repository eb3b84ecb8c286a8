"""Generalized Polya urns: spectral limit theory and Monte-Carlo verification."""

__version__ = "0.1.0"

from .classes import ClassDecomposition, decompose
from .dynamics import ReplicaBatch, Trajectory, UrnState, simulate, step
from .errors import UrnError
from .limitcov import LimitLaw, a_v, limit_law, sigma_v
from .martingale import (
    GammaSchedule,
    LimitEstimates,
    estimate_v,
    estimate_xi,
    expected_composition,
    gamma_constant,
    gamma_product,
    gamma_schedule,
    projection_series,
)
from .model import UrnModel, build_model, load_model, save_model, validate, zoo
from .rng import CounterRNG
from .spectral import DualBasis, Regime, Spectrum, analyze, dual_bases, eigendecompose, project, split_big_small
from .verify import VerdictReport, ZVector, enumerate_law, proportion_test, threshold_scan, verify_clt, z_vector

__all__ = [
    "ClassDecomposition", "CounterRNG", "DualBasis", "GammaSchedule", "LimitEstimates",
    "LimitLaw", "Regime", "ReplicaBatch", "Spectrum", "Trajectory", "UrnError",
    "UrnModel", "UrnState", "VerdictReport", "ZVector", "a_v", "analyze",
    "build_model", "decompose", "dual_bases", "eigendecompose", "enumerate_law",
    "estimate_v", "estimate_xi", "expected_composition", "gamma_constant",
    "gamma_product", "gamma_schedule", "limit_law", "load_model", "project",
    "projection_series", "proportion_test", "save_model", "sigma_v", "simulate",
    "split_big_small", "step", "threshold_scan", "validate", "verify_clt",
    "z_vector", "zoo",
]
