"""Normal-ordered Gaussian operator calculus and self-calibrating field inference."""

from .config import ConfigError, ModelConfig, NewtonSettings, load_config
from .field import Field, FourierCovariance, Grid1D, GridMismatchError, PowerSpectrum, inner
from .kernels import BACKEND
from .operators import GaussianParams, IndexSet, OperatorExpr, expectation, normal_order
from .selfcal import (
    GibbsState,
    InferenceResult,
    NotPositiveDefiniteError,
    gibbs_energy,
    make_mock_data,
    minimize_gibbs,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "Field",
    "FourierCovariance",
    "GaussianParams",
    "GibbsState",
    "Grid1D",
    "GridMismatchError",
    "IndexSet",
    "InferenceResult",
    "ModelConfig",
    "NewtonSettings",
    "NotPositiveDefiniteError",
    "OperatorExpr",
    "PowerSpectrum",
    "expectation",
    "gibbs_energy",
    "inner",
    "load_config",
    "make_mock_data",
    "minimize_gibbs",
    "normal_order",
]
