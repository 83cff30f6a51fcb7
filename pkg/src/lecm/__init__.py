"""Localizable entanglement in spin chains: ground states, LECM and BSM optimization."""

from .entanglement import (
    LecmResult,
    LocalizationResult,
    MeasurementBasis,
    Partition,
    lecm,
    localize,
    reduced_density_matrix,
    schmidt_decompose,
    two_site_lecm_spin_half,
    von_neumann_entropy,
)
from .lattice import ModelParams, StateVector, enumerate_sector, ground_state
from .stationarity import (
    ETStep,
    OptimizerConfig,
    elementary_transform,
    optimality_residual,
    optimize_bsm,
    random_bsm_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "ETStep", "LecmResult", "LocalizationResult", "MeasurementBasis", "ModelParams",
    "OptimizerConfig", "Partition", "StateVector", "elementary_transform", "enumerate_sector",
    "ground_state", "lecm", "localize", "optimality_residual", "optimize_bsm",
    "random_bsm_oracle", "reduced_density_matrix", "schmidt_decompose",
    "two_site_lecm_spin_half", "von_neumann_entropy",
]
