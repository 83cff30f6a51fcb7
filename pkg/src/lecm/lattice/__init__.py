"""Spin-1/2 j1-j2 chains in fixed-magnetization sectors."""

from .basis import BasisSector, enumerate_sector, popcount, site_bits
from .eigensolver import (
    GroundStateResult,
    decoupled_ground_state,
    dense_ground_state,
    ground_state,
    lanczos,
)
from .hamiltonian import SectorHamiltonian, apply_hamiltonian, dense_matrix
from .model import Boundary, ChainLayout, ModelParams, symmetric_pair
from .observables import reflect, total_spin_squared
from .state import StateVector

__all__ = [
    "BasisSector", "Boundary", "ChainLayout", "GroundStateResult", "ModelParams",
    "SectorHamiltonian", "StateVector", "apply_hamiltonian", "decoupled_ground_state",
    "dense_ground_state", "dense_matrix", "enumerate_sector", "ground_state", "lanczos",
    "popcount", "reflect", "site_bits", "symmetric_pair", "total_spin_squared",
]
