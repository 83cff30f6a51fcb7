"""Symmetry checks on sector states."""

from __future__ import annotations

import numpy as np

from .hamiltonian import SectorHamiltonian
from .state import StateVector


def total_spin_squared(state: StateVector) -> float:
    """``<S_tot^2>`` using ``S^2 = 3n/4 + 2 sum_{a<b} S_a.S_b``."""
    if state.sector is None:
        raise ValueError("needs a sector state")
    n = state.n_sites
    bonds = [(a, b, 0) for a in range(n) for b in range(a + 1, n)]
    op = SectorHamiltonian(state.sector, bonds, [2.0])
    v = state.amplitudes
    return float(np.real(np.vdot(v, op.matvec(v)))) + 0.75 * n


def reflect(state: StateVector) -> StateVector:
    """Image of the state under the chain reflection ``i -> n - 1 - i``."""
    n = state.n_sites
    states = state.basis_states()
    mirrored = np.zeros_like(states)
    for b in range(n):
        mirrored |= ((states >> b) & 1) << (n - 1 - b)
    if state.sector is None:
        out = np.empty_like(state.amplitudes)
        out[mirrored] = state.amplitudes
        return StateVector(out, n)
    out = np.empty_like(state.amplitudes)
    out[state.sector.index_of(mirrored)] = state.amplitudes
    return StateVector(out, n, state.sector)
