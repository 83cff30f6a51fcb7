"""Small analytic and random states used as demos and test inputs."""

from __future__ import annotations

import numpy as np

from .lattice.state import StateVector


def _from_bits(n_sites: int, terms: dict[int, complex]) -> StateVector:
    amps = np.zeros(1 << n_sites)
    for pattern, a in terms.items():
        amps[pattern] = a
    return StateVector.normalized(amps, n_sites)


def ghz(n_sites: int = 3) -> StateVector:
    """``(|0...0> + |1...1>)/sqrt(2)``."""
    return _from_bits(n_sites, {0: 1.0, (1 << n_sites) - 1: 1.0})


def w_state(n_sites: int = 3) -> StateVector:
    """Equal superposition of the single-excitation patterns."""
    return _from_bits(n_sites, {1 << b: 1.0 for b in range(n_sites)})


def singlet() -> StateVector:
    """``(|01> - |10>)/sqrt(2)`` on two sites (bit string read site 0 first)."""
    return _from_bits(2, {0b10: 1.0, 0b01: -1.0})


def product(*factors: np.ndarray) -> StateVector:
    """Tensor product of normalized single-block amplitude vectors.

    ``factors[0]`` occupies the lowest sites; each factor's index uses its own
    sites' bits with the lowest site least significant.
    """
    amps = np.array([1.0])
    n = 0
    for f in factors:
        f = np.asarray(f)
        k = int(np.log2(f.shape[0]))
        amps = np.kron(f, amps)
        n += k
    return StateVector.normalized(amps, n)


def random_state(n_sites: int, rng: np.random.Generator, *, real: bool = True) -> StateVector:
    amps = rng.standard_normal(1 << n_sites)
    if not real:
        amps = amps + 1j * rng.standard_normal(1 << n_sites)
    return StateVector.normalized(amps, n_sites)
