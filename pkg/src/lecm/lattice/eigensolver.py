"""Lowest eigenpair of the sector Hamiltonian.

:func:`ground_state` runs a thick-restart Lanczos iteration with full
reorthogonalization against the active window (Gram-Schmidt applied twice).
Below ``FULL_WINDOW_DIM`` the window is large enough that restarts practically
never happen; above it the window is capped so the stored basis fits in
memory, and restarts keep the lowest Ritz vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, DimensionError
from .basis import BasisSector, enumerate_sector
from .hamiltonian import SectorHamiltonian, dense_matrix
from .model import ChainLayout, ModelParams
from .state import StateVector

log = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 2000
FULL_WINDOW_DIM = 100_000


@dataclass(frozen=True)
class GroundStateResult:
    energy: float
    vector: StateVector
    iterations: int
    residual_norm: float


def residual_bound(energy: float) -> float:
    return 1e-10 * max(1.0, abs(energy))


def _orthogonalize(basis: np.ndarray, count: int, w: np.ndarray) -> np.ndarray:
    """Project ``w`` off the first ``count`` rows of ``basis`` twice; return the coefficients."""
    if count == 0:
        return np.zeros(0)
    active = basis[:count]
    h = active.conj() @ w
    w -= h @ active
    h2 = active.conj() @ w
    w -= h2 @ active
    return h + h2


def lanczos(matvec, dim: int, *, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, window: int | None = None,
            start: np.ndarray | None = None, dtype=np.float64):
    """Thick-restart Lanczos for the lowest eigenpair of a Hermitian ``matvec``.

    Returns ``(energy, vector, matvecs, residual_norm)``; raises
    :class:`ConvergenceError` carrying the best estimate after ``max_iter``
    matrix-vector products.
    """
    if window is None:
        window = 400 if dim <= FULL_WINDOW_DIM else 40
    window = max(2, min(window, dim))
    keep = max(1, window // 4)
    rng = np.random.default_rng(seed)
    if start is None:
        v = rng.standard_normal(dim)
        if np.issubdtype(dtype, np.complexfloating):
            v = v + 1j * rng.standard_normal(dim)
    else:
        v = np.array(start, dtype=dtype)
    v = v.astype(dtype, copy=False)
    v /= np.linalg.norm(v)
    if dim == 1:
        hv = matvec(v)
        return float(np.real(hv[0] / v[0])), v, 1, 0.0

    basis = np.empty((window, dim), dtype=dtype)
    basis[0] = v
    proj = np.zeros((window, window), dtype=dtype)
    count = 1
    matvecs = 0
    prev = np.inf

    while True:
        j = count - 1
        w = matvec(basis[j])
        matvecs += 1
        h = _orthogonalize(basis, count, w)
        # Rayleigh-Ritz column by explicit projection; exact for kept Ritz vectors too.
        proj[:count, j] = h
        proj[j, :count] = h.conj()
        proj[j, j] = h[j].real
        beta = float(np.linalg.norm(w))
        theta, s = np.linalg.eigh(proj[:count, :count])
        energy = float(theta[0])
        est = abs(beta * s[-1, 0])
        converged = abs(energy - prev) < tol and est <= 0.1 * residual_bound(energy)
        closed = beta <= 1e-13 * max(1.0, abs(energy))
        prev = energy
        if converged or closed or matvecs >= max_iter:
            x = s[:, 0] @ basis[:count]
            x /= np.linalg.norm(x)
            res = float(np.linalg.norm(matvec(x) - energy * x))
            best = (energy, x, matvecs, res)
            if res <= residual_bound(energy):
                return best
            if matvecs >= max_iter:
                raise ConvergenceError(
                    f"Lanczos not converged after {matvecs} matvecs (residual {res:.3e})", best)
            # lost accuracy: restart cleanly from the Ritz vector
            basis[0] = x
            proj[:] = 0
            count, prev = 1, np.inf
            continue
        if count < window:
            basis[count] = w / beta
            count += 1
            continue
        k = min(keep, count - 1)
        basis[:k] = s[:, :k].T @ basis[:count]
        basis[k] = w / beta
        proj[:] = 0
        proj[np.arange(k), np.arange(k)] = theta[:k]
        count = k + 1
        log.debug("thick restart after %d matvecs, energy %.14f", matvecs, energy)


def _check_sector(params: ModelParams, sector: BasisSector):
    if params.n_sites != sector.n_sites:
        raise DimensionError("sector and model disagree on the number of sites")
    if sector.dim == 0:
        raise DimensionError("empty sector")


def ground_state(params: ModelParams, sector: BasisSector, seed: int = DEFAULT_SEED,
                 tol: float = DEFAULT_TOL, *, max_iter: int = DEFAULT_MAX_ITER,
                 operator: SectorHamiltonian | None = None,
                 window: int | None = None) -> GroundStateResult:
    """Lowest eigenpair of the j1-j2 chain in ``sector`` by Lanczos iteration."""
    _check_sector(params, sector)
    if operator is None:
        operator = SectorHamiltonian.for_model(params, sector)
    energy, x, its, res = lanczos(operator.matvec, sector.dim, seed=seed, tol=tol,
                                  max_iter=max_iter, window=window)
    vec = StateVector(x / np.linalg.norm(x), params.n_sites, sector)
    return GroundStateResult(energy, vec, its, res)


def dense_ground_state(params: ModelParams, sector: BasisSector) -> GroundStateResult:
    """Lowest eigenpair by full dense diagonalization (test oracle)."""
    _check_sector(params, sector)
    h = dense_matrix(params, sector)
    w, v = np.linalg.eigh(h)
    x = v[:, 0]
    res = float(np.linalg.norm(h @ x - w[0] * x))
    return GroundStateResult(float(w[0]), StateVector(x / np.linalg.norm(x), params.n_sites, sector), 1, res)


def decoupled_ground_state(params: ModelParams, sector: BasisSector, seed: int = DEFAULT_SEED,
                           tol: float = DEFAULT_TOL) -> GroundStateResult:
    """Ground state of the two-decoupled layout as a product of chain ground states.

    Each half has a unique singlet ground state when its length is even, so the
    product is the unique ground state of the full layout in the ``S^z = 0``
    sector. The result is checked against the full operator.
    """
    _check_sector(params, sector)
    half = params.n_sites // 2
    if params.chain_layout is not ChainLayout.TWO_DECOUPLED or half % 2 or sector.two_sz != 0:
        raise DimensionError("product construction needs two even chains in the Sz = 0 sector")
    chain = ModelParams(half, params.j1, params.j2, params.boundary)
    sub = enumerate_sector(half, 0)
    gs = ground_state(chain, sub, seed=seed, tol=tol)
    full = np.zeros(1 << half)
    full[sub.states] = gs.vector.amplitudes
    low = sector.states & ((1 << half) - 1)
    x = full[low] * full[sector.states >> half]
    x /= np.linalg.norm(x)
    energy = 2.0 * gs.energy
    res = float(np.linalg.norm(SectorHamiltonian.for_model(params, sector).matvec(x) - energy * x))
    if res > residual_bound(energy):
        raise ConvergenceError(f"product state residual {res:.3e} too large", (energy, x, gs.iterations, res))
    return GroundStateResult(energy, StateVector(x, params.n_sites, sector), gs.iterations, res)
