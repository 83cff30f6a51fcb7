"""Sector-restricted Heisenberg operators.

``S_a.S_b`` acts on a bit pattern as ``+1/4`` (aligned) or ``-1/4`` (anti-aligned)
on the diagonal, plus an amplitude ``1/2`` on the pattern with both bits
flipped when they are anti-aligned. The off-diagonal structure is built once
per sector into a compact row-grouped index table: for every row the flipped
targets are stored class by class, so a matvec only needs one coupling per
class instead of a value per nonzero.
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError, SizeError
from .basis import BasisSector, _rank_many
from .model import ModelParams
from .state import StateVector

DENSE_LIMIT = 16384

if numba.config.THREADING_LAYER == "default":
    # the bundled TBB layer is too old and only warns; OpenMP is thread-safe here
    numba.config.THREADING_LAYER = "omp"


@numba.njit(cache=True)
def _count_pass(states, bond_a, bond_b, bond_cls, n_cls, n_sites, diag_w, table):
    dim = states.shape[0]
    counts = np.zeros((dim, n_cls), dtype=np.int64)
    diag = np.zeros(dim, dtype=np.float64)
    for t in range(dim):
        s = states[t]
        d = 0.0
        for k in range(bond_a.shape[0]):
            ba = (s >> bond_a[k]) & 1
            bb = (s >> bond_b[k]) & 1
            if ba == bb:
                d += 0.25 * diag_w[bond_cls[k]]
            else:
                d -= 0.25 * diag_w[bond_cls[k]]
                counts[t, bond_cls[k]] += 1
        diag[t] = d
    return counts, diag


@numba.njit(cache=True)
def _fill_pass(states, bond_a, bond_b, bond_cls, n_cls, n_sites, ptr, table, targets):
    dim = states.shape[0]
    for t in range(dim):
        s = states[t]
        for c in range(n_cls):
            pos = ptr[t, c]
            for k in range(bond_a.shape[0]):
                if bond_cls[k] != c:
                    continue
                ba = (s >> bond_a[k]) & 1
                bb = (s >> bond_b[k]) & 1
                if ba != bb:
                    f = s ^ ((1 << bond_a[k]) | (1 << bond_b[k]))
                    r = 0
                    seen = 0
                    for b in range(n_sites):
                        if (f >> b) & 1:
                            seen += 1
                            r += table[b, seen]
                    targets[pos] = r
                    pos += 1


@numba.njit(cache=True, parallel=True)
def _matvec(diag, ptr, targets, coup, x, out):
    n_cls = coup.shape[0]
    for t in numba.prange(diag.shape[0]):
        acc = diag[t] * x[t]
        for c in range(n_cls):
            part = 0.0 * x[t]
            for p in range(ptr[t, c], ptr[t, c + 1]):
                part += x[targets[p]]
            acc += coup[c] * part
        out[t] = acc


class SectorHamiltonian:
    """Matrix-free Heisenberg bond operator restricted to one sector.

    ``bonds`` are ``(a, b, cls)`` triples and ``couplings[cls]`` the exchange
    constant of class ``cls``. Classes with zero coupling are dropped.
    """

    def __init__(self, sector: BasisSector, bonds, couplings):
        couplings = np.asarray(couplings, dtype=np.float64)
        live = [(a, b, c) for a, b, c in bonds if couplings[c] != 0.0]
        classes = sorted({c for _, _, c in live})
        remap = {c: k for k, c in enumerate(classes)}
        self.sector = sector
        self.dim = sector.dim
        n_cls = max(len(classes), 1)
        weights = np.zeros(n_cls)
        for c, k in remap.items():
            weights[k] = couplings[c]
        bond_a = np.array([a for a, _, _ in live], dtype=np.int64)
        bond_b = np.array([b for _, b, _ in live], dtype=np.int64)
        bond_cls = np.array([remap[c] for _, _, c in live], dtype=np.int64)
        counts, self.diag = _count_pass(
            sector.states, bond_a, bond_b, bond_cls, n_cls, sector.n_sites, weights, sector._table
        )
        flat = np.concatenate(([0], np.cumsum(counts.ravel())))
        self.ptr = np.empty((self.dim, n_cls + 1), dtype=np.int64)
        self.ptr[:, :n_cls] = flat[:-1].reshape(self.dim, n_cls)
        self.ptr[:, n_cls] = flat[n_cls :: n_cls] if n_cls else flat[1:]
        index_dtype = np.int32 if self.dim < 2**31 else np.int64
        self.targets = np.empty(int(flat[-1]), dtype=index_dtype)
        _fill_pass(
            sector.states, bond_a, bond_b, bond_cls, n_cls, sector.n_sites,
            self.ptr, sector._table, self.targets,
        )
        self.offdiag = 0.5 * weights
        self.dtype = np.float64

    @classmethod
    def for_model(cls, params: ModelParams, sector: BasisSector) -> "SectorHamiltonian":
        if params.n_sites != sector.n_sites:
            raise DimensionError("sector and model disagree on the number of sites")
        return cls(sector, params.bonds(), params.couplings())

    @property
    def nnz(self) -> int:
        return int(self.targets.shape[0]) + self.dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x)
        if x.shape != (self.dim,):
            raise DimensionError(f"vector of length {x.shape} does not match sector dim {self.dim}")
        out = np.empty_like(x, dtype=np.result_type(x.dtype, np.float64))
        _matvec(self.diag, self.ptr, self.targets, self.offdiag, x.astype(out.dtype, copy=False), out)
        return out

    __call__ = matvec


def apply_hamiltonian(params: ModelParams, sector: BasisSector, v: StateVector,
                      operator: SectorHamiltonian | None = None) -> np.ndarray:
    """Return ``H v`` as a raw amplitude array over ``sector`` (not normalized).

    Pass a prebuilt ``operator`` to avoid rebuilding the index table.
    """
    if v.sector is not sector and (v.sector is None or v.sector.dim != sector.dim
                                   or v.sector.two_sz != sector.two_sz):
        raise DimensionError("state does not live in the given sector")
    if operator is None:
        operator = SectorHamiltonian.for_model(params, sector)
    return operator.matvec(v.amplitudes)


_SX = np.array([[0.0, 0.5], [0.5, 0.0]])
_SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
_SZ = np.array([[0.5, 0.0], [0.0, -0.5]])


def _site_operator(op, site, n_sites):
    # Full-space index s has bit `site` as Kronecker factor (n_sites - 1 - site).
    left = sp.identity(1 << (n_sites - 1 - site), format="csr")
    right = sp.identity(1 << site, format="csr")
    # basis order within a factor is (bit=0, bit=1) = (down, up); flip to match
    flipped = op[::-1, ::-1]
    return sp.kron(sp.kron(left, sp.csr_matrix(flipped)), right, format="csr")


def dense_matrix(params: ModelParams, sector: BasisSector) -> np.ndarray:
    """Dense sector block of H from explicit Kronecker products of spin matrices.

    Independent of :class:`SectorHamiltonian`; used as a test oracle.
    """
    if sector.dim > DENSE_LIMIT:
        raise SizeError(f"sector dim {sector.dim} exceeds dense limit {DENSE_LIMIT}")
    n = params.n_sites
    if n > 20:
        raise SizeError("dense oracle limited to 20 sites")
    j = params.couplings()
    full = sp.csr_matrix((1 << n, 1 << n), dtype=np.complex128)
    ops = {}
    for site in range(n):
        ops[site] = [_site_operator(o, site, n) for o in (_SX, _SY, _SZ)]
    for a, b, cls in params.bonds():
        if j[cls] == 0.0:
            continue
        for oa, ob in zip(ops[a], ops[b]):
            full = full + j[cls] * (oa @ ob)
    idx = sector.states
    block = full[idx][:, idx].toarray()
    if np.abs(block.imag).max(initial=0.0) > 1e-12:
        raise AssertionError("Heisenberg block should be real")
    return block.real
