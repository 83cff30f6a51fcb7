"""Reduced density matrices, Schmidt decompositions and localized entanglement.

Index conventions
-----------------
A list of sites ``(q_0, ..., q_{m-1})`` indexes its ``2**m`` configurations with
``q_0`` as the most significant bit. The system ``S = S1 + S2`` uses the index
``i1 * d2 + i2``, so a system vector reshaped to ``(d1, d2)`` is directly the
coefficient matrix whose ``Q Q^dagger`` is the RDM of ``S1``.

A measurement basis is a set of orthonormal columns ``xi`` in the environment
space. Measuring outcome ``xi`` leaves the system in the (unnormalized) branch
``w = <xi|Psi> = psi @ conj(xi)`` where ``psi[s, e]`` is the system-by-environment
coefficient matrix; its probability is ``|w|^2 = <xi|rho_E|xi>``.

All entropies use base-2 logarithms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (BasisError, CoverageError, IllDefinedLimitError, InvalidDensityError,
                     NotSymmetryAdaptedError, SizeError, SymmetryError)
from .lattice.basis import popcount, site_bits
from .lattice.state import StateVector

P_TOL = 1e-12
DEG_TOL = 1e-9
KERNEL_TOL = 1e-8
TRUNC_TOL = 1e-12
ORTHO_TOL = 1e-10
COVERAGE_TOL = 1e-8
COMMUTE_TOL = 1e-8
SUPPORT_TOL = 1e-12
RDM_MAX_SITES = 12


@dataclass(frozen=True)
class Partition:
    """Disjoint site sets ``S1``, ``S2`` and environment ``E`` covering the chain."""

    s1_sites: tuple[int, ...]
    s2_sites: tuple[int, ...]
    env_sites: tuple[int, ...]

    def __post_init__(self):
        for name in ("s1_sites", "s2_sites", "env_sites"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        if not self.s1_sites or not self.s2_sites:
            raise ValueError("S1 and S2 must be nonempty")
        allsites = self.s1_sites + self.s2_sites + self.env_sites
        if len(set(allsites)) != len(allsites):
            raise ValueError("partition blocks overlap")
        if sorted(allsites) != list(range(len(allsites))):
            raise ValueError("partition must cover sites 0..n-1 exactly")

    @classmethod
    def from_system(cls, n_sites: int, s1, s2) -> "Partition":
        s1 = tuple(np.atleast_1d(s1).tolist())
        s2 = tuple(np.atleast_1d(s2).tolist())
        env = tuple(i for i in range(n_sites) if i not in s1 and i not in s2)
        return cls(s1, s2, env)

    @property
    def n_sites(self) -> int:
        return len(self.s1_sites) + len(self.s2_sites) + len(self.env_sites)

    @property
    def system_sites(self) -> tuple[int, ...]:
        return self.s1_sites + self.s2_sites

    @property
    def d1(self) -> int:
        return 1 << len(self.s1_sites)

    @property
    def d2(self) -> int:
        return 1 << len(self.s2_sites)

    @property
    def d_s(self) -> int:
        return self.d1 * self.d2

    @property
    def d_e(self) -> int:
        return 1 << len(self.env_sites)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12, eig_tol: float = 1e-10) -> None:
        m = self.entries
        if np.abs(m - m.conj().T).max() > herm_tol:
            raise InvalidDensityError("density matrix not Hermitian")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise InvalidDensityError(f"trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m)[0] < -eig_tol:
            raise InvalidDensityError("density matrix not positive semidefinite")


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    lambdas: np.ndarray
    env_vectors: np.ndarray = field(repr=False)
    sys_vectors: np.ndarray = field(repr=False)

    @property
    def schmidt_number(self) -> int:
        return int(np.count_nonzero(self.lambdas > TRUNC_TOL))


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Orthonormal environment vectors (columns of ``vectors``)."""

    vectors: np.ndarray = field(repr=False)
    labels: tuple | None = None
    probabilities: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def env_dim(self) -> int:
        return int(self.vectors.shape[0])

    def gram_error(self) -> float:
        g = self.vectors.conj().T @ self.vectors
        return float(np.abs(g - np.eye(self.dim)).max(initial=0.0))

    @classmethod
    def computational(cls, d_e: int) -> "MeasurementBasis":
        return cls(np.eye(d_e))


@dataclass(frozen=True, eq=False)
class LocalizationResult:
    """Outcome of measuring the environment in a given basis.

    ``branch_states[i]`` is the normalized post-measurement system state as a
    ``(d1, d2)`` matrix; inactive branches (``p_i <= P_TOL``) are zero matrices
    with entropy 0.
    """

    probabilities: np.ndarray
    branch_states: np.ndarray = field(repr=False)
    branch_entropies: np.ndarray
    average: float
    active: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.probabilities.shape[0])


@dataclass(frozen=True, eq=False)
class LecmResult:
    localization: LocalizationResult
    decomposition: SchmidtDecomposition
    basis: MeasurementBasis
    degeneracy_policy_applied: str
    singlet_weight: float | None = None
    triplet_weight: float | None = None

    @property
    def value(self) -> float:
        return self.localization.average


# --------------------------------------------------------------------------- helpers

def system_env_matrix(state: StateVector, partition: Partition) -> np.ndarray:
    """Coefficient matrix ``psi[s, e]`` of the state split into system and environment."""
    if partition.n_sites != state.n_sites:
        raise ValueError("partition and state disagree on the number of sites")
    states = state.basis_states()
    sys_idx = site_bits(states, partition.system_sites)
    env_idx = site_bits(states, partition.env_sites)
    out = np.zeros((partition.d_s, partition.d_e), dtype=state.amplitudes.dtype)
    out[sys_idx, env_idx] = state.amplitudes
    return out


def _entropy_from_probs(w: np.ndarray) -> float:
    w = np.clip(np.real(w), 0.0, 1.0)
    w = w[w > 0.0]
    return float(-(w * np.log2(w)).sum()) + 0.0


def branch_entropy(q: np.ndarray) -> float:
    """Entanglement entropy of a normalized ``(d1, d2)`` coefficient matrix."""
    rho = q @ q.conj().T if q.shape[0] <= q.shape[1] else q.conj().T @ q
    return _entropy_from_probs(np.linalg.eigvalsh(rho))


# --------------------------------------------------------------------------- operations

def reduced_density_matrix(state: StateVector, keep_sites) -> DensityMatrix:
    """``Tr_complement |Psi><Psi|`` on ``keep_sites`` (first listed site most significant)."""
    keep = [int(s) for s in keep_sites]
    if not keep:
        raise ValueError("keep_sites must be nonempty")
    if len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= state.n_sites:
        raise ValueError("keep_sites must be distinct sites of the chain")
    if len(keep) > RDM_MAX_SITES:
        raise SizeError(f"RDM on {len(keep)} sites exceeds the dense limit of {RDM_MAX_SITES}")
    rest = [s for s in range(state.n_sites) if s not in keep]
    states = state.basis_states()
    m = np.zeros((1 << len(keep), 1 << len(rest)), dtype=state.amplitudes.dtype)
    m[site_bits(states, keep), site_bits(states, rest)] = state.amplitudes
    rho = m @ m.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def von_neumann_entropy(rho) -> float:
    """``-Tr rho log2 rho`` with ``0 log 0 = 0``."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    tr = np.trace(m)
    if abs(tr - 1.0) > 1e-8:
        raise InvalidDensityError(f"trace {tr!r} deviates from 1")
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if w[0] < -1e-8:
        raise InvalidDensityError(f"negative eigenvalue {w[0]!r}")
    return _entropy_from_probs(w)


def schmidt_decompose(state: StateVector, partition: Partition) -> SchmidtDecomposition:
    """SVD of the system-by-environment coefficient matrix, truncated at ``TRUNC_TOL``."""
    if not partition.env_sites:
        raise ValueError("Schmidt decomposition needs a nonempty environment")
    psi = system_env_matrix(state, partition)
    return _schmidt_from_matrix(psi)


def _schmidt_from_matrix(psi: np.ndarray) -> SchmidtDecomposition:
    u, s, vh = np.linalg.svd(psi, full_matrices=False)
    lam = s**2
    keep = lam > TRUNC_TOL
    # env column xi_i = vh[i] gives psi @ conj(xi_i) = s_i u_i
    return SchmidtDecomposition(lam[keep], vh[keep].T.copy(), u[:, keep].copy())


def _branches(psi: np.ndarray, x: np.ndarray, d1: int, d2: int):
    w = psi @ x.conj()
    p = np.einsum("sd,sd->d", w.conj(), w).real
    active = p > P_TOL
    q = np.zeros((x.shape[1], d1, d2), dtype=w.dtype)
    q[active] = (w[:, active] / np.sqrt(p[active])).T.reshape(-1, d1, d2)
    return p, q, active


def localize_matrix(psi: np.ndarray, d1: int, d2: int, x: np.ndarray) -> LocalizationResult:
    """:func:`localize` on a precomputed coefficient matrix."""
    gram = x.conj().T @ x
    if np.abs(gram - np.eye(x.shape[1])).max(initial=0.0) > ORTHO_TOL:
        raise BasisError("measurement basis is not orthonormal")
    p, q, active = _branches(psi, x, d1, d2)
    total = p.sum()
    if abs(total - 1.0) > COVERAGE_TOL:
        raise CoverageError(f"basis misses part of the environment support (sum p = {total!r})")
    ent = np.zeros(p.shape[0])
    for i in np.flatnonzero(active):
        ent[i] = branch_entropy(q[i])
    return LocalizationResult(p, q, ent, float(np.dot(p, ent)), active)


def localize(state: StateVector, partition: Partition, bsm: MeasurementBasis) -> LocalizationResult:
    """Average S1|S2 entanglement after measuring the environment in ``bsm``."""
    if bsm.env_dim != partition.d_e:
        raise BasisError(f"basis vectors have length {bsm.env_dim}, environment has {partition.d_e}")
    psi = system_env_matrix(state, partition)
    return localize_matrix(psi, partition.d1, partition.d2, bsm.vectors)


# --------------------------------------------------------------------------- symmetries

class EnvSz:
    """Total ``S_z`` of the environment, diagonal in the environment bit basis."""

    name = "env_sz"

    def __init__(self, partition: Partition):
        m = len(partition.env_sites)
        self.diag = popcount(np.arange(1 << m, dtype=np.int64)) - 0.5 * m

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.diag[:, None] * x


class EnvReflection:
    """Chain reflection ``i -> n - 1 - i`` restricted to the environment sites."""

    name = "env_reflection"

    def __init__(self, partition: Partition):
        n = partition.n_sites
        env = list(partition.env_sites)
        pos = {site: t for t, site in enumerate(env)}
        try:
            self.axes = tuple(pos[n - 1 - site] for site in env)
        except KeyError:
            raise SymmetryError("environment is not mapped onto itself by the reflection") from None
        self.m = len(env)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        cols = x.shape[1]
        t = x.reshape((2,) * self.m + (cols,))
        return t.transpose(self.axes + (self.m,)).reshape(x.shape)


SYMMETRIES = {"env_sz": EnvSz, "env_reflection": EnvReflection}


def default_symmetries(partition: Partition) -> list:
    ops = [EnvSz(partition)]
    try:
        ops.append(EnvReflection(partition))
    except SymmetryError:
        pass
    return ops


def _apply(op, x: np.ndarray) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op @ x
    return op(x)


def _op_name(op) -> str:
    return getattr(op, "name", type(op).__name__)


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    groups, start = [], 0
    for k in range(1, len(values) + 1):
        if k == len(values) or abs(values[k] - values[k - 1]) >= tol:
            groups.append(np.arange(start, k))
            start = k
    return groups


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    ph = v[k] / abs(v[k])
    return v / ph


def _lex_key(v: np.ndarray):
    r = np.round(np.concatenate([v.real, v.imag]), 12)
    return tuple((-r).tolist())


def _resolve(x: np.ndarray, lam: np.ndarray, ops: list):
    """Symmetry-adapted eigenbasis of ``rho_E`` on the span of ``x``; return (x, labels).

    The support is first split into joint eigenspaces of ``ops`` and ``rho_E``
    is diagonalized inside each of them. For an exactly symmetric state this
    is an eigenbasis of ``rho_E`` with degenerate clusters fixed by the
    symmetries; it also keeps weights that are only nearly degenerate from
    mixing symmetry sectors through rounding noise in the state.
    """
    d = x.shape[1]
    op_mats = []
    for op in ops:
        ox = _apply(op, x)
        c = x.conj().T @ ox
        leak = (ox - x @ c) * lam
        comm = np.linalg.norm(c * lam[None, :] - lam[:, None] * c) + np.linalg.norm(leak)
        if comm > COMMUTE_TOL:
            raise SymmetryError(f"{_op_name(op)} does not commute with rho_E on its support ({comm:.2e})")
        op_mats.append(0.5 * (c + c.conj().T))

    blocks = [(np.eye(d), ())]
    for c in op_mats:
        refined = []
        for y, lab in blocks:
            ev, vecs = np.linalg.eigh(y.conj().T @ c @ y)
            for grp in _clusters(ev, 1e-6):
                refined.append((y @ vecs[:, grp], lab + (float(ev[grp].mean()),)))
        blocks = refined

    new_cols, labels, order_keys = [], [], []
    for y, lab in blocks:
        w, u = np.linalg.eigh(y.conj().T @ (lam[:, None] * y))
        y = y @ u
        for cl in _clusters(w, DEG_TOL):
            # residual degeneracy: fix the basis by phase and lexicographic order
            cols = sorted((_fix_phase(x @ y[:, k]) for k in cl), key=_lex_key)
            for col in cols:
                new_cols.append(col)
                labels.append(lab)
                order_keys.append((-round(float(w[cl].mean()), 12), tuple(np.round(lab, 9))))
    perm = sorted(range(d), key=lambda k: order_keys[k])
    xr = np.stack([new_cols[k] for k in perm], axis=1)
    return xr, tuple(labels[k] for k in perm)


def lecm(state: StateVector, partition: Partition, symmetry_ops: list | None = None) -> LecmResult:
    """Entanglement localized by measuring the environment in the eigenbasis of its RDM.

    ``symmetry_ops`` are Hermitian operators on the environment (arrays or
    callables acting on column blocks) whose joint eigenspaces, in order, fix
    the basis inside degenerate eigenvalue clusters. Operators that do not
    commute with ``rho_E`` are an error only when the spectrum is degenerate.
    ``None`` selects total environment ``S_z``
    followed by the chain reflection when the environment is mirror symmetric;
    pass ``[]`` to skip resolution.
    """
    if not partition.env_sites:
        raise ValueError("LECM needs a nonempty environment")
    if symmetry_ops is None:
        symmetry_ops = default_symmetries(partition)
    else:
        symmetry_ops = [SYMMETRIES[op](partition) if isinstance(op, str) else op for op in symmetry_ops]
    psi = system_env_matrix(state, partition)
    sd = _schmidt_from_matrix(psi)
    x = sd.env_vectors
    lam = sd.lambdas
    degenerate = any(len(c) > 1 for c in _clusters(lam, DEG_TOL))
    labels = None
    policy = "nondegenerate spectrum"
    if symmetry_ops:
        try:
            x, labels = _resolve(x, lam, symmetry_ops)
            policy = "resolved by " + ", ".join(_op_name(op) for op in symmetry_ops)
        except SymmetryError:
            # without the symmetries a nondegenerate eigenbasis is still unique
            if degenerate:
                raise
    elif degenerate:
        policy = "degenerate, unresolved (SVD order)"
    loc = localize_matrix(psi, partition.d1, partition.d2, x)
    decomposition = SchmidtDecomposition(
        loc.probabilities.copy(), x, loc.branch_states.reshape(x.shape[1], -1).T.copy())
    basis = MeasurementBasis(x, labels, loc.probabilities.copy())
    ls = lt = None
    if partition.d1 == 2 and partition.d2 == 2:
        rho_s = psi @ psi.conj().T
        try:
            ls, lt, _ = two_site_lecm_spin_half(DensityMatrix(rho_s))
        except NotSymmetryAdaptedError:
            pass
    return LecmResult(loc, decomposition, basis, policy, ls, lt)


# two-site spin-1/2 system basis: index 2*b1 + b2, bit set = up
_SINGLET = np.array([0.0, -1.0, 1.0, 0.0]) / np.sqrt(2.0)
_TRIPLET0 = np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0)
_UPUP = np.array([0.0, 0.0, 0.0, 1.0])
_DOWNDOWN = np.array([1.0, 0.0, 0.0, 0.0])
TWO_SITE_BASIS = {"up_up": _UPUP, "triplet0": _TRIPLET0, "singlet": _SINGLET, "down_down": _DOWNDOWN}
_SZ2 = np.diag([-1.0, 0.0, 0.0, 1.0])
_SWAP = np.eye(4)[[0, 2, 1, 3]]


def two_site_lecm_spin_half(rho_s) -> tuple[float, float, float]:
    """``(lambda_singlet, lambda_triplet0, lambda_singlet + lambda_triplet0)``.

    Valid when the two-site RDM commutes with the pair ``S_z`` and with the
    swap of the two sites; its eigenvectors are then the symmetry-adapted
    states and only the singlet and ``m = 0`` triplet carry entanglement.
    """
    m = rho_s.entries if isinstance(rho_s, DensityMatrix) else np.asarray(rho_s)
    if m.shape != (4, 4):
        raise ValueError("expected a 4x4 two-site density matrix")
    for name, op in (("S_z", _SZ2), ("swap", _SWAP)):
        if np.abs(op @ m - m @ op).max() > 1e-8:
            raise NotSymmetryAdaptedError(f"two-site RDM does not commute with {name}")
    ls = float(np.real(_SINGLET @ m @ _SINGLET))
    lt = float(np.real(_TRIPLET0 @ m @ _TRIPLET0))
    return ls, lt, ls + lt


def support_trace_log(delta: np.ndarray, rho) -> float:
    """``Tr delta log2 rho`` evaluated on the support of ``rho``."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    return _support_trace_log_eig(np.asarray(delta), w, u)


def _support_trace_log_eig(delta: np.ndarray, w: np.ndarray, u: np.ndarray) -> float:
    dt = u.conj().T @ delta @ u
    supp = w > SUPPORT_TOL
    if not supp.all():
        ker = ~supp
        block = dt[np.ix_(ker, ker)]
        if np.linalg.norm(block, 2) >= KERNEL_TOL:
            raise IllDefinedLimitError(
                f"perturbation has weight {np.linalg.norm(block, 2):.2e} on the kernel of rho")
    return float(np.real(np.dot(np.diag(dt)[supp], np.log2(w[supp]))))


def reduced_condition_residual(loc: LocalizationResult, pair: tuple[int, int]) -> float:
    """``|Tr D log2 rho1(i) - Tr D log2 rho1(j)|`` with ``D = (Q R^+ + R Q^+)/2``.

    For a basis that diagonalizes ``rho_E`` the first-order change of the
    average entropy under rotation of the pair is ``2 sqrt(p_i p_j)`` times
    this quantity (up to sign).
    """
    i, j = pair
    if not (loc.active[i] and loc.active[j]):
        raise ValueError("both branches must have nonzero probability")
    q, r = loc.branch_states[i], loc.branch_states[j]
    delta = 0.5 * (q @ r.conj().T + r @ q.conj().T)
    lhs = support_trace_log(delta, q @ q.conj().T)
    rhs = support_trace_log(delta, r @ r.conj().T)
    return abs(lhs - rhs)
