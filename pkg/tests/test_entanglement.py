import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lecm import states
from lecm.entanglement import (
    TWO_SITE_BASIS,
    DensityMatrix,
    EnvSz,
    LocalizationResult,
    MeasurementBasis,
    Partition,
    branch_entropy,
    lecm,
    localize,
    localize_matrix,
    reduced_condition_residual,
    reduced_density_matrix,
    schmidt_decompose,
    support_trace_log,
    system_env_matrix,
    two_site_lecm_spin_half,
    von_neumann_entropy,
)
from lecm.errors import (
    BasisError,
    CoverageError,
    IllDefinedLimitError,
    InvalidDensityError,
    NotSymmetryAdaptedError,
    SymmetryError,
)
from lecm.lattice import ModelParams, StateVector, enumerate_sector, ground_state, symmetric_pair

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)


def brute_rdm(state, keep):
    """Partial trace by explicit tensor contraction of |psi><psi| (index site 0 last)."""
    n = state.n_sites
    psi = state.dense().reshape((2,) * n)  # axis k is site n-1-k
    axes = [n - 1 - s for s in keep]
    rest = [a for a in range(n) if a not in axes]
    t = np.transpose(psi, axes + rest).reshape(1 << len(keep), -1)
    return t @ t.conj().T


def random_basis(rng, d, real=True):
    g = rng.standard_normal((d, d)) + (0 if real else 1j * rng.standard_normal((d, d)))
    q, _ = np.linalg.qr(g)
    return q


def random_partition(rng, n):
    sites = rng.permutation(n)
    k1 = int(rng.integers(1, n - 1))
    k2 = int(rng.integers(1, n - k1)) if n - k1 > 1 else 1
    return Partition.from_system(n, sites[:k1], sites[k1:k1 + k2])


# --------------------------------------------------------------------------- RDM and entropy

def test_singlet_rdm_is_maximally_mixed():
    rho = reduced_density_matrix(states.singlet(), [0])
    assert np.allclose(rho.entries, np.eye(2) / 2, atol=1e-14)


def test_ghz_two_site_rdm():
    rho = reduced_density_matrix(states.ghz(3), [0, 1])
    assert np.allclose(rho.entries, np.diag([0.5, 0, 0, 0.5]), atol=1e-14)


def test_rdm_matches_brute_force_and_dual_spectrum(rng):
    st8 = states.random_state(8, rng, real=False)
    rho = reduced_density_matrix(st8, [2, 5])
    rho.check()
    assert np.allclose(rho.entries, brute_rdm(st8, [2, 5]), atol=1e-13)
    comp = reduced_density_matrix(st8, [0, 1, 3, 4, 6, 7])
    a = np.sort(np.linalg.eigvalsh(rho.entries))[::-1]
    b = np.sort(np.linalg.eigvalsh(comp.entries))[::-1][:4]
    assert np.allclose(a, b, atol=1e-10)


def test_rdm_from_sector_state_matches_full_embedding():
    gs = ground_state(ModelParams(8, j2=0.3), enumerate_sector(8, 0)).vector
    assert np.allclose(reduced_density_matrix(gs, [1, 6]).entries, brute_rdm(gs, [1, 6]), atol=1e-13)


def test_rdm_rejects_empty_keep():
    with pytest.raises(ValueError):
        reduced_density_matrix(states.ghz(3), [])


@pytest.mark.parametrize("rho,expected", [
    (np.eye(4) / 4, 2.0), (np.diag([1.0, 0, 0]), 0.0), (np.diag([0.5, 0.5, 0, 0]), 1.0)])
def test_von_neumann_entropy_values(rho, expected):
    assert von_neumann_entropy(rho) == pytest.approx(expected, abs=1e-14)


def test_von_neumann_bad_trace():
    with pytest.raises(InvalidDensityError):
        von_neumann_entropy(np.eye(2))


@given(st.integers(0, 10**6))
def test_eigenvalue_duality_random_states(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    state = states.random_state(n, rng, real=bool(rng.integers(2)))
    k = int(rng.integers(1, min(n - 1, 6) + 1))
    keep = sorted(rng.choice(n, size=k, replace=False).tolist())
    rest = [s for s in range(n) if s not in keep]
    a = np.linalg.eigvalsh(reduced_density_matrix(state, keep).entries)[::-1]
    b = np.linalg.eigvalsh(reduced_density_matrix(state, rest).entries)[::-1]
    m = min(len(a), len(b))
    assert np.allclose(a[:m], b[:m], atol=1e-10)
    assert np.all(np.abs(a[m:]) < 1e-10) and np.all(np.abs(b[m:]) < 1e-10)
    assert von_neumann_entropy(reduced_density_matrix(state, keep)) == pytest.approx(
        von_neumann_entropy(reduced_density_matrix(state, rest)), abs=1e-10)


# --------------------------------------------------------------------------- Schmidt

def test_bell_pair_schmidt():
    # Bell pair between S1 = site 0 and the environment site 2; site 1 is a spectator
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    amps = np.zeros(8)
    amps[[0b000, 0b101]] = bell[[0, 3]]
    state = StateVector(amps, 3)
    sd = schmidt_decompose(state, Partition.from_system(3, [0], [1]))
    assert np.allclose(sd.lambdas, [0.5, 0.5], atol=1e-14)
    assert sd.schmidt_number == 2


def test_product_state_schmidt():
    prod = states.product(np.array([0.6, 0.8]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    sd = schmidt_decompose(prod, Partition.from_system(3, [0], [1]))
    assert sd.schmidt_number == 1 and sd.lambdas[0] == pytest.approx(1.0, abs=1e-14)


@given(st.integers(0, 10**6))
def test_schmidt_reconstruction(seed):
    rng = np.random.default_rng(seed)
    state = states.random_state(10, rng, real=bool(rng.integers(2)))
    part = random_partition(rng, 10)
    sd = schmidt_decompose(state, part)
    psi = system_env_matrix(state, part)
    rebuilt = (sd.sys_vectors * np.sqrt(sd.lambdas)) @ sd.env_vectors.T
    assert np.linalg.norm(psi - rebuilt) < 1e-10
    assert sd.lambdas.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(sd.lambdas) <= 1e-15)
    for v in (sd.env_vectors, sd.sys_vectors):
        assert np.abs(v.conj().T @ v - np.eye(v.shape[1])).max() < 1e-12


# --------------------------------------------------------------------------- localize

def test_ghz_hadamard_basis_gives_bell_branches():
    ghz = states.ghz(3)
    part = Partition.from_system(3, [0], [1])
    loc = localize(ghz, part, MeasurementBasis(HADAMARD))
    assert np.allclose(loc.probabilities, [0.5, 0.5])
    assert np.allclose(loc.branch_entropies, [1.0, 1.0])
    assert loc.average == pytest.approx(1.0, abs=1e-14)


def test_product_state_independent_of_basis(rng):
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    env = rng.standard_normal(4)
    prod = states.product(bell, env / np.linalg.norm(env))
    part = Partition.from_system(4, [0], [1])
    for _ in range(5):
        loc = localize(prod, part, MeasurementBasis(random_basis(rng, 4)))
        assert loc.average == pytest.approx(1.0, abs=1e-12)


def projection_oracle(state, part, x):
    """Average entropy with each branch assembled entry by entry from the full amplitude list."""
    n = state.n_sites
    full = state.dense()

    def index(bits, sites):
        return int("".join(str(bits[q]) for q in sites), 2)

    total = 0.0
    for k in range(x.shape[1]):
        branch = np.zeros((part.d1, part.d2), dtype=complex)
        for s in range(1 << n):
            bits = [(s >> q) & 1 for q in range(n)]
            e = index(bits, part.env_sites)
            branch[index(bits, part.s1_sites), index(bits, part.s2_sites)] += np.conj(x[e, k]) * full[s]
        p = np.linalg.norm(branch) ** 2
        if p > 1e-12:
            total += p * branch_entropy(branch / np.sqrt(p))
    return total


def test_localize_matches_projection_oracle(rng):
    for s1, s2 in [(2, 0), (0, 1), (1, 2)] * 3:
        state = states.random_state(3, rng, real=False)
        part = Partition.from_system(3, [s1], [s2])
        x = random_basis(rng, 2, real=False)
        assert localize(state, part, MeasurementBasis(x)).average == pytest.approx(
            projection_oracle(state, part, x), abs=1e-12)


def test_localize_errors(rng):
    ghz = states.ghz(3)
    part = Partition.from_system(3, [0], [1])
    with pytest.raises(BasisError):
        localize(ghz, part, MeasurementBasis(np.array([[1.0, 1.0], [0.0, 1.0]])))
    with pytest.raises(CoverageError):
        localize(ghz, part, MeasurementBasis(np.array([[1.0], [0.0]])))
    with pytest.raises(BasisError):
        localize(ghz, part, MeasurementBasis(np.eye(4)))


@given(st.integers(0, 10**6))
def test_probability_closure_gauge_and_bounds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    state = states.random_state(n, rng, real=bool(rng.integers(2)))
    part = random_partition(rng, n)
    x = random_basis(rng, part.d_e, real=state.is_real)
    loc = localize(state, part, MeasurementBasis(x))
    assert abs(loc.probabilities.sum() - 1) < 1e-10 and loc.probabilities.min() >= -1e-12
    bound = np.log2(min(part.d1, part.d2))
    assert np.all(loc.branch_entropies >= -1e-12) and np.all(loc.branch_entropies <= bound + 1e-12)
    assert -1e-12 <= loc.average <= bound + 1e-12
    perm = rng.permutation(part.d_e)
    phases = np.exp(2j * np.pi * rng.random(part.d_e))
    loc2 = localize(state, part, MeasurementBasis(x[:, perm] * phases))
    assert loc2.average == pytest.approx(loc.average, abs=1e-12)
    assert np.allclose(np.sort(loc2.probabilities), np.sort(loc.probabilities), atol=1e-12)


# --------------------------------------------------------------------------- LECM

def test_w_state_lecm():
    res = lecm(states.w_state(3), Partition.from_system(3, [0], [1]))
    assert res.value == pytest.approx(2 / 3, abs=1e-12)
    assert np.allclose(res.localization.probabilities, [2 / 3, 1 / 3])


def test_ghz_lecm_resolved_by_env_sz():
    part = Partition.from_system(3, [0], [1])
    res = lecm(states.ghz(3), part, [EnvSz(part)])
    assert res.value == pytest.approx(0.0, abs=1e-14)
    x = np.abs(res.basis.vectors)
    assert np.allclose(np.sort(x, axis=0), [[0, 0], [1, 1]])
    assert res.basis.labels is not None
    assert "env_sz" in res.degeneracy_policy_applied


def test_lecm_deterministic_ordering():
    part = Partition.from_system(3, [0], [1])
    a = lecm(states.ghz(3), part, ["env_sz"])
    b = lecm(states.ghz(3), part, ["env_sz"])
    assert np.array_equal(a.basis.vectors, b.basis.vectors)
    # descending lambda, then ascending env S_z label
    assert [lab[0] for lab in a.basis.labels] == [-0.5, 0.5]


def test_lecm_symmetry_must_commute():
    # GHZ on four sites: rho_E is degenerate on span{|00>, |11>} of the two env sites
    ghz4 = states.ghz(4)
    part = Partition.from_system(4, [0], [1])
    bad = np.zeros((4, 4))
    bad[0, 1] = bad[1, 0] = 1.0  # couples the support vector |00> to the kernel vector |01>
    with pytest.raises(SymmetryError):
        lecm(ghz4, part, [bad])
    resolved = lecm(ghz4, part, ["env_sz"])
    assert resolved.value == pytest.approx(0.0, abs=1e-14)


def test_lecm_probabilities_equal_schmidt_lambdas(rng):
    for _ in range(5):
        state = states.random_state(6, rng)
        part = Partition.from_system(6, [1], [4])
        res = lecm(state, part)
        sd = schmidt_decompose(state, part)
        assert np.allclose(res.localization.probabilities, sd.lambdas, atol=1e-10)
        loc = localize(state, part, MeasurementBasis(sd.env_vectors))
        assert loc.average == pytest.approx(res.value, abs=1e-10)


def test_lecm_chain_pair_matches_two_site_formula():
    gs = ground_state(ModelParams(8), enumerate_sector(8, 0)).vector
    a, b = symmetric_pair(8, 1)
    res = lecm(gs, Partition.from_system(8, [a], [b]))
    ls, lt, sbar = two_site_lecm_spin_half(reduced_density_matrix(gs, [a, b]))
    assert res.value == pytest.approx(sbar, abs=1e-10)
    assert res.singlet_weight == pytest.approx(ls, abs=1e-12)
    assert res.triplet_weight == pytest.approx(lt, abs=1e-12)


def _mirror_pair_state(lam, noise, rng):
    # sites 1, 2 form the system and sites 0, 3 the environment; every term is
    # even under the chain reflection and the singlet/triplet0 weights differ
    # by far more than the degeneracy threshold but far less than O(1)
    up, dn = np.array([0.0, 1.0]), np.array([1.0, 0.0])

    def pair(kind):
        if kind == "s":
            return (np.kron(up, dn) - np.kron(dn, up)) / np.sqrt(2)
        if kind == "t":
            return (np.kron(up, dn) + np.kron(dn, up)) / np.sqrt(2)
        return np.kron(up, up) if kind == "u" else np.kron(dn, dn)

    amp = np.zeros(16)
    for w, sys_kind, env_kind in zip(lam, "stud", "stdu"):
        sys_v, env_v = pair(sys_kind).reshape(2, 2), pair(env_kind).reshape(2, 2)
        # full index s3 s2 s1 s0 (site 3 most significant); sys[s1, s2], env[s0, s3]
        amp += np.sqrt(w) * np.einsum("bc,ad->dcba", sys_v, env_v).reshape(16)
    amp += noise * rng.standard_normal(16) * np.array([bin(k).count("1") == 2 for k in range(16)])
    return StateVector(amp / np.linalg.norm(amp), 4)


def test_lecm_keeps_near_degenerate_sectors_apart(rng):
    from lecm.stationarity import optimality_residual

    lam = np.array([0.25 + 3e-7, 0.25 - 1e-7, 0.25 - 1e-7, 0.25 - 1e-7])
    state = _mirror_pair_state(lam, 1e-11, rng)
    part = Partition.from_system(4, [1], [2])
    res = lecm(state, part)
    _, _, formula = two_site_lecm_spin_half(reduced_density_matrix(state, [1, 2]))
    assert res.value == pytest.approx(formula, abs=1e-13)
    assert optimality_residual(state, part, res.basis).stationary
    # the plain eigenbasis of the noisy state mixes singlet and triplet0
    plain = lecm(state, part, [])
    assert abs(plain.value - formula) > 1e-13


def test_two_site_formula_examples():
    assert two_site_lecm_spin_half(np.eye(4) / 4) == pytest.approx((0.25, 0.25, 0.5), abs=1e-15)
    s = TWO_SITE_BASIS["singlet"]
    assert two_site_lecm_spin_half(np.outer(s, s)) == pytest.approx((1.0, 0.0, 1.0), abs=1e-15)
    with pytest.raises(NotSymmetryAdaptedError):
        two_site_lecm_spin_half(np.diag([0.1, 0.2, 0.3, 0.4]))
    with pytest.raises(ValueError):
        two_site_lecm_spin_half(np.eye(2) / 2)


# --------------------------------------------------------------------------- support traces

def test_support_trace_log_examples(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    assert support_trace_log(rho, rho) == pytest.approx(-von_neumann_entropy(rho), abs=1e-12)
    assert support_trace_log(np.diag([0.3, 0.0]), np.diag([1.0, 0.0])) == 0.0
    h = rng.standard_normal((3, 3))
    h = h + h.T
    w, u = np.linalg.eigh(rho)
    log_rho = (u * np.log2(w)) @ u.conj().T
    assert support_trace_log(h, DensityMatrix(rho)) == pytest.approx(np.trace(h @ log_rho).real, abs=1e-12)
    with pytest.raises(IllDefinedLimitError):
        support_trace_log(np.diag([0.0, 0.5]), np.diag([1.0, 0.0]))


def two_site_localization(vectors) -> LocalizationResult:
    q = np.stack([TWO_SITE_BASIS[name].reshape(2, 2) for name in vectors])
    p = np.full(len(vectors), 1.0 / len(vectors))
    ent = np.array([branch_entropy(m) for m in q])
    return LocalizationResult(p, q, ent, float(p @ ent), np.ones(len(vectors), dtype=bool))


def test_reduced_condition_on_symmetry_adapted_states():
    names = list(TWO_SITE_BASIS)
    loc = two_site_localization(names)
    for i, j in itertools.combinations(range(4), 2):
        assert reduced_condition_residual(loc, (i, j)) < 1e-10
    assert reduced_condition_residual(loc, (1, 1)) == 0.0


def test_reduced_condition_needs_active_pair():
    loc = two_site_localization(["singlet", "up_up"])
    loc.active[1] = False
    with pytest.raises(ValueError):
        reduced_condition_residual(loc, (0, 1))


def test_localize_matrix_inactive_branch_kept():
    prod = states.product(np.array([1.0, 0.0]), np.array([1.0, 0, 0, 1]) / np.sqrt(2))
    part = Partition.from_system(3, [1], [2])
    loc = localize_matrix(system_env_matrix(prod, part), 2, 2, np.eye(2))
    assert loc.active.tolist() == [True, False]
    assert loc.branch_entropies[1] == 0.0 and np.all(loc.branch_states[1] == 0)
