"""First-order calculus of the localized entanglement under basis rotations.

An elementary transformation (ET) rotates two measurement vectors into each
other by a small angle and leaves the rest alone. To first order in the
angle ``eps`` the probabilities, branch states, branch RDMs and entropies all
shift linearly, which yields the slope ``sbar1`` of the average entropy:

    sbar(eps) = sbar + eps * sbar1 + O(eps^2)

A basis is stationary when ``sbar1`` vanishes for every pair of branches with
nonzero probability. This module evaluates those slopes, audits bases, checks
the slopes against finite differences and runs a greedy ascent/descent over
pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .entanglement import (ORTHO_TOL, P_TOL, BasisError, LocalizationResult, MeasurementBasis,
                           Partition, _entropy_from_probs, _support_trace_log_eig,
                           localize_matrix, system_env_matrix)
from .errors import IllDefinedLimitError, InadmissibleETError, SizeError, StallError
from .lattice.state import StateVector

log = logging.getLogger(__name__)

MAX_EPS = 0.1
ORACLE_MAX_ENV_DIM = 16


@dataclass(frozen=True)
class ETStep:
    i: int
    j: int
    epsilon: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("an ET needs two distinct branches")
        if abs(self.epsilon) > MAX_EPS:
            raise ValueError(f"|epsilon| = {abs(self.epsilon)} outside the first-order regime")


def pair_admissible(p_i: float, p_j: float) -> bool:
    return (p_i > P_TOL) == (p_j > P_TOL)


def elementary_transform(bsm: MeasurementBasis, step: ETStep, *, phase: bool = False) -> MeasurementBasis:
    """Rotate vectors ``i`` and ``j`` of ``bsm``; the pair is renormalized exactly.

    ``phase=True`` uses the complex mixing ``xi_i + i*eps*xi_j``,
    ``xi_j + i*eps*xi_i`` instead of the real rotation.
    """
    i, j, eps = step.i, step.j, float(step.epsilon)
    if bsm.probabilities is not None:
        p = bsm.probabilities
        if not pair_admissible(p[i], p[j]):
            raise InadmissibleETError(f"pair ({i}, {j}) mixes a zero and a nonzero probability")
    x = bsm.vectors.astype(np.complex128 if phase else np.result_type(bsm.vectors, float), copy=True)
    xi, xj = x[:, i].copy(), x[:, j].copy()
    scale = 1.0 / np.sqrt(1.0 + eps * eps)
    if phase:
        x[:, i] = (xi + 1j * eps * xj) * scale
        x[:, j] = (xj + 1j * eps * xi) * scale
    else:
        x[:, i] = (xi + eps * xj) * scale
        x[:, j] = (xj - eps * xi) * scale
    return MeasurementBasis(x, bsm.labels)


def environment_rdm(state: StateVector, partition: Partition, max_dim: int = 1 << 12) -> np.ndarray:
    """Dense ``rho_E[e, e'] = sum_s psi[s, e] conj(psi[s, e'])``."""
    if partition.d_e > max_dim:
        raise SizeError(f"environment dimension {partition.d_e} above dense limit {max_dim}")
    psi = system_env_matrix(state, partition)
    return psi.T @ psi.conj()


def coupling_k(rho_e, bsm: MeasurementBasis, i: int, j: int) -> float:
    """``<xi_i|rho_E|xi_j> + <xi_j|rho_E|xi_i>``."""
    if i == j:
        raise ValueError("coupling needs i != j")
    m = rho_e.entries if hasattr(rho_e, "entries") else np.asarray(rho_e)
    xi, xj = bsm.vectors[:, i], bsm.vectors[:, j]
    return float(np.real(xi.conj() @ m @ xj + xj.conj() @ m @ xi))


@dataclass(frozen=True, eq=False)
class FirstOrderData:
    i: int
    j: int
    p_i: float
    p_j: float
    k_ij: float
    k_ji: float
    a_ij: float
    a_ji: float
    b_ij: float
    b_ji: float
    delta_ij: np.ndarray = field(repr=False)
    rho1_ij: np.ndarray = field(repr=False)
    rho1_ji: np.ndarray = field(repr=False)
    s_i: float = 0.0
    s_j: float = 0.0
    s1_ij: float = 0.0
    s1_ji: float = 0.0
    sbar1: float = 0.0


class _Branches:
    """Per-branch quantities shared by all pairs of one basis."""

    def __init__(self, psi: np.ndarray, d1: int, d2: int, x: np.ndarray):
        self.d1, self.d2 = d1, d2
        self.w = psi @ x.conj()
        self.p = np.einsum("sd,sd->d", self.w.conj(), self.w).real
        self.active = self.p > P_TOL
        n = x.shape[1]
        self.q = np.zeros((n, d1, d2), dtype=self.w.dtype)
        self.eig = [None] * n
        self.s = np.zeros(n)
        for k in np.flatnonzero(self.active):
            q = (self.w[:, k] / np.sqrt(self.p[k])).reshape(d1, d2)
            self.q[k] = q
            rho = q @ q.conj().T
            ev, u = np.linalg.eigh(0.5 * (rho + rho.conj().T))
            self.eig[k] = (ev, u)
            self.s[k] = _entropy_from_probs(ev)

    @property
    def average(self) -> float:
        return float(np.dot(self.p, self.s))

    def pair(self, i: int, j: int) -> FirstOrderData:
        pi, pj = float(self.p[i]), float(self.p[j])
        zero = np.zeros((self.d1, self.d1), dtype=self.q.dtype)
        if not self.active[i] and not self.active[j]:
            return FirstOrderData(i, j, pi, pj, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, zero, zero, zero)
        if not pair_admissible(pi, pj):
            raise InadmissibleETError(f"pair ({i}, {j}) mixes a zero and a nonzero probability")
        wi, wj = self.w[:, i], self.w[:, j]
        # <xi_i|rho_E|xi_j> = <w_j|w_i>
        k_ij = float(np.real(np.vdot(wj, wi) + np.vdot(wi, wj)))
        k_ji = float(np.real(np.vdot(wi, wj) + np.vdot(wj, wi)))
        a_ij, a_ji = -0.5 * k_ij / pi, -0.5 * k_ji / pj
        b_ij, b_ji = np.sqrt(pj / pi), np.sqrt(pi / pj)
        q, r = self.q[i], self.q[j]
        delta = 0.5 * (q @ r.conj().T + r @ q.conj().T)
        rho_i, rho_j = q @ q.conj().T, r @ r.conj().T
        rho1_ij = 2 * a_ij * rho_i + 2 * b_ij * delta
        rho1_ji = 2 * a_ji * rho_j + 2 * b_ji * delta
        s1_ij = _support_trace_log_eig(rho1_ij, *self.eig[i])
        s1_ji = _support_trace_log_eig(rho1_ji, *self.eig[j])
        si, sj = float(self.s[i]), float(self.s[j])
        sbar1 = k_ij * si - pi * s1_ij - k_ji * sj + pj * s1_ji
        return FirstOrderData(i, j, pi, pj, k_ij, k_ji, a_ij, a_ji, float(b_ij), float(b_ji),
                              delta, rho1_ij, rho1_ji, si, sj, s1_ij, s1_ji, float(sbar1))


def _phased(x: np.ndarray, j: int) -> np.ndarray:
    x = x.astype(np.complex128, copy=True)
    x[:, j] *= 1j
    return x


def _check_basis(partition: Partition, bsm: MeasurementBasis):
    if bsm.env_dim != partition.d_e:
        raise BasisError(f"basis vectors have length {bsm.env_dim}, environment has {partition.d_e}")
    if bsm.gram_error() > ORTHO_TOL:
        raise BasisError("measurement basis is not orthonormal")


def first_order_data(state: StateVector, partition: Partition, bsm: MeasurementBasis,
                     pair: tuple[int, int], *, phase: bool = False) -> FirstOrderData:
    """Slope data of the average entropy for the ET of ``pair``.

    With ``phase=True`` the slope refers to the complex ET of
    :func:`elementary_transform`, obtained as the real ET against
    ``i * xi_j`` (a global phase on one vector leaves every probability and
    entropy unchanged).
    """
    _check_basis(partition, bsm)
    i, j = pair
    x = bsm.vectors[:, [i, j]]
    if phase:
        x = _phased(x, 1)
    psi = system_env_matrix(state, partition)
    data = _Branches(psi, partition.d1, partition.d2, x).pair(0, 1)
    return FirstOrderData(i, j, *[getattr(data, f) for f in (
        "p_i", "p_j", "k_ij", "k_ji", "a_ij", "a_ji", "b_ij", "b_ji", "delta_ij", "rho1_ij",
        "rho1_ji", "s_i", "s_j", "s1_ij", "s1_ji", "sbar1")])


@dataclass(frozen=True, eq=False)
class OptimalityReport:
    pair_residuals: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    admissible: np.ndarray = field(repr=False)
    max_abs_residual: float
    stationary: bool
    average: float

    def rows(self):
        """``(i, j, p_i, p_j, sbar1)`` for every admissible pair ``i < j``."""
        d = self.pair_residuals.shape[0]
        for i in range(d):
            for j in range(i + 1, d):
                if self.admissible[i, j]:
                    yield i, j, float(self.probabilities[i]), float(self.probabilities[j]), \
                        float(self.pair_residuals[i, j])


def _report(br: _Branches, tol: float, phase: bool = False, psi=None, x=None,
            fallback=None) -> OptimalityReport:
    """Residual matrix over active pairs.

    ``fallback(i, j, phase)`` replaces the analytic slope where a branch RDM is
    numerically singular along the perturbation; without it the
    :class:`IllDefinedLimitError` propagates.
    """
    d = br.p.shape[0]
    res = np.zeros((d, d))
    adm = np.zeros((d, d), dtype=bool)
    act = np.flatnonzero(br.active)
    for a, i in enumerate(act):
        for j in act[a + 1:]:
            try:
                if phase:
                    sub = _Branches(psi, br.d1, br.d2, _phased(x[:, [i, j]], 1))
                    val = sub.pair(0, 1).sbar1
                else:
                    val = br.pair(i, j).sbar1
            except IllDefinedLimitError:
                if fallback is None:
                    raise
                val = fallback(int(i), int(j), phase)
            res[i, j], res[j, i] = val, -val
            adm[i, j] = adm[j, i] = True
    mx = float(np.abs(res).max(initial=0.0))
    return OptimalityReport(res, br.p.copy(), adm, mx, mx < tol, br.average)


def optimality_residual(state: StateVector, partition: Partition, bsm: MeasurementBasis,
                        stationarity_tol: float = 1e-8, *, phase: bool = False) -> OptimalityReport:
    """Slopes ``sbar1`` for all pairs of branches with nonzero probability."""
    _check_basis(partition, bsm)
    psi = system_env_matrix(state, partition)
    br = _Branches(psi, partition.d1, partition.d2, bsm.vectors)
    return _report(br, stationarity_tol, phase, psi, bsm.vectors)


@dataclass(frozen=True)
class FiniteDifferenceCheck:
    sbar1: float
    table: list[tuple[float, float]]

    @property
    def slope(self) -> float:
        pts = [(e, d) for e, d in self.table if e != 0 and d > 0]
        if len(pts) < 2:
            return float("inf")
        xs, ys = np.log([abs(e) for e, _ in pts]), np.log([d for _, d in pts])
        return float(np.polyfit(xs, ys, 1)[0])


def finite_difference_check(state: StateVector, partition: Partition, bsm: MeasurementBasis,
                            pair: tuple[int, int], eps_list=(1e-2, 1e-3, 1e-4), *,
                            phase: bool = False) -> FiniteDifferenceCheck:
    """Defect ``|sbar(eps) - sbar - eps*sbar1|`` of the linear prediction for each ``eps``."""
    psi = system_env_matrix(state, partition)
    d1, d2 = partition.d1, partition.d2
    base = localize_matrix(psi, d1, d2, bsm.vectors).average
    sbar1 = first_order_data(state, partition, bsm, pair, phase=phase).sbar1
    table = []
    for eps in eps_list:
        moved = elementary_transform(MeasurementBasis(bsm.vectors), ETStep(pair[0], pair[1], eps), phase=phase)
        s_eps = localize_matrix(psi, d1, d2, moved.vectors).average
        table.append((float(eps), abs(s_eps - base - eps * sbar1)))
    return FiniteDifferenceCheck(float(sbar1), table)


def classify_stationary(state: StateVector, partition: Partition, bsm: MeasurementBasis,
                        probe: float = 1e-3, noise: float = 1e-13) -> str:
    """Empirical character of a stationary basis from +/- probes on every admissible pair.

    Heuristic only: first-order data cannot tell maxima from saddles.
    """
    psi = system_env_matrix(state, partition)
    d1, d2 = partition.d1, partition.d2
    br = _Branches(psi, d1, d2, bsm.vectors)
    base = br.average
    ups = downs = 0
    act = np.flatnonzero(br.active)
    for a, i in enumerate(act):
        for j in act[a + 1:]:
            for eps in (probe, -probe):
                moved = elementary_transform(MeasurementBasis(bsm.vectors), ETStep(int(i), int(j), eps))
                diff = localize_matrix(psi, d1, d2, moved.vectors).average - base
                ups += diff > noise
                downs += diff < -noise
    if ups and downs:
        return "saddle"
    if downs:
        return "maximum"
    if ups:
        return "minimum"
    return "flat"


@dataclass(frozen=True)
class OptimizerConfig:
    direction: str = "maximize"
    step_init: float = 0.01
    step_shrink: float = 0.5
    stationarity_tol: float = 1e-8
    max_iters: int = 10000
    reorthonormalize_every: int = 10
    # None: phase rotations only when the state or the start basis is complex
    phase_ets: bool | None = None

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ValueError("direction must be 'maximize' or 'minimize'")
        if not 0 < self.step_init <= MAX_EPS:
            raise ValueError("step_init must lie in (0, 0.1]")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.stationarity_tol <= 0 or self.max_iters < 1 or self.reorthonormalize_every < 1:
            raise ValueError("tolerances and counts must be positive")


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    basis: MeasurementBasis
    localization: LocalizationResult
    report: OptimalityReport
    trajectory: list[float]
    iterations: int

    @property
    def stationary(self) -> bool:
        return self.report.stationary

    def __iter__(self):
        return iter((self.basis, self.localization, self.report))


def _reorthonormalize(x: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(x)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _rotate(x: np.ndarray, i: int, j: int, theta: float, phase: bool) -> np.ndarray:
    eps = float(np.clip(np.tan(theta), -MAX_EPS, MAX_EPS))
    return elementary_transform(MeasurementBasis(x), ETStep(i, j, eps), phase=phase).vectors


FD_STEP = 1e-6


def _fd_slope(psi, d1, d2, x, i, j, phase) -> float:
    up = _Branches(psi, d1, d2, _rotate(x, i, j, FD_STEP, phase)).average
    down = _Branches(psi, d1, d2, _rotate(x, i, j, -FD_STEP, phase)).average
    return (up - down) / (2 * FD_STEP)


def _pair_slope(psi, d1, d2, x, i, j, phase) -> float:
    cols = x[:, [i, j]]
    if phase:
        cols = _phased(cols, 1)
    try:
        return _Branches(psi, d1, d2, cols).pair(0, 1).sbar1
    except IllDefinedLimitError:
        # entropy has a log cusp where a branch becomes a product state
        return _fd_slope(psi, d1, d2, x, i, j, phase)


def optimize_bsm(state: StateVector, partition: Partition, start: MeasurementBasis,
                 config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Greedy pairwise ascent (or descent) of the average entropy over bases.

    Each iteration picks the admissible pair with the largest ``|sbar1|``,
    estimates the curvature along that rotation from one probe step and takes
    the Newton angle when the local model is concave (convex when minimizing),
    otherwise the probe step. The step is halved by ``step_shrink`` until the
    realized change does not go against the predicted direction. Real
    rotations alone only reach bases in the orbit of ``start`` under the
    orthogonal group, so complex problems also search the phase rotations.
    """
    _check_basis(partition, start)
    sign = 1.0 if config.direction == "maximize" else -1.0
    psi = system_env_matrix(state, partition)
    d1, d2 = partition.d1, partition.d2
    use_phase = config.phase_ets
    if use_phase is None:
        use_phase = not state.is_real or np.iscomplexobj(start.vectors)
    dtype = np.complex128 if use_phase else np.result_type(start.vectors, float)
    x = start.vectors.astype(dtype, copy=True)
    br = _Branches(psi, d1, d2, x)
    current = br.average
    trajectory = [current]
    accepted = 0
    its = 0
    max_theta = float(np.arctan(MAX_EPS))
    kinds = (False, True) if use_phase else (False,)
    last_theta: dict = {}
    def fallback(i, j, ph):
        return _fd_slope(psi, d1, d2, x, i, j, ph)

    for its in range(1, config.max_iters + 1):
        reports = [_report(br, config.stationarity_tol, ph, psi, x, fallback) for ph in kinds]
        if not reports[0].admissible.any():
            if x.shape[1] >= 2 and br.active.sum() < 2:
                raise StallError("no admissible pair: only one branch has nonzero probability")
            break
        if all(r.stationary for r in reports):
            break
        best = None
        for ph, rep in zip(kinds, reports):
            masked = np.triu(np.where(rep.admissible, np.abs(rep.pair_residuals), -1.0), 1)
            a, b = np.unravel_index(int(np.argmax(masked)), masked.shape)
            if best is None or masked[a, b] > best[0]:
                best = (masked[a, b], int(a), int(b), ph, float(rep.pair_residuals[a, b]))
        _, i, j, phase, g = best
        direction = np.sign(sign * g)
        # probe no wider than recent accepted moves on this pair: the landscape
        # narrows to ~sqrt(p) near branches of small probability
        width = min(config.step_init, 2.0 * last_theta.get((i, j, phase), np.inf))
        probe = direction * min(max(width, 1e-7), max_theta)
        gp = _pair_slope(psi, d1, d2, _rotate(x, i, j, probe, phase), i, j, phase)
        curv = (gp - g) / probe
        theta = probe
        if sign * curv < 0:
            theta = float(np.clip(-g / curv, -max_theta, max_theta))
        for _ in range(60):
            trial = _rotate(x, i, j, theta, phase)
            tb = _Branches(psi, d1, d2, trial)
            if sign * (tb.average - current) >= -1e-13:
                break
            theta *= config.step_shrink
        else:
            log.debug("line search failed on pair (%d, %d)", i, j)
            break
        x, br = trial, tb
        last_theta[(i, j, phase)] = abs(theta)
        accepted += 1
        if accepted % config.reorthonormalize_every == 0:
            x = _reorthonormalize(x)
            br = _Branches(psi, d1, d2, x)
        current = br.average
        trajectory.append(current)
    x = _reorthonormalize(x)
    br = _Branches(psi, d1, d2, x)
    reports = [_report(br, config.stationarity_tol, ph, psi, x, fallback) for ph in kinds]
    rep = max(reports, key=lambda r: r.max_abs_residual)
    loc = localize_matrix(psi, d1, d2, x)
    return OptimizationResult(MeasurementBasis(x, None, loc.probabilities.copy()), loc, rep, trajectory, its)


def haar_bases(rng: np.random.Generator, count: int, dim: int, real: bool) -> np.ndarray:
    """``count`` Haar-random orthonormal bases as an array of shape ``(count, dim, dim)``."""
    g = rng.standard_normal((count, dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((count, dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def random_bsm_oracle(state: StateVector, partition: Partition, n_trials: int = 10_000,
                      seed: int = 0, chunk: int = 2000) -> tuple[float, float]:
    """Largest and smallest average entropy over ``n_trials`` Haar-random bases."""
    if partition.d_e > ORACLE_MAX_ENV_DIM:
        raise SizeError(f"oracle limited to environment dimension {ORACLE_MAX_ENV_DIM}")
    psi = system_env_matrix(state, partition)
    d1, d2, de = partition.d1, partition.d2, partition.d_e
    rng = np.random.default_rng(seed)
    best_max, best_min = -np.inf, np.inf
    done = 0
    while done < n_trials:
        m = min(chunk, n_trials - done)
        bases = haar_bases(rng, m, de, state.is_real)
        w = np.einsum("se,ned->nds", psi, bases.conj())
        p = np.einsum("nds,nds->nd", w.conj(), w).real
        safe = np.where(p > P_TOL, p, 1.0)
        q = (w / np.sqrt(safe)[..., None]).reshape(m, de, d1, d2)
        rho = q @ np.swapaxes(q.conj(), -1, -2) if d1 <= d2 else np.swapaxes(q.conj(), -1, -2) @ q
        ev = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.where(ev > 0, ev * np.log2(ev), 0.0).sum(axis=-1)
        ent = np.where(p > P_TOL, ent, 0.0)
        sbar = (p * ent).sum(axis=1)
        best_max = max(best_max, float(sbar.max()))
        best_min = min(best_min, float(sbar.min()))
        done += m
    return best_max, best_min
