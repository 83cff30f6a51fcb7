"""Experiment drivers behind the CLI subcommands.

These functions do the numerical work and return plain records; writing
files and choosing exit codes is left to :mod:`lecm.lab.cli`.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from ..entanglement import (
    DensityMatrix,
    MeasurementBasis,
    NotSymmetryAdaptedError,
    Partition,
    lecm,
    reduced_density_matrix,
    two_site_lecm_spin_half,
)
from ..lattice.basis import enumerate_sector
from ..lattice.eigensolver import GroundStateResult, decoupled_ground_state, ground_state
from ..lattice.model import ChainLayout, ModelParams, symmetric_pair
from ..lattice.state import StateVector
from .cache import CachedState, CacheKey, StateCache
from .config import ExperimentConfig

log = logging.getLogger(__name__)

RESIDUAL_VALUE = 0.5


@dataclass(frozen=True)
class SweepRow:
    j2: float
    R: int
    sbar: float
    lambda_s: float
    lambda_t: float
    delta_sbar: float

    FIELDS = ("j2", "R", "sbar", "lambda_s", "lambda_t", "delta_sbar")

    @classmethod
    def from_weights(cls, j2: float, r: int, ls: float, lt: float) -> "SweepRow":
        sbar = ls + lt
        return cls(float(j2), int(r), sbar, ls, lt, sbar - RESIDUAL_VALUE)


@dataclass(frozen=True)
class LengthEstimate:
    j2: float
    r1: int
    r2: int
    delta1: float
    delta2: float
    xi: float

    FIELDS = ("j2", "r1", "r2", "delta1", "delta2", "xi")

    @property
    def defined(self) -> bool:
        return not math.isnan(self.xi)


def length_estimate(j2: float, r1: int, r2: int, delta1: float, delta2: float) -> LengthEstimate:
    """Two-point decay length ``xi = (r2 - r1) / (ln delta1 - ln delta2)``.

    ``xi`` is nan unless both deltas are positive and distinct.
    """
    xi = math.nan
    if delta1 > 0 and delta2 > 0 and delta1 != delta2:
        xi = (r2 - r1) / (math.log(delta1) - math.log(delta2))
    return LengthEstimate(float(j2), int(r1), int(r2), float(delta1), float(delta2), xi)


class GroundStates:
    """Ground states for one configuration, shared by every command through a disk cache."""

    def __init__(self, config: ExperimentConfig, use_cache: bool = True):
        self.config = config
        self.cache = StateCache(config.cache_dir) if use_cache and config.cache_dir else None
        self._sector = None
        self.cache_hits = 0

    @property
    def sector(self):
        if self._sector is None:
            self._sector = enumerate_sector(self.config.model.n_sites, self.config.two_sz)
        return self._sector

    def _solve(self, params: ModelParams) -> GroundStateResult:
        c = self.config
        product = (params.chain_layout is ChainLayout.TWO_DECOUPLED
                   and (params.n_sites // 2) % 2 == 0 and c.two_sz == 0)
        if product:
            return decoupled_ground_state(params, self.sector, seed=c.seed, tol=c.lanczos_tol)
        return ground_state(params, self.sector, seed=c.seed, tol=c.lanczos_tol,
                            max_iter=c.max_lanczos_iter)

    def get(self, j2: float) -> GroundStateResult:
        c = self.config
        params = c.params(j2)
        key = CacheKey.for_model(params, c.two_sz, c.seed)
        if self.cache is not None:
            hit = self.cache.load(key)
            if hit is not None and hit.amplitudes.shape[0] == self.sector.dim:
                self.cache_hits += 1
                vec = StateVector(hit.amplitudes, params.n_sites, self.sector)
                return GroundStateResult(hit.energy, vec, hit.iterations, hit.residual_norm)
        gs = self._solve(params)
        if self.cache is not None:
            self.cache.store(CachedState(key, gs.energy, gs.iterations, gs.residual_norm,
                                         gs.vector.amplitudes))
        return gs

    def many(self, j2_values) -> dict[float, GroundStateResult]:
        """Ground states for distinct ``j2`` values, computed concurrently."""
        workers = max(1, min(self.config.threads, len(j2_values)))
        share = max(1, numba.get_num_threads() // workers)
        _ = self.sector

        def task(j2):
            numba.set_num_threads(share)
            return j2, self.get(j2)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(task, j2_values))


def pair_weights(state: StateVector, a: int, b: int, symmetry: list[str] | None) -> tuple[float, float]:
    """Singlet and ``m = 0`` triplet weights of the LECM for sites ``a``, ``b``.

    Uses the symmetry-adapted two-site formula, falling back to the general
    LECM construction when the pair RDM is not symmetry adapted.
    """
    rho = reduced_density_matrix(state, [a, b])
    try:
        ls, lt, _ = two_site_lecm_spin_half(rho)
    except NotSymmetryAdaptedError:
        log.warning("pair (%d, %d) RDM not symmetry adapted; using the general LECM", a, b)
        res = lecm(state, Partition.from_system(state.n_sites, [a], [b]), symmetry)
        if res.singlet_weight is None:
            raise
        ls, lt = res.singlet_weight, res.triplet_weight
    return ls, lt


def lecm_sweep(config: ExperimentConfig, states: GroundStates | None = None
               ) -> tuple[list[SweepRow], list[str]]:
    """LECM of mirror-symmetric pairs for every ``(j2, R)``; returns rows and warnings."""
    states = states or GroundStates(config)
    warnings = []
    distances = []
    for r in config.r_values:
        if config.placeable(r):
            distances.append(r)
        else:
            msg = f"skipped R={r}: no mirror-symmetric pair on {config.model.n_sites} sites"
            warnings.append(msg)
            log.warning(msg)
    gs = states.many(config.j2_values)
    grid = [(j2, r) for j2 in config.j2_values for r in distances]

    def point(item):
        j2, r = item
        a, b = symmetric_pair(config.model.n_sites, r)
        ls, lt = pair_weights(gs[j2].vector, a, b, config.symmetry_resolution)
        return SweepRow.from_weights(j2, r, ls, lt)

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        rows = list(pool.map(point, grid))
    rows.sort(key=lambda row: (row.j2, row.R))
    return rows, warnings


def entanglement_length(config: ExperimentConfig, r1: int = 7, r2: int = 11,
                        states: GroundStates | None = None) -> list[LengthEstimate]:
    for r in (r1, r2):
        if not config.placeable(r):
            raise ValueError(f"no mirror-symmetric pair at distance {r} on {config.model.n_sites} sites")
    sub = ExperimentConfig(**{**config.__dict__, "r_values": sorted({r1, r2})})
    rows, _ = lecm_sweep(sub, states)
    delta = {(row.j2, row.R): row.delta_sbar for row in rows}
    return [length_estimate(j2, r1, r2, delta[(j2, r1)], delta[(j2, r2)]) for j2 in config.j2_values]


def decoupled_baseline(config: ExperimentConfig, states: GroundStates | None = None
                       ) -> tuple[list[SweepRow], list[str]]:
    """Sweep on two decoupled half chains; every mirror pair straddles the two halves."""
    m = config.model
    model = ModelParams(m.n_sites, m.j1, m.j2, m.boundary, ChainLayout.TWO_DECOUPLED)
    sub = ExperimentConfig(**{**config.__dict__, "model": model})
    return lecm_sweep(sub, states if states is not None and states.config.model == model else None)


# --------------------------------------------------------------------------- single-state audits

DEMO_STATES = ("ghz", "w", "random")


@dataclass(frozen=True)
class Target:
    """A state together with the partition that the audit commands act on."""

    state: StateVector
    partition: Partition
    label: str


def demo_target(name: str, seed: int, n_random: int = 4) -> Target:
    from .. import states as demo

    if name == "ghz":
        st = demo.ghz(3)
    elif name == "w":
        st = demo.w_state(3)
    elif name == "random":
        st = demo.random_state(n_random, np.random.default_rng(seed))
    else:
        raise ValueError(f"unknown demo {name!r}; choose from {DEMO_STATES}")
    return Target(st, Partition.from_system(st.n_sites, [0], [1]), f"demo:{name}")


def chain_target(config: ExperimentConfig, r: int, states: GroundStates | None = None) -> Target:
    states = states or GroundStates(config)
    gs = states.get(config.j2_values[0])
    a, b = symmetric_pair(config.model.n_sites, r)
    return Target(gs.vector, Partition.from_system(config.model.n_sites, [a], [b]), f"chain:R={r}")


def canonical_basis(target: Target, symmetry: list[str] | None) -> MeasurementBasis:
    return lecm(target.state, target.partition, symmetry).basis


def load_bsm(path, partition: Partition, tol: float = 1e-10) -> MeasurementBasis:
    """Basis vectors stored as the columns of a 2-D ``.npy`` array; orthonormality is checked."""
    try:
        arr = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read basis file {path}: {exc}") from exc
    if arr.ndim != 2 or arr.shape[0] != partition.d_e or not 1 <= arr.shape[1] <= partition.d_e:
        raise ValueError(f"basis array of shape {arr.shape} does not fit environment dimension {partition.d_e}")
    if not np.issubdtype(arr.dtype, np.number) or not np.isfinite(arr).all():
        raise ValueError("basis array must be finite numbers")
    bsm = MeasurementBasis(arr.astype(np.result_type(arr.dtype, np.float64)))
    err = bsm.gram_error()
    if err > tol:
        raise ValueError(f"basis vectors not orthonormal (Gram error {err:.3e})")
    return bsm


def start_basis(kind: str, target: Target, rng: np.random.Generator, symmetry: list[str] | None) -> MeasurementBasis:
    from ..stationarity import haar_bases

    de = target.partition.d_e
    if kind == "canonical":
        return canonical_basis(target, symmetry)
    if kind == "computational":
        return MeasurementBasis.computational(de)
    if kind == "random":
        return MeasurementBasis(haar_bases(rng, 1, de, target.state.is_real)[0])
    raise ValueError(f"unknown start basis {kind!r}")
