"""Normalized state vectors over a sector or the full computational basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .basis import BasisSector

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes of a pure state of ``n_sites`` spin-1/2 sites.

    With ``sector=None`` the amplitudes index the full ``2**n_sites`` basis,
    entry ``s`` being the bit pattern ``s``. Otherwise entry ``t`` belongs to
    ``sector.states[t]``.
    """

    amplitudes: np.ndarray = field(repr=False)
    n_sites: int
    sector: BasisSector | None = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.ndim != 1:
            raise DimensionError("amplitudes must be one-dimensional")
        expected = (1 << self.n_sites) if self.sector is None else self.sector.dim
        if self.sector is not None and self.sector.n_sites != self.n_sites:
            raise DimensionError("sector built for a different number of sites")
        if amps.shape[0] != expected:
            raise DimensionError(f"expected {expected} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes, n_sites: int, sector: BasisSector | None = None):
        amps = np.asarray(amplitudes)
        if not np.iscomplexobj(amps):
            amps = amps.astype(np.float64)
        return cls(amps / np.linalg.norm(amps), n_sites, sector)

    @property
    def scalar_kind(self) -> str:
        return "complex" if np.iscomplexobj(self.amplitudes) else "real"

    @property
    def is_real(self) -> bool:
        return self.scalar_kind == "real"

    def basis_states(self) -> np.ndarray:
        if self.sector is None:
            return np.arange(1 << self.n_sites, dtype=np.int64)
        return self.sector.states

    def dense(self) -> np.ndarray:
        """Amplitudes embedded in the full computational basis."""
        if self.sector is None:
            return self.amplitudes
        out = np.zeros(1 << self.n_sites, dtype=self.amplitudes.dtype)
        out[self.sector.states] = self.amplitudes
        return out
