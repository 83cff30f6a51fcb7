"""Fixed-magnetization bit bases for spin-1/2 chains.

Bit convention (stable): in a basis state ``s``, bit ``b`` describes site ``b``;
a set bit is spin up. Within a sector all states share the same popcount and
are stored in increasing integer order, which for fixed popcount coincides with
colexicographic order of the set-bit positions. That makes the ordinal of a
state computable in O(n_sites) from the combinatorial number system, without a
hash table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numba
import numpy as np

from ..errors import DimensionError, InvalidSectorError

_CHUNK = 1 << 22


def _binomial_table(n: int) -> np.ndarray:
    table = np.zeros((n + 1, n + 2), dtype=np.int64)
    for b in range(n + 1):
        for k in range(n + 2):
            table[b, k] = comb(b, k)
    return table


@numba.njit(cache=True)
def _rank_many(states, n_sites, table):
    out = np.empty(states.shape[0], dtype=np.int64)
    for t in range(states.shape[0]):
        s = states[t]
        r = 0
        seen = 0
        for b in range(n_sites):
            if (s >> b) & 1:
                seen += 1
                r += table[b, seen]
        out[t] = r
    return out


def popcount(x: np.ndarray) -> np.ndarray:
    """Vectorized popcount for non-negative int64 arrays."""
    x = x.astype(np.uint64, copy=True)
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((x * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class BasisSector:
    """All bit patterns of ``n_sites`` spins with total ``S_z = two_sz / 2``."""

    n_sites: int
    two_sz: int
    states: np.ndarray = field(repr=False)
    _table: np.ndarray = field(repr=False, compare=False)

    @property
    def n_up(self) -> int:
        return (self.n_sites + self.two_sz) // 2

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    def __len__(self) -> int:
        return self.dim

    def index_of(self, patterns) -> np.ndarray | int:
        """Ordinal(s) of bit pattern(s); raises if a pattern is outside the sector."""
        scalar = np.isscalar(patterns)
        arr = np.atleast_1d(np.asarray(patterns, dtype=np.int64))
        counts = popcount(arr)
        if np.any(counts != self.n_up) or np.any(arr >> self.n_sites):
            raise DimensionError("bit pattern outside the sector")
        idx = _rank_many(arr, self.n_sites, self._table)
        return int(idx[0]) if scalar else idx


def enumerate_sector(n_sites: int, two_sz: int) -> BasisSector:
    """Enumerate the magnetization sector ``two_sz`` of an ``n_sites`` chain."""
    if n_sites < 1 or n_sites > 40:
        raise InvalidSectorError(f"n_sites={n_sites} out of supported range")
    if abs(two_sz) > n_sites or (n_sites + two_sz) % 2:
        raise InvalidSectorError(f"no sector two_sz={two_sz} for {n_sites} sites")
    n_up = (n_sites + two_sz) // 2
    total = 1 << n_sites
    parts = []
    for start in range(0, total, _CHUNK):
        block = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        parts.append(block[popcount(block) == n_up])
    states = np.concatenate(parts)
    assert states.shape[0] == comb(n_sites, n_up)
    return BasisSector(n_sites, two_sz, states, _binomial_table(n_sites))


def site_bits(states: np.ndarray, sites) -> np.ndarray:
    """Pack the bits of ``sites`` into a sub-index, first listed site most significant."""
    out = np.zeros(states.shape[0], dtype=np.int64)
    for site in sites:
        out = (out << 1) | ((states >> site) & 1)
    return out
