"""Model parameters and bond lists for the j1-j2 Heisenberg chain."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class ChainLayout(str, Enum):
    SINGLE = "single"
    TWO_DECOUPLED = "two_decoupled"


@dataclass(frozen=True)
class ModelParams:
    """Couplings and geometry of ``H = j1 sum S_i.S_{i+1} + j2 sum S_i.S_{i+2}``."""

    n_sites: int
    j1: float = 1.0
    j2: float = 0.0
    boundary: Boundary = Boundary.OPEN
    chain_layout: ChainLayout = ChainLayout.SINGLE

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "chain_layout", ChainLayout(self.chain_layout))
        if self.n_sites < 2:
            raise ValueError("n_sites must be >= 2")
        if self.chain_layout is ChainLayout.TWO_DECOUPLED and self.n_sites % 2:
            raise ValueError("two_decoupled layout needs an even number of sites")

    def chains(self) -> list[list[int]]:
        if self.chain_layout is ChainLayout.SINGLE:
            return [list(range(self.n_sites))]
        half = self.n_sites // 2
        return [list(range(half)), list(range(half, self.n_sites))]

    def bonds(self) -> list[tuple[int, int, int]]:
        """``(site_a, site_b, coupling_class)`` triples; class 0 is j1, class 1 is j2.

        Periodic wrap-around bonds are listed literally, so short rings may
        repeat a pair; a bond that wraps onto its own site is dropped.
        """
        out = []
        periodic = self.boundary is Boundary.PERIODIC
        for chain in self.chains():
            m = len(chain)
            for cls, dist in ((0, 1), (1, 2)):
                for a in range(m):
                    b = a + dist
                    if b >= m:
                        if not periodic:
                            continue
                        b %= m
                    if a != b:
                        out.append((chain[a], chain[b], cls))
        return out

    def couplings(self) -> tuple[float, float]:
        return (float(self.j1), float(self.j2))


def symmetric_pair(n_sites: int, distance: int) -> tuple[int, int]:
    """Sites ``(a, a + distance)`` placed as mirror images about the chain center.

    The mirror map is ``i -> n_sites - 1 - i``, so ``n_sites - 1 - distance`` must
    be even (odd distances on even chains).
    """
    if distance < 1 or distance >= n_sites:
        raise ValueError(f"distance {distance} impossible on {n_sites} sites")
    if (n_sites - 1 - distance) % 2:
        raise ValueError(f"no mirror-symmetric pair at distance {distance} on {n_sites} sites")
    a = (n_sites - 1 - distance) // 2
    return a, a + distance
