"""Binary cache of ground states.

File layout: ``MAGIC`` (8 bytes), version byte, little-endian uint32 header
length, UTF-8 JSON header, then the raw little-endian amplitudes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..lattice.model import ModelParams

log = logging.getLogger(__name__)

MAGIC = b"LECMGS\x00\x01"
VERSION = 1


class CacheFormatError(ValueError):
    """File is not a readable state cache."""


@dataclass(frozen=True)
class CacheKey:
    n_sites: int
    j1: float
    j2: float
    boundary: str
    layout: str
    two_sz: int
    seed: int

    @classmethod
    def for_model(cls, params: ModelParams, two_sz: int, seed: int) -> "CacheKey":
        return cls(params.n_sites, float(params.j1), float(params.j2), params.boundary.value,
                   params.chain_layout.value, int(two_sz), int(seed))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def filename(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        tag = hashlib.sha256(blob).hexdigest()[:16]
        return f"gs_n{self.n_sites}_j2_{self.j2:g}_{self.layout}_{tag}.bin"


@dataclass(frozen=True)
class CachedState:
    key: CacheKey
    energy: float
    iterations: int
    residual_norm: float
    amplitudes: np.ndarray


def write_state(path, entry: CachedState) -> None:
    amps = np.ascontiguousarray(entry.amplitudes)
    dtype = "<c16" if np.iscomplexobj(amps) else "<f8"
    header = json.dumps({
        "key": entry.key.as_dict(), "energy": entry.energy, "iterations": entry.iterations,
        "residual_norm": entry.residual_norm, "dtype": dtype, "dim": int(amps.shape[0]),
    }, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(amps.astype(dtype, copy=False).tobytes())
    os.replace(tmp, path)


def read_state(path) -> CachedState:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CacheFormatError(f"{path}: bad magic header")
        version = fh.read(1)
        if not version or version[0] != VERSION:
            raise CacheFormatError(f"{path}: unsupported cache version")
        (size,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(size).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CacheFormatError(f"{path}: corrupt header") from exc
        amps = np.frombuffer(fh.read(), dtype=header["dtype"])
    if amps.shape[0] != header["dim"]:
        raise CacheFormatError(f"{path}: truncated amplitudes")
    return CachedState(CacheKey(**header["key"]), float(header["energy"]), int(header["iterations"]),
                       float(header["residual_norm"]), amps.astype(amps.dtype.newbyteorder("=")))


class StateCache:
    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, key: CacheKey) -> Path:
        return self.directory / key.filename()

    def load(self, key: CacheKey) -> CachedState | None:
        path = self.path(key)
        if not path.exists():
            log.info("cache miss: %s", path)
            return None
        try:
            entry = read_state(path)
        except (CacheFormatError, OSError, KeyError) as exc:
            log.warning("ignoring unreadable cache file %s (%s)", path, exc)
            return None
        if entry.key != key:
            log.warning("cache key mismatch in %s; recomputing", path)
            return None
        log.info("cache hit: %s", path)
        return entry

    def store(self, entry: CachedState) -> Path:
        path = self.path(entry.key)
        write_state(path, entry)
        log.info("cached ground state: %s", path)
        return path
