"""Experiment configuration: defaults, key=value files and CLI overrides.

Every setting has one entry in :data:`KEYS`; the same name (with ``-`` for
``_``) is accepted as a CLI flag and as a config-file key. Precedence is
CLI > file > default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

from ..entanglement import SYMMETRIES
from ..lattice.eigensolver import DEFAULT_MAX_ITER, DEFAULT_SEED, DEFAULT_TOL
from ..lattice.model import Boundary, ChainLayout, ModelParams, symmetric_pair


class ConfigError(ValueError):
    """Unusable configuration value or file."""


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _auto_bool(text) -> bool | None:
    if text is None or str(text).strip().lower() == "auto":
        return None
    return parse_bool(text)


def parse_int(text) -> int:
    # accept hex seeds such as 0x5EED
    return int(str(text).strip(), 0)


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [parse_int(v) for v in str(text).replace(",", " ").split()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _name_list(text) -> list[str] | None:
    if text is None or str(text).strip() == "auto":
        return None
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v for v in str(text).replace(",", " ").split() if v and v != "none"]


def _optional_str(text):
    return None if text in (None, "", "none") else str(text)


# name -> (parser, default, help)
KEYS: dict[str, tuple] = {
    "sites": (parse_int, 24, "number of chain sites"),
    "j1": (float, 1.0, "nearest-neighbour coupling"),
    "j2": (float, 0.0, "next-nearest-neighbour coupling (used when j2_values is unset)"),
    "boundary": (str, "open", "open or periodic"),
    "layout": (str, "single", "single or two_decoupled"),
    "two_sz": (parse_int, 0, "twice the total S^z of the sector"),
    "seed": (parse_int, DEFAULT_SEED, "seed for Lanczos start vectors and random demos"),
    "out": (_optional_str, None, "primary CSV output path"),
    "threads": (parse_int, 1, "worker threads"),
    "cache_dir": (_optional_str, None, "ground-state cache directory (default $LECM_CACHE_DIR or ~/.cache/lecm)"),
    "r_values": (_int_list, None, "distances R (default: all odd R < sites)"),
    "even_r": (parse_bool, False, "include even R in the default distance list"),
    "j2_values": (_float_list, None, "list of j2 values to sweep"),
    "symmetry": (_name_list, "auto", "degeneracy resolution order, e.g. env_sz,env_reflection; "
                 "auto uses those that apply to the partition"),
    "plots": (parse_bool, True, "render PNG figures next to CSV outputs"),
    "lanczos_tol": (float, DEFAULT_TOL, "eigenvalue tolerance"),
    "max_lanczos_iter": (parse_int, DEFAULT_MAX_ITER, "matrix-vector product budget"),
    "r1": (parse_int, 7, "first distance of the length estimate"),
    "r2": (parse_int, 11, "second distance of the length estimate"),
    "r": (parse_int, 1, "pair distance for check-optimality and optimize on chains"),
    "demo": (_optional_str, None, "built-in demo state: ghz, w or random"),
    "demo_sites": (parse_int, 4, "qubits of the random demo state"),
    "target": (str, "canonical", "basis to audit: canonical or file"),
    "bsm": (_optional_str, None, ".npy file with basis vectors as columns"),
    "direction": (str, "maximize", "maximize or minimize"),
    "start": (str, "random", "optimizer start basis: canonical, computational or random"),
    "max_iters": (parse_int, 10000, "optimizer iteration budget"),
    "step_init": (float, 0.01, "optimizer probe angle"),
    "stationarity_tol": (float, 1e-8, "stationarity threshold on |sbar1|"),
    "phase_ets": (_auto_bool, None, "true, false or auto (complex-phase rotations for complex states; default auto)"),
    "dense_limit": (parse_int, 1 << 12, "largest environment dimension for optimize"),
}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def merge_settings(file_values: dict | None = None, cli_values: dict | None = None) -> dict:
    """Resolve every key with precedence CLI > file > default, parsing as needed."""
    settings = {}
    for key, (parse, default, _) in KEYS.items():
        raw = default
        for layer in (file_values or {}, cli_values or {}):
            if key in layer and layer[key] is not None:
                raw = layer[key]
        try:
            settings[key] = parse(raw) if raw is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return settings


def default_cache_dir() -> Path:
    env = os.environ.get("LECM_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "lecm"


@dataclass
class ExperimentConfig:
    model: ModelParams
    r_values: list[int]
    j2_values: list[float]
    two_sz: int = 0
    seed: int = DEFAULT_SEED
    output_path: Path | None = None
    # None: every default symmetry that applies to the partition
    symmetry_resolution: list[str] | None = None
    threads: int = 1
    cache_dir: Path | None = None
    plots: bool = True
    lanczos_tol: float = DEFAULT_TOL
    max_lanczos_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        n = self.model.n_sites
        for r in self.r_values:
            if not 1 <= r < n:
                raise ConfigError(f"distance {r} impossible on {n} sites")
        for j2 in self.j2_values:
            if not math.isfinite(j2):
                raise ConfigError("j2 values must be finite")
        for name in self.symmetry_resolution or ():
            if name not in SYMMETRIES:
                raise ConfigError(f"unknown symmetry {name!r}; choose from {sorted(SYMMETRIES)}")
        if abs(self.two_sz) > n or (n - self.two_sz) % 2:
            raise ConfigError(f"two_sz = {self.two_sz} impossible on {n} sites")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def placeable(self, r: int) -> bool:
        try:
            symmetric_pair(self.model.n_sites, r)
        except ValueError:
            return False
        return True

    def params(self, j2: float) -> ModelParams:
        m = self.model
        return ModelParams(m.n_sites, m.j1, j2, m.boundary, m.chain_layout)

    @classmethod
    def from_settings(cls, s: dict) -> "ExperimentConfig":
        n = s["sites"]
        try:
            model = ModelParams(n, s["j1"], s["j2"], Boundary(s["boundary"]), ChainLayout(s["layout"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        r_values = s["r_values"]
        if r_values is None:
            step = 1 if s["even_r"] else 2
            r_values = list(range(1, n, step))
        j2_values = s["j2_values"] if s["j2_values"] is not None else [s["j2"]]
        cache = Path(s["cache_dir"]) if s["cache_dir"] else default_cache_dir()
        return cls(
            model=model, r_values=sorted(set(r_values)), j2_values=sorted(set(j2_values)),
            two_sz=s["two_sz"], seed=s["seed"],
            output_path=Path(s["out"]) if s["out"] else None,
            symmetry_resolution=s["symmetry"], threads=s["threads"], cache_dir=cache,
            plots=s["plots"], lanczos_tol=s["lanczos_tol"], max_lanczos_iter=s["max_lanczos_iter"],
        )
