"""``lecm`` command-line interface.

Exit codes: 0 success, 2 bad input, 3 eigensolver failure, 4 optimizer did
not reach a stationary basis.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numba
import numpy as np

from ..errors import ConvergenceError, LecmError, StallError
from ..stationarity import OptimizerConfig, optimality_residual, optimize_bsm
from . import experiments as ex
from .config import KEYS, ConfigError, ExperimentConfig, merge_settings, parse_bool, read_config_file
from .output import records_to_csv, sidecar, write_csv, write_gnuplot, write_log

log = logging.getLogger("lecm")

EXIT_OK, EXIT_INPUT, EXIT_EIGEN, EXIT_OPTIMIZER = 0, 2, 3, 4

RESIDUAL_FIELDS = ("i", "j", "p_i", "p_j", "sbar1")


class OptimizerFailure(Exception):
    pass


def _out(config: ExperimentConfig, default: str) -> Path:
    return config.output_path or Path(default)


def _figures(config: ExperimentConfig, render, *args) -> None:
    if not config.plots:
        return
    # figures are a convenience; never fail a run over them
    try:
        render(*args)
    except Exception as exc:  # noqa: BLE001
        log.warning("figure not written: %s", exc)


# --------------------------------------------------------------------------- commands

def cmd_ground_state(config: ExperimentConfig, settings: dict) -> int:
    states = ex.GroundStates(config)
    rows = []
    for j2 in config.j2_values:
        gs = states.get(j2)
        print(f"n={config.model.n_sites} j2={j2:g} boundary={config.model.boundary.value} "
              f"energy={gs.energy:.12g}")
        m = config.params(j2)
        rows.append((m.n_sites, m.j1, m.j2, m.boundary.value, m.chain_layout.value, config.two_sz,
                     config.seed, gs.energy, gs.residual_norm))
    if config.output_path:
        write_csv(config.output_path, ("n", "j1", "j2", "boundary", "layout", "two_sz", "seed",
                                       "energy", "residual_norm"), rows)
    return EXIT_OK


def _write_sweep(config: ExperimentConfig, rows, warnings, default: str) -> Path:
    from .plotting import sweep_figure

    out = _out(config, default)
    records_to_csv(out, rows, ex.SweepRow.FIELDS)
    write_log(sidecar(out, ".log"), warnings)
    write_gnuplot(out, x="R", y="sbar", title="LECM vs distance", group="j2",
                  groups=sorted({r.j2 for r in rows}), reference=ex.RESIDUAL_VALUE)
    _figures(config, sweep_figure, rows, sidecar(out, ".png"))
    return out


def cmd_lecm_sweep(config: ExperimentConfig, settings: dict) -> int:
    rows, warnings = ex.lecm_sweep(config)
    out = _write_sweep(config, rows, warnings, "lecm_sweep.csv")
    for r in rows:
        print(f"j2={r.j2:g} R={r.R} sbar={r.sbar:.12g} delta_sbar={r.delta_sbar:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_decoupled_baseline(config: ExperimentConfig, settings: dict) -> int:
    rows, warnings = ex.decoupled_baseline(config)
    out = _write_sweep(config, rows, warnings, "decoupled_baseline.csv")
    if rows:
        vals = np.array([r.sbar for r in rows])
        print(f"residual value: mean sbar = {vals.mean():.12g}, "
              f"max |sbar - {ex.RESIDUAL_VALUE}| = {np.abs(vals - ex.RESIDUAL_VALUE).max():.3e}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_entanglement_length(config: ExperimentConfig, settings: dict) -> int:
    from .plotting import length_figure

    estimates = ex.entanglement_length(config, settings["r1"], settings["r2"])
    out = _out(config, "entanglement_length.csv")
    records_to_csv(out, estimates, ex.LengthEstimate.FIELDS)
    write_gnuplot(out, x="j2", y="xi", title="entanglement length")
    _figures(config, length_figure, estimates, sidecar(out, ".png"))
    for e in estimates:
        print(f"j2={e.j2:g} xi={'undefined' if not e.defined else format(e.xi, '.12g')}")
    print(f"wrote {out}")
    return EXIT_OK


def _target(config: ExperimentConfig, settings: dict) -> ex.Target:
    if settings["demo"]:
        return ex.demo_target(settings["demo"], config.seed, settings["demo_sites"])
    return ex.chain_target(config, settings["r"])


def _print_report(report) -> None:
    print(f"max_abs_residual={report.max_abs_residual:.6e} stationary={str(report.stationary).lower()}")
    for i, j, pi, pj, s1 in report.rows():
        print(f"  pair ({i}, {j}) p_i={pi:.6g} p_j={pj:.6g} sbar1={s1:.6e}")


def cmd_check_optimality(config: ExperimentConfig, settings: dict) -> int:
    target = _target(config, settings)
    kind = settings["target"]
    if kind == "canonical":
        bsm = ex.canonical_basis(target, config.symmetry_resolution)
    elif kind == "file":
        if not settings["bsm"]:
            raise ConfigError("target=file needs --bsm PATH")
        bsm = ex.load_bsm(settings["bsm"], target.partition)
    else:
        raise ConfigError(f"unknown target {kind!r}; choose canonical or file")
    report = optimality_residual(target.state, target.partition, bsm, settings["stationarity_tol"],
                                 phase=_phase(settings, target))
    out = _out(config, "check_optimality.csv")
    write_csv(out, RESIDUAL_FIELDS, report.rows())
    print(f"target {target.label}, basis {kind}, sbar={report.average:.12g}")
    _print_report(report)
    print(f"wrote {out}")
    return EXIT_OK


def _phase(settings: dict, target) -> bool:
    flag = settings["phase_ets"]
    return (not target.state.is_real) if flag is None else flag


def cmd_optimize(config: ExperimentConfig, settings: dict) -> int:
    from .plotting import trajectory_figure

    target = _target(config, settings)
    limit = settings["dense_limit"]
    if target.partition.d_e > limit:
        raise ConfigError(f"environment dimension {target.partition.d_e} exceeds dense_limit {limit}")
    rng = np.random.default_rng(config.seed)
    start = ex.start_basis(settings["start"], target, rng, config.symmetry_resolution)
    opt = OptimizerConfig(direction=settings["direction"], step_init=settings["step_init"],
                          stationarity_tol=settings["stationarity_tol"], max_iters=settings["max_iters"],
                          phase_ets=_phase(settings, target))
    result = optimize_bsm(target.state, target.partition, start, opt)
    out = _out(config, "optimize.csv")
    np.save(sidecar(out, "_bsm.npy"), result.basis.vectors)
    traj = sidecar(out, "_trajectory.csv")
    write_csv(traj, ("step", "sbar"), enumerate(map(float, result.trajectory)))
    write_gnuplot(traj, x="step", y="sbar", title="optimizer trajectory")
    _figures(config, trajectory_figure, result.trajectory, sidecar(out, "_trajectory.png"))
    write_csv(sidecar(out, "_residuals.csv"), RESIDUAL_FIELDS, result.report.rows())
    write_csv(out, ("target", "direction", "start", "iterations", "sbar", "max_abs_residual", "stationary"),
              [(target.label, opt.direction, settings["start"], result.iterations,
                float(result.localization.average), result.report.max_abs_residual, result.stationary)])
    print(f"target {target.label}, {opt.direction} from {settings['start']} start: "
          f"sbar={result.localization.average:.12g} after {result.iterations} iterations")
    _print_report(result.report)
    print(f"wrote {out}")
    if not result.stationary:
        raise OptimizerFailure(f"no stationary basis after {opt.max_iters} iterations "
                               f"(max |sbar1| = {result.report.max_abs_residual:.3e}); partial outputs written")
    return EXIT_OK


COMMANDS = {
    "ground-state": (cmd_ground_state, "Lanczos ground state and energy, cached on disk"),
    "lecm-sweep": (cmd_lecm_sweep, "LECM of mirror-symmetric pairs over j2 and R"),
    "entanglement-length": (cmd_entanglement_length, "two-point entanglement length per j2"),
    "check-optimality": (cmd_check_optimality, "first-order stationarity audit of a basis"),
    "optimize": (cmd_optimize, "optimize the measurement basis by pairwise rotations"),
    "decoupled-baseline": (cmd_decoupled_baseline, "LECM across two decoupled half chains"),
}


# --------------------------------------------------------------------------- parsing

def _add_settings(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=argparse.SUPPRESS, metavar="PATH",
                        help="key = value file; CLI flags override it")
    for key, (parse, default, text) in KEYS.items():
        flag = "--" + key.replace("_", "-")
        if default is not None:
            text = f"{text} (default {default})"
        if parse is parse_bool:
            parser.add_argument(flag, dest=key, nargs="?", const="true", default=argparse.SUPPRESS,
                                metavar="BOOL", help=text)
        else:
            parser.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    _add_settings(common)
    parser = argparse.ArgumentParser(prog="lecm", parents=[common], allow_abbrev=False,
                                     description="Localizable entanglement in j1-j2 spin chains.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (func, text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=text, allow_abbrev=False)
        sp.set_defaults(func=func)
    return parser


def resolve(ns: argparse.Namespace) -> tuple[ExperimentConfig, dict]:
    cli = {k: v for k, v in vars(ns).items() if k in KEYS}
    file_values = read_config_file(ns.config) if getattr(ns, "config", None) else {}
    settings = merge_settings(file_values, cli)
    return ExperimentConfig.from_settings(settings), settings


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        config, settings = resolve(ns)
        numba.set_num_threads(max(1, min(config.threads, numba.config.NUMBA_NUM_THREADS)))
        return ns.func(config, settings)
    except ConvergenceError as exc:
        log.error("eigensolver failure: %s", exc)
        return EXIT_EIGEN
    except (OptimizerFailure, StallError) as exc:
        log.error("optimizer: %s", exc)
        return EXIT_OPTIMIZER
    except (ConfigError, LecmError, ValueError) as exc:
        log.error("bad input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
