"""CSV and gnuplot script writers.

Floats are written with 12 significant digits so that files are
byte-identical across runs with the same configuration.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def records_to_csv(path, records, fields) -> Path:
    return write_csv(path, fields, ([getattr(r, f) for f in fields] for r in records))


def sidecar(path, suffix: str) -> Path:
    """``out.csv`` -> ``out<suffix>`` (suffix may contain a stem extension like ``_bsm.npy``)."""
    path = Path(path)
    return path.with_name(path.stem + suffix)


def write_log(path, lines) -> Path | None:
    lines = list(lines)
    if not lines:
        return None
    path = Path(path)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def _gp_string(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def gnuplot_script(csv_path, *, x: str, y: str, title: str, group: str | None = None,
                   groups=(), xlabel: str | None = None, ylabel: str | None = None,
                   reference: float | None = None) -> str:
    """Gnuplot commands that plot column ``y`` against ``x`` of a header-row CSV.

    With ``group`` set, one curve is drawn per value in ``groups``.
    """
    name = Path(csv_path).name
    lines = [
        f"# plots {name}; run with: gnuplot {Path(csv_path).stem}.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set terminal pngcairo size 800,560",
        f"set output {_gp_string(Path(csv_path).stem + '_gnuplot.png')}",
        f"set title {_gp_string(title)}",
        f"set xlabel {_gp_string(xlabel or x)}",
        f"set ylabel {_gp_string(ylabel or y)}",
        "set grid",
    ]
    if reference is not None:
        lines.append(f"set arrow from graph 0, first {reference:g} to graph 1, first {reference:g} nohead dt 2")
    col = f"(column({_gp_string(x)}))"
    val = f"(column({_gp_string(y)}))"
    if group and groups:
        parts = []
        for g in groups:
            sel = f'(abs(column({_gp_string(group)}) - {g!r}) < 1e-12 ? {val} : 1/0)'
            parts.append(f"{_gp_string(name)} using {col}:{sel} with linespoints title {_gp_string(f'{group} = {g:g}')}")
        lines.append("plot " + ", \\\n     ".join(parts))
    else:
        lines.append(f"plot {_gp_string(name)} using {col}:{val} with linespoints notitle")
    return "\n".join(lines) + "\n"


def write_gnuplot(csv_path, **kwargs) -> Path:
    path = sidecar(csv_path, ".gp")
    path.write_text(gnuplot_script(csv_path, **kwargs), encoding="utf-8")
    return path
