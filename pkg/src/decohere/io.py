"""Flat-file formats: delimited tables and density-matrix dumps.

All floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .bath import UnitsContext
from .evolution import ReducedDensityMatrix, SGrid
from .oracle import OracleResult

MATRIX_MAGIC = "# decohere density-matrix v1"
ORACLE_MAGIC = "# decohere oracle-result v1"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def emit_table(data: Mapping[str, Sequence], path, comments: Iterable[str] = ()) -> Path:
    """Write equal-length labeled columns as comma-separated text with a header row.

    ``comments`` become leading ``# `` lines (used for provenance).
    """
    names = list(data)
    cols = [list(np.asarray(data[k]).tolist()) if np.ndim(data[k]) else [data[k]] for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(names))
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_table(path) -> dict:
    """Inverse of :func:`emit_table`; comment lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    names = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln]
    arr = np.array(rows).reshape(len(rows), len(names))
    return {k: arr[:, i] for i, k in enumerate(names)}


def _matrix_lines(a: np.ndarray) -> list[str]:
    out = []
    for row in a:
        out.append(",".join(f"{fmt(z.real)},{fmt(z.imag)}" for z in row))
    return out


def _parse_matrix(lines: list[str], n: int) -> np.ndarray:
    a = np.empty((n, n), dtype=complex)
    for i in range(n):
        vals = [float(v) for v in lines[i].split(",")]
        if len(vals) != 2 * n:
            raise ValueError(f"row {i} has {len(vals)} values, expected {2 * n}")
        a[i] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return a


def write_density_matrix(rho: ReducedDensityMatrix, path, units: UnitsContext = UnitsContext()) -> Path:
    g = rho.grid
    lines = [MATRIX_MAGIC, "n,s_min,ds,hbar", ",".join(fmt(v) for v in (g.n, g.s_min, g.ds, units.hbar))]
    lines += _matrix_lines(rho.elements)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_density_matrix(path) -> tuple[ReducedDensityMatrix, UnitsContext]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != MATRIX_MAGIC:
        raise ValueError(f"{path}: not a density-matrix file")
    n, s_min, ds, hbar = lines[2].split(",")
    grid = SGrid(float(s_min), float(ds), int(n))
    return ReducedDensityMatrix(grid, _parse_matrix(lines[3:], grid.n)), UnitsContext(float(hbar))


def write_oracle_result(result: OracleResult, path, units: UnitsContext = UnitsContext(),
                        extra_meta: Optional[dict] = None) -> Path:
    """Density-matrix series with a one-line JSON metadata block."""
    g = result.rho_series[0].grid
    meta = dict(result.metadata)
    if result.convergence is not None:
        meta["convergence"] = result.convergence
    meta.update(extra_meta or {})
    lines = [ORACLE_MAGIC, "meta=" + json.dumps(meta, sort_keys=True, default=float),
             "n,s_min,ds,hbar,n_times",
             ",".join(fmt(v) for v in (g.n, g.s_min, g.ds, units.hbar, len(result.times)))]
    for t, rho in zip(result.times, result.rho_series):
        lines.append(f"t,{fmt(t)}")
        lines += _matrix_lines(rho.elements)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_oracle_result(path) -> OracleResult:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != ORACLE_MAGIC:
        raise ValueError(f"{path}: not an oracle-result file")
    meta = json.loads(lines[1][len("meta="):])
    n, s_min, ds, _hbar, n_times = lines[3].split(",")
    grid = SGrid(float(s_min), float(ds), int(n))
    times, series = [], []
    pos = 4
    for _ in range(int(n_times)):
        times.append(float(lines[pos].split(",")[1]))
        series.append(ReducedDensityMatrix(grid, _parse_matrix(lines[pos + 1:pos + 1 + grid.n], grid.n)))
        pos += 1 + grid.n
    return OracleResult(np.array(times), series, convergence=meta.get("convergence"), metadata=meta)
