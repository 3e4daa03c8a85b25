"""Text formats: trace/summary CSV, dataset CSV with metadata sidecar, key-value config."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

from ..optimizers import RunTrace, TraceRecord
from .data import DataSet

TRACE_COLUMNS = ("k", "step_norm", "param_error", "cov_diag_mean", "cov_offdiag_mean", "inner_iters")
SUMMARY_COLUMNS = (
    "algorithm",
    "iterations",
    "completed",
    "diverged_at",
    "final_step_norm",
    "final_param_error",
    "final_cov_diag_mean",
    "final_cov_offdiag_mean",
    "total_inner_iters",
)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_rows(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise OSError(f"cannot read {path}: {err}") from err
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def emit_csv(trace: RunTrace, path: str | Path) -> None:
    """Write one row per iteration; inapplicable fields are left empty."""
    _write_rows(
        Path(path),
        TRACE_COLUMNS,
        ([getattr(rec, col) for col in TRACE_COLUMNS] for rec in trace.records),
    )


def read_trace_csv(path: str | Path, algorithm: str = "") -> RunTrace:
    """Inverse of :func:`emit_csv` for the exported columns."""
    header, rows = _read_rows(Path(path))
    if tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"{path}: unexpected trace header {header}")
    records = []
    for row in rows:
        values = dict(zip(header, row))
        rec = TraceRecord(k=int(values["k"]))
        for col in TRACE_COLUMNS[1:]:
            if values[col] != "":
                setattr(rec, col, int(values[col]) if col == "inner_iters" else float(values[col]))
        records.append(rec)
    return RunTrace(algorithm, TraceRecord(k=0), records)


def trace_table(trace: RunTrace) -> list[tuple]:
    return [tuple(getattr(rec, col) for col in TRACE_COLUMNS) for rec in trace.records]


def summary_row(trace: RunTrace, iterations: int) -> list:
    last = trace.records[-1] if trace.records else trace.initial
    inner = [r.inner_iters for r in trace.records if r.inner_iters is not None]
    return [
        trace.algorithm,
        iterations,
        len(trace.records),
        trace.diverged_at,
        last.step_norm,
        last.param_error,
        last.cov_diag_mean,
        last.cov_offdiag_mean,
        sum(inner) if inner else None,
    ]


def write_summary(rows: Iterable[list], path: str | Path) -> None:
    _write_rows(Path(path), SUMMARY_COLUMNS, rows)


# -- key-value text -----------------------------------------------------------


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Dashes in keys become underscores."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def read_key_values(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise OSError(f"cannot read {path}: {err}") from err
    return parse_key_values(text, str(path))


def write_key_values(values: Mapping[str, object], path: str | Path) -> None:
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            value = ",".join(fmt(v) for v in value)
        elif not isinstance(value, str):
            value = fmt(value)
        lines.append(f"{key} = {value}\n")
    try:
        Path(path).write_text("".join(lines))
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


# -- datasets -----------------------------------------------------------------


def metadata_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_dataset(ds: DataSet, path: str | Path) -> None:
    """CSV ``y,x1,...,xm`` plus a ``.meta`` sidecar with model, d, lambda, seed and theta*."""
    path = Path(path)
    header = ["y"] + [f"x{j + 1}" for j in range(ds.X.shape[1])]
    _write_rows(path, header, ([yk, *xk] for yk, xk in zip(ds.y, ds.X)))
    meta: dict[str, object] = {"model": ds.model, "d": ds.d, "n": len(ds), "lambda": ds.lam}
    if ds.seed is not None:
        meta["seed"] = ds.seed
    if ds.theta_star is not None:
        meta["theta_star"] = ds.theta_star
    write_key_values(meta, metadata_path(path))


def read_dataset(path: str | Path) -> DataSet:
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "y":
        raise ValueError(f"{path}: dataset header must start with 'y'")
    table = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    table = table.reshape(len(rows), len(header))
    meta = read_key_values(metadata_path(path))
    theta_star = None
    if meta.get("theta_star"):
        theta_star = np.array([float(v) for v in meta["theta_star"].split(",")])
    ds = DataSet(
        table[:, 1:],
        table[:, 0],
        theta_star,
        meta.get("model", "linear"),
        float(meta["lambda"]),
        int(meta["seed"]) if "seed" in meta else None,
    )
    if "d" in meta and int(meta["d"]) != ds.d:
        raise ValueError(f"{path}: metadata says d={meta['d']} but columns imply d={ds.d}")
    return ds
