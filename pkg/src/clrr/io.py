"""Matrix, label and report files.

Binary matrices (``.clrrmat``) are laid out as::

    b"CLRRMAT1"            8 bytes
    rows                   little-endian uint64
    cols                   little-endian uint64
    rows * cols float64    little-endian, column-major

CSV matrices hold one row per line, comma separated, with decimal-point
reals.  Label files hold one integer class id per line.  Every writer goes
through a temporary file in the target directory followed by a rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .solver import SolveReport, SolverConfig, SolverState

MAGIC = b"CLRRMAT1"
_HEADER = struct.Struct("<8sQQ")


class MatrixFormatError(ValueError):
    """Base class for unreadable matrix files."""


class DimensionMismatchError(MatrixFormatError):
    pass


class NonNumericTokenError(MatrixFormatError):
    pass


class TruncatedPayloadError(MatrixFormatError):
    pass


class BadMagicError(MatrixFormatError):
    pass


class ReportValidationError(ValueError):
    pass


def atomic_write(path, data):
    """Write `data` (bytes or str) to `path` via temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- matrices ---------------------------------------------------------------------


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "bin"):
            raise ValueError(f"unknown matrix format {fmt!r}")
        return fmt
    return "csv" if Path(path).suffix.lower() in (".csv", ".txt") else "bin"


def matrix_to_bytes(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("only 2-D matrices can be serialised")
    body = np.asfortranarray(m).astype("<f8", copy=False).tobytes(order="F")
    return _HEADER.pack(MAGIC, m.shape[0], m.shape[1]) + body


def matrix_from_bytes(buf, source="<bytes>"):
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError(f"{source}: {len(buf)} bytes is shorter than the header")
    magic, rows, cols = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r}")
    need = rows * cols * 8
    have = len(buf) - _HEADER.size
    if have < need:
        raise TruncatedPayloadError(
            f"{source}: payload has {have} bytes, {rows}x{cols} needs {need}"
        )
    if have > need:
        raise DimensionMismatchError(
            f"{source}: {have - need} trailing bytes after {rows}x{cols} payload"
        )
    flat = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    return flat.reshape((rows, cols), order="F").astype(np.float64)


def _parse_csv(text, source):
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise DimensionMismatchError(
                f"{source}:{lineno}: {len(tokens)} fields, expected {width}"
            )
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise NonNumericTokenError(f"{source}:{lineno}: non-numeric token {bad!r}") from None
    if not rows:
        raise DimensionMismatchError(f"{source}: no data rows")
    m = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise NonNumericTokenError(f"{source}: NaN or Inf entries are not allowed")
    return m


def _is_float(t):
    try:
        float(t)
    except ValueError:
        return False
    return True


def load_matrix(path, fmt=None):
    """Read a matrix in CSV or ``CLRRMAT1`` binary form.

    The format is taken from `fmt` or else from the extension (``.csv`` and
    ``.txt`` are CSV, everything else binary).
    """
    path = Path(path)
    if _infer_format(path, fmt) == "csv":
        return _parse_csv(path.read_text(encoding="utf-8"), str(path))
    m = matrix_from_bytes(path.read_bytes(), str(path))
    if not np.all(np.isfinite(m)):
        raise MatrixFormatError(f"{path}: NaN or Inf entries are not allowed")
    return m


def save_matrix(m, path, fmt=None):
    m = np.asarray(m, dtype=np.float64)
    if _infer_format(path, fmt) == "csv":
        lines = [",".join(repr(float(v)) for v in row) for row in m]
        atomic_write(path, "\n".join(lines) + "\n")
    else:
        atomic_write(path, matrix_to_bytes(m))


# -- labels ---------------------------------------------------------------------------


def load_labels(path):
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise NonNumericTokenError(f"{path}:{lineno}: not an integer label {line!r}") from None
    return np.array(out, dtype=np.int64)


def save_labels(labels, path):
    atomic_write(path, "".join(f"{int(v)}\n" for v in labels))


# -- solve reports ------------------------------------------------------------------


def _state_summary(state):
    return {
        "iter": state.iter,
        "mu": state.mu,
        "shapes": {
            "z": list(state.z.shape),
            "e": list(state.e.shape),
            "p": list(state.p.shape),
        },
    }


def report_to_dict(report, extra=None):
    if report.iterations < 1 or len(report.residual_history) == 0:
        raise ReportValidationError("report has an empty iteration history")
    if len(report.residual_history) != len(report.objective_history):
        raise ReportValidationError("residual and objective histories differ in length")
    doc = {
        "config": report.config.to_dict(),
        "iterations": report.iterations,
        "converged": report.converged,
        "residual_history": np.asarray(report.residual_history).tolist(),
        "objective_history": np.asarray(report.objective_history).tolist(),
        "final_state": _state_summary(report.final_state),
    }
    if extra:
        doc.update(extra)
    return doc


def convergence_csv(report):
    lines = ["iteration,residual1,residual2,residual3,objective"]
    for i, (res, obj) in enumerate(zip(report.residual_history, report.objective_history), 1):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in (*res, obj)]))
    return "\n".join(lines) + "\n"


def save_report(report, path, extra=None, csv_path=None):
    """Write the JSON report at `path` and the convergence CSV.

    The CSV goes to `csv_path`, or beside the JSON with a ``.csv`` suffix.
    Returns the CSV path.
    """
    path = Path(path)
    doc = report_to_dict(report, extra)
    csv_path = path.with_suffix(".csv") if csv_path is None else Path(csv_path)
    try:
        atomic_write(path, json.dumps(doc, indent=2) + "\n")
        atomic_write(csv_path, convergence_csv(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return csv_path


def load_report(path):
    """Rebuild a :class:`SolveReport` from its JSON document.

    Only the summary of the final state is stored, so the returned
    ``final_state`` carries ``iter`` and ``mu`` with empty matrices.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    st = doc["final_state"]
    empty = np.zeros((0, 0))
    state = SolverState(empty, empty, empty, empty, empty, empty, empty, st["mu"], st["iter"])
    return SolveReport(
        iterations=doc["iterations"],
        converged=doc["converged"],
        residual_history=np.array(doc["residual_history"], dtype=np.float64).reshape(-1, 3),
        objective_history=np.array(doc["objective_history"], dtype=np.float64),
        final_state=state,
        config=SolverConfig.from_dict(doc["config"]),
    )
