"""Matrix Market coordinate files and convergence-history output.

Only ``matrix coordinate real|integer general|symmetric`` is read.
Test matrices such as ORSIRR_1 are available from
https://math.nist.gov/MatrixMarket/ and must be downloaded by the user.
"""

from dataclasses import dataclass
import io
import json
import math
import os

import numpy as np

from .errors import ParseError, UnsupportedFormatError
from .linalg import SparseMatrix

__all__ = [
    "MatrixMarketHeader",
    "read_matrix_market",
    "write_matrix_market",
    "write_history_csv",
    "read_history_csv",
    "write_summary_json",
    "CSV_HEADER",
]

CSV_HEADER = "iter,saddle_resnorm,forward_resnorm,adjoint_resnorm,amplitude"

_FIELDS = ("real", "integer", "pattern", "complex")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric", "hermitian")


@dataclass(frozen=True)
class MatrixMarketHeader:
    object: str
    format: str
    field: str
    symmetry: str


def _parse_header(line, lineno):
    parts = line.split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket":
        raise ParseError("expected '%%MatrixMarket object format field symmetry'", lineno)
    obj, fmt, fld, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise UnsupportedFormatError(f"unsupported object {obj!r}")
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown format {fmt!r}", lineno)
    if fld not in _FIELDS:
        raise ParseError(f"unknown field {fld!r}", lineno)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unknown symmetry {sym!r}", lineno)
    if fmt != "coordinate":
        raise UnsupportedFormatError("only coordinate format is supported")
    if fld not in ("real", "integer"):
        raise UnsupportedFormatError(f"field {fld!r} is not supported")
    if sym not in ("general", "symmetric"):
        raise UnsupportedFormatError(f"symmetry {sym!r} is not supported")
    return MatrixMarketHeader(obj, fmt, fld, sym)


def _lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = bytes(source)
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return data.splitlines()


def read_matrix_market(source):
    """Read a coordinate Matrix Market matrix.

    Parameters
    ----------
    source : path, binary/text stream or bytes

    Returns
    -------
    SparseMatrix
        Symmetric files are expanded to full storage; duplicate entries
        are summed; integer values become floats.

    Raises
    ------
    ParseError
        Malformed header, size line or entry, or an index out of range.
        The message carries the 1-based line number.
    UnsupportedFormatError
        Array, pattern or complex files, or skew/Hermitian symmetry.
    """
    lines = _lines(source)
    if not lines:
        raise ParseError("empty input", 1)
    header = _parse_header(lines[0], 1)
    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx == len(lines):
        raise ParseError("missing size line", idx + 1)
    size = lines[idx].split()
    try:
        nrows, ncols, nnz = (int(t) for t in size)
    except ValueError:
        raise ParseError("size line must be 'nrows ncols nnz'", idx + 1) from None
    if nrows < 0 or ncols < 0 or nnz < 0:
        raise ParseError("negative size", idx + 1)
    if header.symmetry == "symmetric" and nrows != ncols:
        raise ParseError("symmetric matrix must be square", idx + 1)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    k = 0
    for lineno in range(idx + 2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        if k == nnz:
            raise ParseError(f"more than {nnz} entries", lineno)
        toks = text.split()
        if len(toks) != 3:
            raise ParseError("entry must be 'i j value'", lineno)
        try:
            i, j = int(toks[0]), int(toks[1])
            v = float(toks[2])
        except ValueError:
            raise ParseError(f"cannot parse entry {text!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) out of range", lineno)
        if header.symmetry == "symmetric" and j > i:
            raise ParseError("symmetric file stores an upper-triangle entry", lineno)
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise ParseError(f"expected {nnz} entries, found {k}", len(lines))
    if header.symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return SparseMatrix.from_coo(rows, cols, vals, (nrows, ncols))


def write_matrix_market(A, sink, symmetric=False):
    """Write `A` in coordinate real format with round-trip precision.

    With ``symmetric=True`` only the lower triangle is written; the caller
    is responsible for `A` being symmetric.
    """
    S = A.to_scipy().tocoo()
    r, c, v = S.row, S.col, S.data
    if symmetric:
        keep = r >= c
        r, c, v = r[keep], c[keep], v[keep]
    order = np.lexsort((r, c))
    out = [f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}",
           f"{A.nrows} {A.ncols} {len(v)}"]
    out += [f"{r[t] + 1} {c[t] + 1} {float(v[t])!r}" for t in order]
    _emit(sink, "\n".join(out) + "\n")


def _emit(sink, text):
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("ascii"))


def _fmt(x):
    return "nan" if math.isnan(x) else f"{x:.16e}"


def write_history_csv(history, sink):
    """Write one CSV row per recorded iteration.

    Columns are those of `CSV_HEADER`; numbers use 17 significant digits
    so parsing recovers every double exactly.  Lines end in LF.

    Raises
    ------
    ValueError
        If the history is empty.
    OSError
        If the sink cannot be written.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    lines = [CSV_HEADER]
    for i, res, fwd, adj, amp in history.rows():
        lines.append(",".join([str(i), _fmt(res), _fmt(fwd), _fmt(adj), _fmt(amp)]))
    _emit(sink, "\n".join(lines) + "\n")


def read_history_csv(source):
    """Parse a history CSV back into an ``(m, 5)`` float array."""
    lines = _lines(source)
    if not lines or lines[0] != CSV_HEADER:
        raise ParseError("unexpected CSV header", 1)
    return np.array([[float(t) for t in ln.split(",")] for ln in lines[1:] if ln], dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary_json(summary, sink):
    """Write a run summary as one JSON object with sorted keys.

    Non-finite floats become ``null`` so the output is strict JSON.
    """
    _emit(sink, json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n")
