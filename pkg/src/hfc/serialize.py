"""JSON encodings and the canonical serializer used for reports."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def matrix_to_json(A) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in A]


def matrix_from_json(rows) -> np.ndarray:
    A = np.array(rows, dtype=float)
    if A.ndim != 3 or A.shape[-1] != 2:
        raise ValueError("matrix must be rows of [re, im] pairs")
    return A[..., 0] + 1j * A[..., 1]


def vector_to_json(x) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(x, dtype=complex).reshape(-1)]


def vector_from_json(items) -> np.ndarray:
    A = np.array(items, dtype=float)
    if A.ndim == 1:
        return A.astype(complex)
    return A[:, 0] + 1j * A[:, 1]


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, out: list) -> None:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        _encode([float(obj.real), float(obj.imag)], out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=True))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.append("[")
        for i, item in enumerate(items):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def digest(obj) -> str:
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()
