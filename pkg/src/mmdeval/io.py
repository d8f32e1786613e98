"""Feature matrix files.

Binary layout (all little-endian)::

    b"FMAT" | u32 version = 1 | u64 rows | u64 cols | rows*cols float64, row-major

CSV files are headerless, comma-separated, one sample per row.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import (
    FeatureFileError,
    InputError,
    MagicMismatchError,
    NonFiniteError,
    RaggedCSVError,
    TruncatedFileError,
)

__all__ = ["MAGIC", "load_features", "save_features", "detect_format"]

MAGIC = b"FMAT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def detect_format(path, fmt=None):
    if fmt:
        if fmt not in ("binary", "csv"):
            raise InputError(f"unknown feature format {fmt!r}")
        return fmt
    return "csv" if Path(path).suffix.lower() in (".csv", ".txt") else "binary"


def _check_finite(X, path):
    if not np.all(np.isfinite(X)):
        raise NonFiniteError(f"{path}: contains NaN or Inf")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise FeatureFileError(f"{path}: empty matrix")
    return X


def _read_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        if not MAGIC.startswith(raw[:4]):
            raise MagicMismatchError(f"{path}: not a feature file")
        raise TruncatedFileError(f"{path}: header is {len(raw)} bytes, need {_HEADER.size}")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFileError(f"{path}: unsupported version {version}")
    need = rows * cols * 8
    payload = raw[_HEADER.size :]
    if len(payload) < need:
        raise TruncatedFileError(f"{path}: payload has {len(payload)} bytes, need {need}")
    if len(payload) > need:
        raise FeatureFileError(f"{path}: {len(payload) - need} trailing bytes")
    X = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    return _check_finite(X, path)


def _read_csv(path):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise RaggedCSVError(f"{path}:{lineno}: {len(fields)} fields, expected {width}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise FeatureFileError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FeatureFileError(f"{path}: no data rows")
    return _check_finite(np.array(rows, dtype=np.float64), path)


def load_features(path, fmt=None):
    """Read and validate a feature matrix from ``path``."""
    if not Path(path).is_file():
        raise FeatureFileError(f"{path}: no such file")
    if detect_format(path, fmt) == "csv":
        return _read_csv(path)
    return _read_binary(path)


def save_features(path, X, fmt=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if detect_format(path, fmt) == "csv":
        with open(path, "w") as fh:
            for row in X:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, X.shape[0], X.shape[1]))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())
