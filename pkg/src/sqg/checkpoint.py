"""Binary checkpoint files.

Layout (little-endian)::

    magic    4 bytes  b"SQGF"
    version  u32      1
    n        u32
    length   f64
    gamma    f64
    time     f64
    coeffs   n * (n/2 + 1) complex values, interleaved f64 (re, im),
             row-major half spectrum (rows: k1 in FFT order, columns: k2 >= 0),
             normalised as in :mod:`sqg.spectral`.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .spectral import GridSpec, SpectralField

MAGIC = b"SQGF"
VERSION = 1
_HEADER = struct.Struct("<4sIIddd")


@dataclass(frozen=True)
class CheckpointHeader:
    n: int
    length: float
    gamma: float
    time: float
    version: int = VERSION


def encode(field: SpectralField, gamma: float, time: float) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, VERSION, g.n, float(g.length), float(gamma), float(time))
    body = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    return head + body


def decode(data: bytes, dealias_fraction=2.0 / 3.0):
    if len(data) < _HEADER.size:
        raise CheckpointError("file too short for a checkpoint header")
    magic, version, n, length, gamma, time = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if n == 0 or n % 2:
        raise CheckpointError(f"invalid resolution n={n}")
    count = n * (n // 2 + 1)
    expected = _HEADER.size + 16 * count
    if len(data) != expected:
        raise CheckpointError(f"checkpoint has {len(data)} bytes, expected {expected}")
    coeffs = np.frombuffer(data, dtype="<c16", count=count, offset=_HEADER.size).reshape(n, n // 2 + 1)
    grid = GridSpec(int(n), float(length), dealias_fraction)
    header = CheckpointHeader(int(n), float(length), float(gamma), float(time), int(version))
    return header, SpectralField(grid, coeffs.astype(np.complex128))


def write_checkpoint(path, field, gamma, time):
    """Write ``field`` to ``path``; returns the bytes written."""
    data = encode(field, gamma, time)
    Path(path).write_bytes(data)
    return data


def read_checkpoint(path, dealias_fraction=2.0 / 3.0):
    return decode(Path(path).read_bytes(), dealias_fraction)


def diff_checkpoints(path_a, path_b):
    """Max mode-wise ``|c_a - c_b|`` between two checkpoints on the same grid."""
    ha, fa = read_checkpoint(path_a)
    hb, fb = read_checkpoint(path_b)
    if ha.n != hb.n or ha.length != hb.length:
        raise CheckpointError(
            f"incompatible checkpoints: n={ha.n}/{hb.n}, length={ha.length}/{hb.length}"
        )
    return float(np.max(np.abs(fa.coeffs - fb.coeffs)))


def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob form: ``sha1(b"blob <len>\\0" + data)``."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
