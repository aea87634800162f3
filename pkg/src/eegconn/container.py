"""Binary feature containers written by extraction and read by training.

Layout mirrors the model files: 8 magic bytes, u32 major version, u32
header length, deterministic JSON header (feature kind, shape, band spec,
subject id, label), payload of 64-bit little-endian reals in row-major
order, sha256 trailer.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ChecksumError, ValidationError
from .spectral import BandSpec

MAGIC = b"ECNNFEAT"
FORMAT_MAJOR = 1
FORMAT_MINOR = 0

FEATURE_KINDS = ("VAR", "PDC", "CN")


def write_container(
    path: str | Path,
    kind: str,
    values: np.ndarray,
    subject_id: str,
    label: str | None = None,
    bands: BandSpec | None = None,
) -> None:
    if kind not in FEATURE_KINDS:
        raise ValidationError(f"feature kind must be one of {FEATURE_KINDS}, got {kind!r}")
    arr = np.ascontiguousarray(values, dtype="<f8")
    header = {
        "format_major": FORMAT_MAJOR,
        "format_minor": FORMAT_MINOR,
        "kind": kind,
        "shape": list(arr.shape),
        "subject_id": subject_id,
        "label": label,
        "bands": [list(b) for b in bands.bands] if bands is not None else None,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<II", FORMAT_MAJOR, len(header_bytes)) + header_bytes
    body += arr.tobytes()
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def read_container(path: str | Path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 + 32:
        raise ChecksumError(f"{path}: truncated feature container")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    if body[: len(MAGIC)] != MAGIC:
        raise ValidationError(f"{path}: not a feature container (bad magic)")
    major, header_len = struct.unpack_from("<II", body, len(MAGIC))
    if major != FORMAT_MAJOR:
        raise ValidationError(f"{path}: unsupported container major version {major}")
    off = len(MAGIC) + 8
    header = json.loads(body[off : off + header_len].decode())
    off += header_len
    shape = tuple(header["shape"])
    count = int(np.prod(shape)) if shape else 1
    if len(body) - off != count * 8:
        raise ChecksumError(
            f"{path}: payload holds {(len(body) - off) // 8} values, header declares {count}"
        )
    values = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape)
    return values.astype(float), header
