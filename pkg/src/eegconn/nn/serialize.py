"""Versioned binary model files.

Layout: 8 magic bytes, u32 major format version, u32 header length, a
deterministic JSON header (entry roles, layer descriptor tables, parameter
manifest), the parameter payload as 64-bit little-endian reals in manifest
order, and a sha256 trailer over everything before it.  Readers accept any
minor revision within the same major version.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ChecksumError, ValidationError
from .layers import LAYER_KINDS
from .network import MultiBranchNetwork, Network

MAGIC = b"ECNNBNDL"
FORMAT_MAJOR = 1
FORMAT_MINOR = 0


def _build_layers(descs: list[dict]):
    layers = []
    for d in descs:
        cfg = dict(d)
        kind = cfg.pop("kind")
        if kind not in LAYER_KINDS:
            raise ValidationError(f"unknown layer kind {kind!r} in model file")
        layers.append(LAYER_KINDS[kind](**cfg))
    return layers


def _entry_descriptor(obj) -> dict:
    if isinstance(obj, (Network, MultiBranchNetwork)):
        return obj.descriptor()
    if isinstance(obj, dict):
        return {"type": "arrays"}
    raise ValidationError(f"cannot serialize entry of type {type(obj).__name__}")


def _entry_params(obj) -> dict[str, np.ndarray]:
    if isinstance(obj, (Network, MultiBranchNetwork)):
        return obj.param_dict()
    return {k: np.asarray(v, dtype=float) for k, v in obj.items()}


def _rebuild(desc: dict):
    if desc["type"] == "network":
        net = Network(
            _build_layers(desc["layers"]),
            input_shape=tuple(desc["input_shape"]),
            seed=desc["seed"],
            name=desc["name"],
        )
        net.initialize()  # wires dropout streams; weights are overwritten below
        return net
    if desc["type"] == "multibranch":
        net = MultiBranchNetwork(
            [_build_layers(b) for b in desc["branches"]],
            _build_layers(desc["trunk"]),
            input_shapes=[tuple(s) for s in desc["input_shapes"]],
            seed=desc["seed"],
            name=desc["name"],
        )
        net.initialize()
        return net
    if desc["type"] == "arrays":
        return {}
    raise ValidationError(f"unknown entry type {desc['type']!r} in model file")


def save_bundle(path: str | Path, entries: dict[str, object], meta: dict | None = None) -> None:
    """Write named networks / parameter groups into one model file."""
    roles = sorted(entries)
    manifest = []
    blobs = []
    for role in roles:
        params = _entry_params(entries[role])
        for key in sorted(params):
            arr = np.ascontiguousarray(params[key], dtype="<f8")
            manifest.append({"entry": role, "key": key, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = {
        "format_major": FORMAT_MAJOR,
        "format_minor": FORMAT_MINOR,
        "meta": meta or {},
        "entries": [{"role": r, "descriptor": _entry_descriptor(entries[r])} for r in roles],
        "params": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<II", FORMAT_MAJOR, len(header_bytes)) + header_bytes
    body += b"".join(blobs)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)


def load_bundle(path: str | Path) -> tuple[dict[str, object], dict]:
    """Read a model file back into {role: Network | MultiBranchNetwork | dict}."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 + 32:
        raise ChecksumError(f"{path}: truncated model file")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    if body[: len(MAGIC)] != MAGIC:
        raise ValidationError(f"{path}: not a model file (bad magic)")
    major, header_len = struct.unpack_from("<II", body, len(MAGIC))
    if major != FORMAT_MAJOR:
        raise ValidationError(
            f"{path}: format major version {major} unsupported (expected {FORMAT_MAJOR})"
        )
    off = len(MAGIC) + 8
    header = json.loads(body[off : off + header_len].decode())
    off += header_len

    entries: dict[str, object] = {}
    states: dict[str, dict[str, np.ndarray]] = {}
    for item in header["entries"]:
        entries[item["role"]] = _rebuild(item["descriptor"])
        states[item["role"]] = {}
    for rec in header["params"]:
        shape = tuple(rec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape)
        off += count * 8
        states[rec["entry"]][rec["key"]] = arr.astype(float)
    if off != len(body):
        raise ChecksumError(f"{path}: {len(body) - off} trailing payload bytes")

    for role, obj in entries.items():
        if isinstance(obj, (Network, MultiBranchNetwork)):
            obj.set_state(states[role])
        else:
            entries[role] = states[role]
    return entries, header["meta"]
