"""
Flat binary snapshot format for network parameters.

Layout:
    8 bytes   magic b"DEXPCKPT"
    4 bytes   little-endian uint32 format version
    4 bytes   little-endian uint32 header length in bytes
    N bytes   UTF-8 JSON header {"kind", "arrays": [{"name", "shape"}], "meta"}
    rest      every array as little-endian float64, in header order
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.core.errors import ValidationError


logger = logging.getLogger(__name__)

MAGIC = b"DEXPCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


@dataclass
class Checkpoint:
    """Named float64 arrays plus a JSON-serializable metadata block"""

    kind: str
    arrays: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        header = {
            "kind": self.kind,
            "arrays": [{"name": name, "shape": list(np.shape(a))} for name, a in self.arrays.items()],
            "meta": self.meta,
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in self.arrays.values())
        return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes + payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if len(blob) < _PREFIX.size:
            raise ValidationError("checkpoint is truncated")
        magic, version, header_len = _PREFIX.unpack_from(blob, 0)
        if magic != MAGIC:
            raise ValidationError("not a checkpoint file (bad magic)")
        if version != FORMAT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version}")
        start = _PREFIX.size
        try:
            header = json.loads(blob[start:start + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"corrupt checkpoint header: {exc}") from exc

        offset = start + header_len
        arrays: dict[str, np.ndarray] = {}
        for entry in header.get("arrays", []):
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = offset + 8 * count
            if end > len(blob):
                raise ValidationError(f"checkpoint payload too short for array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
            offset = end
        if offset != len(blob):
            raise ValidationError("checkpoint has trailing bytes")
        return cls(kind=header["kind"], arrays=arrays, meta=header.get("meta", {}))


def save_checkpoint(path: Path | str, checkpoint: Checkpoint) -> Path:
    """
    Write a checkpoint file, creating parent folders.

    Args:
        path: Destination file
        checkpoint: Snapshot to write

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint.to_bytes())
    logger.info("Wrote checkpoint %s (%d arrays)", path, len(checkpoint.arrays))
    return path


def load_checkpoint(path: Path | str) -> Checkpoint:
    """Read a checkpoint file; raises ValidationError on malformed input"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    return Checkpoint.from_bytes(blob)
