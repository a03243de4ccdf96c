"""Checkpoint container.

Single-file binary layout:

    magic (8 bytes) | format_version u32 | header_len u64 | header JSON | payload

The header describes every named array (dtype, shape, byte offset/length
into the payload), carries the config snapshot, training step/stage, and a
sha256 of the payload. Loading verifies structure and checksum before any
state is handed out, so a truncated or corrupted file never yields partial
state. Arrays round-trip bit-exactly.
"""

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import IntegrityError, UnsupportedVersionError

MAGIC = b"BFIELD\r\n"
FORMAT_VERSION = 1

_DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
    "int64": np.int64,
    "int32": np.int32,
    "uint8": np.uint8,
    "bool": np.bool_,
}


def _to_numpy(tensor: torch.Tensor) -> np.ndarray:
    array = tensor.detach().cpu().numpy()
    if array.dtype.name not in _DTYPES:
        raise IntegrityError(f"unsupported array dtype {array.dtype.name}")
    return np.ascontiguousarray(array)


def save_checkpoint(path: str | Path, arrays: dict[str, torch.Tensor],
                    step: int, stage: int, config: dict,
                    extra: dict | None = None) -> None:
    """Write the container atomically (tmp file + rename)."""
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        array = _to_numpy(arrays[name])
        data = array.tobytes()
        entries.append({
            "name": name,
            "dtype": array.dtype.name,
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(data),
        })
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = {
        "step": int(step),
        "stage": int(stage),
        "config": config,
        "extra": extra or {},
        "arrays": entries,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    blob = (MAGIC + struct.pack("<I", FORMAT_VERSION)
            + struct.pack("<Q", len(header_bytes)) + header_bytes + payload)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


class Checkpoint:
    def __init__(self, step: int, stage: int, config: dict,
                 arrays: dict[str, torch.Tensor], extra: dict):
        self.step = step
        self.stage = stage
        self.config = config
        self.arrays = arrays
        self.extra = extra

    def subset(self, prefix: str) -> dict[str, torch.Tensor]:
        """Arrays under a dotted prefix, with the prefix stripped."""
        cut = len(prefix) + 1
        return {name[cut:]: value for name, value in self.arrays.items()
                if name.startswith(prefix + ".")}


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: format_version {version} is not supported (expected {FORMAT_VERSION})")
    (header_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if pos + header_len > len(data):
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos:pos + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: corrupt header ({exc})") from exc
    pos += header_len
    payload = data[pos:]
    expected = sum(entry["nbytes"] for entry in header["arrays"])
    if len(payload) != expected:
        raise IntegrityError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected})")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise IntegrityError(f"{path}: payload checksum mismatch")

    arrays = {}
    for entry in header["arrays"]:
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        array = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        arrays[entry["name"]] = torch.from_numpy(array.copy())
    return Checkpoint(step=header["step"], stage=header["stage"],
                      config=header["config"], arrays=arrays,
                      extra=header.get("extra", {}))
