"""Model checkpoint file: config, every parameter, gates and temperature.

Layout (little-endian):

    b"VCHK" | u8 version | u32 meta_len | meta JSON | float32 payload | u32 crc32

The metadata JSON carries the head config and the ordered parameter
name/shape list; the payload is the concatenation of all parameters as
float32 in that order. The CRC covers every preceding byte. Bytes are a
pure function of config and parameter values, so identical training runs
produce identical files.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from vctext.errors import (
    ChecksumError,
    MagicMismatchError,
    ShapeError,
    TruncationError,
    VersionError,
)
from vctext.head.config import HeadConfig
from vctext.numerics.tensor import Tensor

MAGIC = b"VCHK"
VERSION = 1


def save_checkpoint(path: str | Path, config: HeadConfig,
                    params: dict[str, Tensor]) -> None:
    meta = {
        "config": config.to_dict(),
        "params": [{"name": name, "shape": list(t.data.shape)}
                   for name, t in params.items()],
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(t.data.astype("<f4").tobytes() for t in params.values())
    body = MAGIC + struct.pack("<B", VERSION) + struct.pack("<I", len(meta_bytes)) \
        + meta_bytes + payload
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path: str | Path) -> tuple[HeadConfig, dict[str, Tensor]]:
    blob = Path(path).read_bytes()
    if len(blob) < 9:
        raise TruncationError(f"{path}: file too short for a header")
    if blob[:4] != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {blob[:4]!r}")
    version = blob[4]
    if version != VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", blob, 5)
    meta_end = 9 + meta_len
    if len(blob) < meta_end + 4:
        raise TruncationError(f"{path}: metadata truncated")
    meta = json.loads(blob[9:meta_end].decode("utf-8"))
    config = HeadConfig.from_dict(meta["config"])

    counts = [int(np.prod(spec["shape"])) if spec["shape"] else 1
              for spec in meta["params"]]
    payload_len = 4 * sum(counts)
    if len(blob) != meta_end + payload_len + 4:
        raise TruncationError(f"{path}: payload length mismatch")
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != crc_stored:
        raise ChecksumError(f"{path}: CRC32 mismatch")

    params: dict[str, Tensor] = {}
    offset = meta_end
    for spec, count in zip(meta["params"], counts):
        raw = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        values = raw.astype(np.float64).reshape(tuple(spec["shape"]))
        params[spec["name"]] = Tensor(values, requires_grad=True)
    return config, params


def checkpoint_equal(a: str | Path, b: str | Path) -> bool:
    return Path(a).read_bytes() == Path(b).read_bytes()


def validate_against_config(params: dict[str, Tensor], config: HeadConfig) -> None:
    from vctext.head.params import param_shapes

    expected = param_shapes(config)
    got = {name: t.data.shape for name, t in params.items()}
    if {k: tuple(v) for k, v in got.items()} != expected:
        raise ShapeError("parameter names/shapes do not match the config")
