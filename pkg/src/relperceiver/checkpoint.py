"""Single-file checkpoint container.

Layout (all integers little-endian)::

    b"RGPCKPT\\0"            magic
    u32 format_version
    u32 header_len, header   UTF-8 JSON: config text, epoch, history, extras
    u32 n_blobs
    per blob: u16 name_len, name (UTF-8), u8 ndim, ndim x u64 dims,
              prod(dims) x float64 (little-endian)
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"RGPCKPT\0"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, blobs, header):
    """``blobs`` maps name -> array; ``header`` is JSON-serializable."""
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(head)))
        fh.write(head)
        fh.write(struct.pack("<I", len(blobs)))
        for name in sorted(blobs):
            arr = np.asarray(blobs[name], dtype="<f8")
            key = name.encode("utf-8")
            fh.write(struct.pack("<HB", len(key), arr.ndim))
            fh.write(key)
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path):
    """Return ``(blobs, header)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    pos = 16
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    blobs = {}
    for _ in range(n):
        klen, ndim = struct.unpack_from("<HB", data, pos)
        pos += 3
        name = data[pos:pos + klen].decode("utf-8")
        pos += klen
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        count = int(np.prod(shape)) if ndim else 1
        blobs[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * count
    return blobs, header
