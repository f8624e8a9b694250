"""Binary checkpoint format for named float64 tensors.

Layout: the magic string "MOTIFDP1", then one record per tensor, sorted by
name: name length (u32 LE), name bytes (utf-8), rank (u8), each dim (u32 LE),
then the row-major little-endian float64 payload. Round trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MOTIFDP1"


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name in sorted(arrays):
            a = np.asarray(arrays[name], dtype="<f8")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", a.ndim))
            for d in a.shape:
                fh.write(struct.pack("<I", d))
            fh.write(a.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    out: dict[str, np.ndarray] = {}
    pos = len(MAGIC)
    n = len(blob)
    while pos < n:
        if pos + 4 > n:
            raise CheckpointError(f"{path}: truncated record header")
        (name_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos: pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        dims = []
        for _ in range(rank):
            (d,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims.append(d)
        count = int(np.prod(dims)) if dims else 1
        end = pos + 8 * count
        if end > n:
            raise CheckpointError(f"{path}: truncated payload for '{name}'")
        arr = np.frombuffer(blob[pos:end], dtype="<f8").astype(np.float64)
        out[name] = arr.reshape(dims)
        pos = end
    return out
