"""Flat binary container for named float64 arrays.

Layout, all little-endian:

    magic   4 bytes  b"CATG"
    version u32      currently 1
    record* until EOF:
        name_len  u64
        name      UTF-8 bytes
        rank      u64
        dims      rank * u64
        data      prod(dims) * f64 raw bytes

Round-trips are bit-exact. Any short read raises CheckpointError instead of
returning a partial map.
"""

import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"CATG"
VERSION = 1


def save_arrays(path, arrays):
    """Write a name -> ndarray map in insertion order."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            # asarray, not ascontiguousarray: the latter promotes rank-0 to rank-1
            data = np.asarray(arr, dtype="<f8")
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<Q", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(data.tobytes(order="C"))


def load_arrays(path):
    """Read a container back into an ordered name -> ndarray map."""
    out = {}
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(
                f"{path}: bad magic {magic!r}, not a checkpoint file"
            )
        version = struct.unpack("<I", _read_exact(fh, 4, path))[0]
        if version != VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {version}"
            )
        while True:
            head = fh.read(8)
            if not head:
                break
            if len(head) < 8:
                raise CheckpointError(f"{path}: truncated record header")
            (name_len,) = struct.unpack("<Q", head)
            name = _read_exact(fh, name_len, path).decode("utf-8")
            (rank,) = struct.unpack("<Q", _read_exact(fh, 8, path))
            dims = struct.unpack(
                "<" + "Q" * rank, _read_exact(fh, 8 * rank, path)
            )
            count = 1
            for d in dims:
                count *= d
            raw = _read_exact(fh, 8 * count, path)
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return out


def _read_exact(fh, n, path):
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointError(f"{path}: truncated checkpoint, wanted {n} bytes")
    return raw
