"""SEMB binary writer (little-endian).

Layout:
  magic "SEMB" | u32 version=1 | u32 dim | u32 meta_len | meta utf-8
  | u64 record_count | records
record: u32 id_len | id utf-8 | u32 T | T*dim float32 row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

SEMB_MAGIC = b"SEMB"
SEMB_VERSION = 1


def write_semb_records(
    stream: BinaryIO | str | Path,
    dim: int,
    meta: str,
    records: Iterable[tuple[str, np.ndarray]],
) -> int:
    """Write records (id, T x dim float32 matrix) in order; returns the count.

    Records are materialized first because the header carries the count.
    """
    if isinstance(stream, (str, Path)):
        with open(stream, "wb") as fh:
            return write_semb_records(fh, dim, meta, records)

    items = []
    for sid, mat in records:
        mat = np.ascontiguousarray(mat, dtype="<f4")
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] != dim:
            raise ValueError(f"record {sid!r}: shape {mat.shape} incompatible with dim {dim}")
        if not np.isfinite(mat).all():
            raise ValueError(f"record {sid!r} contains NaN/Inf")
        items.append((sid, mat))

    meta_b = meta.encode("utf-8")
    stream.write(SEMB_MAGIC)
    stream.write(struct.pack("<I", SEMB_VERSION))
    stream.write(struct.pack("<I", dim))
    stream.write(struct.pack("<I", len(meta_b)))
    stream.write(meta_b)
    stream.write(struct.pack("<Q", len(items)))
    for sid, mat in items:
        sid_b = sid.encode("utf-8")
        stream.write(struct.pack("<I", len(sid_b)))
        stream.write(sid_b)
        stream.write(struct.pack("<I", mat.shape[0]))
        stream.write(mat.tobytes())
    return len(items)
