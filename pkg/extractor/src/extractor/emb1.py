"""Writer/reader for the EMB1 container and pairing manifests.

Independent implementation of the wire format the alignment toolkit
consumes: ``EMB1`` magic, little-endian u32 header length, UTF-8 JSON
header ``{dim, count, modality_tag, ids}``, then float64 little-endian
payload, column-major. Kept dependency-free on purpose; the only shared
contract between the packages is this byte layout.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EMB1"


def write_embeddings(path, data: np.ndarray, ids, modality_tag: str = "") -> None:
    """``data`` is (dim, count), one embedding per column."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected a (dim, count) matrix, got shape {data.shape}")
    dim, count = data.shape
    ids = [str(i) for i in ids]
    if len(ids) != count:
        raise ValueError(f"{len(ids)} ids for {count} columns")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    if not np.isfinite(data).all():
        raise ValueError("payload contains NaN/Inf")
    header = json.dumps(
        {"dim": dim, "count": count, "modality_tag": modality_tag, "ids": ids},
        ensure_ascii=False,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(data.T).astype("<f8").tobytes())


def read_embeddings(path):
    """Returns (data (dim, count), ids, modality_tag)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not an EMB1 file")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    dim, count = int(header["dim"]), int(header["count"])
    payload = blob[8 + header_len :]
    if len(payload) != dim * count * 8:
        raise ValueError(f"{path}: truncated payload")
    data = np.frombuffer(payload, dtype="<f8").reshape(count, dim).T
    return data, [str(i) for i in header["ids"]], str(header.get("modality_tag", ""))


def write_manifest(path, pairs, role: str = "full") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"role": role, "pairs": [list(p) for p in pairs]}, fh, indent=2)
        fh.write("\n")
