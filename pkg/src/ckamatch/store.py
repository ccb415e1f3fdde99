"""Persistence and column bookkeeping for embedding sets.

The on-disk container ("EMB1") is: 4 magic bytes ``EMB1``, a little-endian
u32 header length, a UTF-8 JSON header ``{dim, count, modality_tag, ids}``,
then the raw float64 little-endian payload, column-major (one embedding per
column, columns contiguous). Round-trips are bit-exact.

Pairing manifests are plain JSON: ``{"role": ..., "pairs": [[l, r], ...]}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FormatError,
    IdLookupError,
    SizeError,
    StorageError,
    ValidationError,
)

MAGIC = b"EMB1"
MANIFEST_ROLES = ("base", "query", "full")


@dataclass(frozen=True)
class EmbeddingSet:
    """A d x N matrix of column embeddings with stable item ids.

    ``data`` is float64, shape (dim, count); column i is the embedding of
    ``ids[i]``. The array is marked read-only so loaded sets can be shared
    freely.
    """

    data: np.ndarray
    ids: tuple[str, ...]
    modality_tag: str = ""
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asfortranarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"embedding data must be 2-d, got {arr.ndim}-d")
        dim, count = arr.shape
        if dim < 1 or count < 1:
            raise ValidationError(f"embedding set needs dim >= 1 and count >= 1, got {dim}x{count}")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != count:
            raise ValidationError(f"{len(ids)} ids for {count} columns")
        if len(set(ids)) != len(ids):
            raise ValidationError("item ids are not unique")
        if not np.isfinite(arr).all():
            raise ValidationError("embedding data contains NaN/Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_index", {item: i for i, item in enumerate(ids)})

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return self.data.shape[1]

    def index_of(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise IdLookupError(f"unknown item id {item_id!r}") from None

    def select(self, indices) -> "EmbeddingSet":
        """New set holding the given columns, in the given order."""
        idx = np.asarray(indices, dtype=int)
        return EmbeddingSet(
            data=self.data[:, idx],
            ids=tuple(self.ids[i] for i in idx),
            modality_tag=self.modality_tag,
        )

    def column(self, i: int) -> np.ndarray:
        return self.data[:, i]


def concat_columns(a: EmbeddingSet, b: EmbeddingSet) -> EmbeddingSet:
    """Column-wise concatenation; ids must stay unique across the result."""
    if a.dim != b.dim:
        raise SizeError(f"cannot concatenate dim {a.dim} with dim {b.dim}")
    return EmbeddingSet(
        data=np.hstack([a.data, b.data]),
        ids=a.ids + b.ids,
        modality_tag=a.modality_tag,
    )


@dataclass(frozen=True)
class PairingManifest:
    """Aligned (left_id, right_id) pairs with a role tag."""

    pairs: tuple[tuple[str, str], ...]
    role: str = "full"

    def __post_init__(self):
        if self.role not in MANIFEST_ROLES:
            raise ValidationError(f"manifest role must be one of {MANIFEST_ROLES}, got {self.role!r}")
        pairs = tuple((str(l), str(r)) for l, r in self.pairs)
        lefts = [l for l, _ in pairs]
        rights = [r for _, r in pairs]
        if len(set(lefts)) != len(lefts):
            raise ValidationError("manifest repeats a left-side id")
        if len(set(rights)) != len(rights):
            raise ValidationError("manifest repeats a right-side id")
        object.__setattr__(self, "pairs", pairs)


def save_embeddings(emb: EmbeddingSet, path) -> None:
    """Write the EMB1 container; load(save(x)) is bit-identical to x."""
    header = json.dumps(
        {
            "dim": emb.dim,
            "count": emb.count,
            "modality_tag": emb.modality_tag,
            "ids": list(emb.ids),
        },
        ensure_ascii=False,
    ).encode("utf-8")
    payload = np.ascontiguousarray(emb.data.T).astype("<f8").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def load_embeddings(path) -> EmbeddingSet:
    """Read and validate an EMB1 container."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not an EMB1 file (bad magic)")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
        dim = int(header["dim"])
        count = int(header["count"])
        ids = [str(i) for i in header["ids"]]
        tag = str(header.get("modality_tag", ""))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from exc
    if dim < 1 or count < 1:
        raise FormatError(f"{path}: header declares invalid shape {dim}x{count}")
    payload = blob[8 + header_len :]
    expected = dim * count * 8
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").reshape(count, dim).T
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: payload contains NaN/Inf")
    return EmbeddingSet(data=data, ids=tuple(ids), modality_tag=tag)


def save_manifest(manifest: PairingManifest, path) -> None:
    doc = {"role": manifest.role, "pairs": [list(p) for p in manifest.pairs]}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def load_manifest(path) -> PairingManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        pairs = tuple((str(l), str(r)) for l, r in doc["pairs"])
        role = str(doc.get("role", "full"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed manifest ({exc})") from exc
    return PairingManifest(pairs=pairs, role=role)


def align_by_manifest(
    left: EmbeddingSet, right: EmbeddingSet, manifest: PairingManifest
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Materialize column-aligned sets: column i of both outputs is pair i."""
    left_idx = [left.index_of(l) for l, _ in manifest.pairs]
    right_idx = [right.index_of(r) for _, r in manifest.pairs]
    return left.select(left_idx), right.select(right_idx)
