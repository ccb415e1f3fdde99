"""Stretching, unit-normalization and anchor selection.

Stretching rescales every feature dimension by the inverse of its empirical
standard deviation over base-plus-query columns, spreading representations
out before kernels are computed. Anchors (the aligned base set) are picked
on the image side, either uniformly or as the dataset members nearest to
k-means cluster centers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVectorError, SizeError, ValidationError
from .store import EmbeddingSet

STD_CLAMP = 1e-12
KMEANS_TOL = 1e-6
KMEANS_MAX_ITERS = 300
ANCHOR_METHODS = ("kmeans", "uniform")


@dataclass(frozen=True)
class StretchTransform:
    """Per-dimension scales (diagonal of the stretching matrix)."""

    scales: np.ndarray
    epsilon_clamped: tuple[int, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.scales, dtype=np.float64)
        if arr.ndim != 1:
            raise ValidationError("stretch scales must be a 1-d array")
        if not np.isfinite(arr).all() or (arr <= 0).any():
            raise ValidationError("stretch scales must be finite and positive")
        arr.setflags(write=False)
        object.__setattr__(self, "scales", arr)
        object.__setattr__(self, "epsilon_clamped", tuple(int(i) for i in self.epsilon_clamped))


def fit_stretch(base: EmbeddingSet, query: EmbeddingSet) -> StretchTransform:
    """Scales = 1/std per feature, std taken over base and query together.

    Population (1/N) standard deviation. Dimensions with std below 1e-12
    keep scale 1 and are recorded in ``epsilon_clamped``.
    """
    if base.dim != query.dim:
        raise SizeError(f"base dim {base.dim} != query dim {query.dim}")
    combined = np.hstack([base.data, query.data])
    if combined.shape[1] < 2:
        raise SizeError("stretch fit needs at least 2 columns in base + query")
    std = combined.std(axis=1, ddof=0)
    clamped = np.flatnonzero(std < STD_CLAMP)
    scales = np.ones_like(std)
    keep = std >= STD_CLAMP
    scales[keep] = 1.0 / std[keep]
    return StretchTransform(scales=scales, epsilon_clamped=tuple(clamped))


def apply_stretch(transform: StretchTransform, x: EmbeddingSet) -> EmbeddingSet:
    """Multiply feature row i by scales[i]; ids preserved."""
    if x.dim != transform.scales.shape[0]:
        raise SizeError(f"stretch has {transform.scales.shape[0]} scales, data has dim {x.dim}")
    return EmbeddingSet(
        data=x.data * transform.scales[:, None],
        ids=x.ids,
        modality_tag=x.modality_tag,
    )


def l2_normalize(x: EmbeddingSet) -> EmbeddingSet:
    """Rescale every column to unit Euclidean norm."""
    norms = np.linalg.norm(x.data, axis=0)
    tiny = np.finfo(np.float64).tiny
    bad = np.flatnonzero(norms < tiny)
    if bad.size:
        raise DegenerateVectorError(f"cannot normalize zero column {x.ids[bad[0]]!r}")
    return EmbeddingSet(data=x.data / norms[None, :], ids=x.ids, modality_tag=x.modality_tag)


@dataclass(frozen=True)
class AnchorSelection:
    """Distinct indices of chosen base samples plus how they were chosen."""

    indices: tuple[int, ...]
    method: str
    seed: int

    def __post_init__(self):
        if self.method not in ANCHOR_METHODS:
            raise ValidationError(f"anchor method must be one of {ANCHOR_METHODS}")
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValidationError("anchor indices are not distinct")
        if len(idx) < 1:
            raise ValidationError("anchor selection is empty")
        if any(i < 0 for i in idx):
            raise ValidationError("anchor indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def to_json(self) -> str:
        return json.dumps(
            {"method": self.method, "seed": self.seed, "indices": list(self.indices)}
        )

    @classmethod
    def from_json(cls, text: str) -> "AnchorSelection":
        doc = json.loads(text)
        return cls(indices=tuple(doc["indices"]), method=doc["method"], seed=doc["seed"])


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over rows of ``points``."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            chosen = int(rng.integers(n))
        else:
            chosen = int(rng.choice(n, p=d2 / total))
        centers[j] = points[chosen]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator):
    """Lloyd's algorithm; returns (centers, per-iteration objective)."""
    centers = _kmeans_pp_init(points, k, rng)
    objectives = []
    for _ in range(KMEANS_MAX_ITERS):
        d2 = (
            np.sum(points * points, axis=1)[:, None]
            + np.sum(centers * centers, axis=1)[None, :]
            - 2.0 * points @ centers.T
        )
        np.maximum(d2, 0.0, out=d2)
        assign = np.argmin(d2, axis=1)  # ties -> lowest center index
        objectives.append(float(d2[np.arange(points.shape[0]), assign].sum()))
        new_centers = centers.copy()
        for j in range(k):
            members = points[assign == j]
            if members.shape[0]:
                new_centers[j] = members.mean(axis=0)
        movement = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if movement < KMEANS_TOL:
            break
    return centers, objectives


def _snap_to_members(points: np.ndarray, centers: np.ndarray) -> list[int]:
    """Nearest dataset row per center; duplicates take the next-nearest
    unclaimed row, ties resolved toward the lowest index."""
    chosen: list[int] = []
    claimed = np.zeros(points.shape[0], dtype=bool)
    for center in centers:
        d2 = np.sum((points - center) ** 2, axis=1)
        d2[claimed] = np.inf
        best = int(np.argmin(d2))  # argmin breaks ties by lowest index
        chosen.append(best)
        claimed[best] = True
    return chosen


def select_anchors(images: EmbeddingSet, m: int, method: str, seed: int) -> AnchorSelection:
    """Pick m distinct base-sample indices from the image side."""
    if method not in ANCHOR_METHODS:
        raise ValidationError(f"anchor method must be one of {ANCHOR_METHODS}")
    if m < 1:
        raise ValidationError(f"anchor count must be >= 1, got {m}")
    if m > images.count:
        raise SizeError(f"cannot pick {m} anchors from {images.count} items")
    rng = np.random.default_rng(seed)
    if method == "uniform":
        indices = rng.choice(images.count, size=m, replace=False)
        return AnchorSelection(indices=tuple(int(i) for i in indices), method=method, seed=seed)
    points = images.data.T.copy()
    centers, _ = _lloyd(points, m, rng)
    indices = _snap_to_members(points, centers)
    return AnchorSelection(indices=tuple(indices), method=method, seed=seed)
