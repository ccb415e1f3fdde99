"""Localized CKA scores, retrieval and matching.

A query pair (z, h) is scored by the CKA of the anchor kernels augmented
with that single pair. The cache precomputes every aggregate of the M x M
anchor blocks once, so each score costs O(M) instead of O(M^2); full score
matrices reduce to a handful of matrix products. Cached and naive scores
agree to 1e-10 by construction (same algebra, reassociated).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .assignment import PermutationMap, solve_lap_max
from .errors import (
    DegenerateKernelError,
    SizeError,
    UnsupportedSpecError,
    ValidationError,
)
from .kernels import (
    DEGENERATE_HSIC_EPS,
    KernelSpec,
    cka,
    gram,
    resolve_bandwidth,
    squared_distances,
)
from .store import EmbeddingSet, save_embeddings, load_embeddings

__all__ = [
    "LocalCkaCache",
    "ScoreMatrix",
    "build_cache",
    "local_cka_score",
    "local_cka_trace_linear",
    "match_by_scores",
    "retrieve_topk",
    "score_matrix",
    "save_score_matrix",
    "load_score_matrix",
]


@dataclass(frozen=True)
class ScoreMatrix:
    """Finite n_left x n_right score table for retrieval and matching."""

    values: np.ndarray
    row_ids: tuple[str, ...] | None = None
    col_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError("score matrix must be 2-d")
        if not np.isfinite(arr).all():
            raise ValidationError("score matrix contains NaN/Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        for name in ("row_ids", "col_ids"):
            ids = getattr(self, name)
            if ids is not None:
                ids = tuple(str(i) for i in ids)
                expected = arr.shape[0] if name == "row_ids" else arr.shape[1]
                if len(ids) != expected:
                    raise ValidationError(f"{name} has {len(ids)} entries for {expected}")
                object.__setattr__(self, name, ids)

    @property
    def n_left(self) -> int:
        return self.values.shape[0]

    @property
    def n_right(self) -> int:
        return self.values.shape[1]


class _SideStats:
    """Per-side anchor aggregates plus per-query augmentation terms."""

    def __init__(self, base: EmbeddingSet, spec: KernelSpec):
        self.base = base
        self.kind = spec.kind
        self.sigma = resolve_bandwidth(base, spec) if spec.kind == "rbf" else None
        # computed inline rather than via gram() so a single-anchor cache is
        # representable (only the trace variant accepts M = 1)
        if spec.kind == "linear":
            k = base.data.T @ base.data
        else:
            k = np.exp(-squared_distances(base.data, base.data) / (2.0 * self.sigma**2))
        self.block = (k + k.T) / 2.0
        self.row_sums = self.block.sum(axis=1)
        self.total = float(self.block.sum())
        self.self_product = float(np.sum(self.block * self.block))
        self.row_dot = float(self.row_sums @ self.row_sums)

    def cross(self, queries: EmbeddingSet) -> np.ndarray:
        """Kernel values between every anchor and every query column."""
        if queries.dim != self.base.dim:
            raise SizeError(f"query dim {queries.dim} != anchor dim {self.base.dim}")
        if self.kind == "linear":
            return self.base.data.T @ queries.data
        sq = squared_distances(self.base.data, queries.data)
        return np.exp(-sq / (2.0 * self.sigma * self.sigma))

    def self_kernel(self, queries: EmbeddingSet) -> np.ndarray:
        """k(q, q) per query column."""
        if self.kind == "linear":
            return np.sum(queries.data * queries.data, axis=0)
        return np.ones(queries.count)

    def resolved_spec(self) -> KernelSpec:
        if self.kind == "linear":
            return KernelSpec(kind="linear")
        return KernelSpec(kind="rbf", rbf_bandwidth=self.sigma)


@dataclass(frozen=True)
class LocalCkaCache:
    """Precomputed anchor-side aggregates for O(M)-per-pair local CKA.

    RBF bandwidths are resolved once on the anchor columns and reused for
    every augmented kernel, so scores across query pairs share one kernel.
    """

    left: _SideStats
    right: _SideStats
    spec: KernelSpec
    cross_product: float  # tr(Kb @ Lb)

    @property
    def m(self) -> int:
        return self.left.base.count


def build_cache(base_left: EmbeddingSet, base_right: EmbeddingSet, spec: KernelSpec) -> LocalCkaCache:
    if base_left.count != base_right.count:
        raise SizeError(
            f"anchor counts differ: {base_left.count} vs {base_right.count}"
        )
    if base_left.count < 1:
        raise SizeError("local CKA needs at least 1 anchor pair")
    left = _SideStats(base_left, spec)
    right = _SideStats(base_right, spec)
    m = base_left.count
    for side, name in ((left, "left"), (right, "right")):
        if m < 2:
            continue  # the 1x1 base block centers to zero by construction
        centered_sq = (
            side.self_product
            - 2.0 * side.row_dot / m
            + side.total * side.total / (m * m)
        )
        if centered_sq / (m - 1) ** 2 <= DEGENERATE_HSIC_EPS:
            raise DegenerateKernelError(
                f"{name} anchor kernel is constant; local CKA is undefined"
            )
    return LocalCkaCache(
        left=left,
        right=right,
        spec=spec,
        cross_product=float(np.sum(left.block * right.block)),
    )


class _AugmentedTerms:
    """Aggregates of the (M+1)-sized augmented kernels, one column each."""

    def __init__(self, side: _SideStats, queries: EmbeddingSet):
        m = side.base.count
        n_aug = m + 1
        self.u = side.cross(queries)  # (m, nq)
        self.s = side.self_kernel(queries)  # (nq,)
        self.u_sum = self.u.sum(axis=0)
        u_dot = np.sum(self.u * self.u, axis=0)
        r_dot_u = side.row_sums @ self.u
        self.total = side.total + 2.0 * self.u_sum + self.s
        # tr(K'K'), (K'1).(K'1) and (1K'1)^2 assembled from anchor aggregates
        self.tr_sq = side.self_product + 2.0 * u_dot + self.s * self.s
        row_sq = side.row_dot + 2.0 * r_dot_u + u_dot + (self.u_sum + self.s) ** 2
        self.self_align = self.tr_sq - 2.0 * row_sq / n_aug + (self.total * self.total) / (n_aug * n_aug)


def score_matrix(cache: LocalCkaCache, left_queries: EmbeddingSet, right_queries: EmbeddingSet) -> ScoreMatrix:
    """values[i][j] = local CKA of (left query i, right query j)."""
    m = cache.m
    if m < 2:
        raise SizeError("local CKA scores need at least 2 anchor pairs")
    n_aug = m + 1
    lt = _AugmentedTerms(cache.left, left_queries)
    rt = _AugmentedTerms(cache.right, right_queries)

    for side_name, terms in (("left", lt), ("right", rt)):
        if np.any(terms.self_align / (n_aug - 1) ** 2 <= DEGENERATE_HSIC_EPS):
            raise DegenerateKernelError(
                f"augmented {side_name} kernel is degenerate for some query"
            )

    uv = lt.u.T @ rt.u  # (n_left, n_right): the only pairwise O(M) term
    tr_cross = cache.cross_product + 2.0 * uv + np.outer(lt.s, rt.s)
    # (K'1).(L'1): anchor rows pair left row sums with right row sums, and
    # each side's cross-kernel vector dots the OTHER side's anchor row sums
    mixed_left = cache.right.row_sums @ lt.u  # per left query
    mixed_right = cache.left.row_sums @ rt.u  # per right query
    row_cross = (
        float(cache.left.row_sums @ cache.right.row_sums)
        + mixed_left[:, None]
        + mixed_right[None, :]
        + uv
        + np.outer(lt.u_sum + lt.s, rt.u_sum + rt.s)
    )
    cross_align = tr_cross - 2.0 * row_cross / n_aug + np.outer(lt.total, rt.total) / (n_aug * n_aug)
    values = cross_align / np.sqrt(np.outer(lt.self_align, rt.self_align))
    return ScoreMatrix(values=values, row_ids=left_queries.ids, col_ids=right_queries.ids)


def _single_column(x, dim: int, tag: str) -> EmbeddingSet:
    col = np.asarray(x, dtype=np.float64).reshape(-1)
    if col.shape[0] != dim:
        raise SizeError(f"query column has dim {col.shape[0]}, expected {dim}")
    return EmbeddingSet(data=col[:, None], ids=(f"__{tag}__",), modality_tag=tag)


def local_cka_score(cache: LocalCkaCache, z, h) -> float:
    """Local CKA of a single query pair via the O(M) cache path."""
    zq = _single_column(z, cache.left.base.dim, "query_left")
    hq = _single_column(h, cache.right.base.dim, "query_right")
    return float(score_matrix(cache, zq, hq).values[0, 0])


def naive_local_cka_score(cache: LocalCkaCache, z, h) -> float:
    """Reference path: materialize both augmented kernels and take CKA."""
    zq = _single_column(z, cache.left.base.dim, "query_left")
    hq = _single_column(h, cache.right.base.dim, "query_right")
    aug_left = np.hstack([cache.left.base.data, zq.data])
    aug_right = np.hstack([cache.right.base.data, hq.data])
    ids_left = cache.left.base.ids + ("__aug__",)
    ids_right = cache.right.base.ids + ("__aug__",)
    k = gram(EmbeddingSet(aug_left, ids_left), cache.left.resolved_spec())
    l = gram(EmbeddingSet(aug_right, ids_right), cache.right.resolved_spec())
    return cka(k, l)


def local_cka_trace_linear(cache: LocalCkaCache, z, h) -> float:
    """Trace variant of the local score for the linear kernel.

    tr(K_[B,z] L_[B,h]) = tr(Kb Lb) + 2 z^T B_l B_r^T h + |z|^2 |h|^2.
    With unit-normalized inputs this equals twice the raw relative-
    representations inner product plus a pair-independent constant.
    """
    if cache.spec.kind != "linear":
        raise UnsupportedSpecError("trace variant is defined for the linear kernel only")
    zq = _single_column(z, cache.left.base.dim, "query_left")
    hq = _single_column(h, cache.right.base.dim, "query_right")
    u = cache.left.base.data.T @ zq.data[:, 0]
    v = cache.right.base.data.T @ hq.data[:, 0]
    z_sq = float(zq.data[:, 0] @ zq.data[:, 0])
    h_sq = float(hq.data[:, 0] @ hq.data[:, 0])
    return cache.cross_product + 2.0 * float(u @ v) + z_sq * h_sq


def uncentered_alignment_scores(
    cache: LocalCkaCache, left_queries: EmbeddingSet, right_queries: EmbeddingSet
) -> ScoreMatrix:
    """Alignment of the raw augmented kernels, without any centering.

    values[i][j] = tr(K'L') / sqrt(tr(K'K') tr(L'L')). This is the scoring
    rule used when the centered metric is ablated away in favor of plain
    normalized correlation matrices.
    """
    lt = _AugmentedTerms(cache.left, left_queries)
    rt = _AugmentedTerms(cache.right, right_queries)
    if np.any(lt.tr_sq <= 0) or np.any(rt.tr_sq <= 0):
        raise DegenerateKernelError("augmented kernel has zero Frobenius norm")
    tr_cross = cache.cross_product + 2.0 * (lt.u.T @ rt.u) + np.outer(lt.s, rt.s)
    values = tr_cross / np.sqrt(np.outer(lt.tr_sq, rt.tr_sq))
    return ScoreMatrix(values=values, row_ids=left_queries.ids, col_ids=right_queries.ids)


def retrieve_topk(scores: ScoreMatrix, k: int) -> np.ndarray:
    """Per row: indices of the k largest scores, descending, ties by index."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > scores.n_right:
        raise SizeError(f"k={k} exceeds {scores.n_right} candidates")
    order = np.argsort(-scores.values, axis=1, kind="stable")
    return order[:, :k]


def match_by_scores(scores: ScoreMatrix) -> PermutationMap:
    """Exact linear-assignment matching over the score matrix."""
    if scores.n_left != scores.n_right:
        raise ValidationError(
            f"matching needs a square score matrix, got {scores.n_left}x{scores.n_right}"
        )
    return solve_lap_max(scores.values)


def save_score_matrix(scores: ScoreMatrix, path) -> None:
    """EMB1 container (rows = dims, columns = right items) plus id sidecar."""
    col_ids = scores.col_ids or tuple(f"col{j}" for j in range(scores.n_right))
    row_ids = scores.row_ids or tuple(f"row{i}" for i in range(scores.n_left))
    save_embeddings(
        EmbeddingSet(data=scores.values, ids=col_ids, modality_tag="score_matrix"),
        path,
    )
    with open(f"{path}.json", "w", encoding="utf-8") as fh:
        json.dump({"row_ids": list(row_ids), "col_ids": list(col_ids)}, fh, indent=2)
        fh.write("\n")


def load_score_matrix(path) -> ScoreMatrix:
    emb = load_embeddings(path)
    try:
        with open(f"{path}.json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        row_ids = tuple(sidecar["row_ids"])
        col_ids = tuple(sidecar["col_ids"])
    except OSError:
        row_ids, col_ids = None, emb.ids
    return ScoreMatrix(values=emb.data, row_ids=row_ids, col_ids=col_ids)
