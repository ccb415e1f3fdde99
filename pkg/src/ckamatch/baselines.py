"""Training-light baselines: relative representations and a linear map.

Relative representations express each query as its cosine similarities to
the anchors and compare those profiles across modalities. The linear
baseline fits W minimizing ||W^T Z_b - H_b||_F^2 (plus a tiny ridge) on the
anchors and retrieves by cosine in the target space. Both produce a
ScoreMatrix consumable by retrieve_topk / match_by_scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVectorError, NumericalError, SizeError, ValidationError
from .local_cka import ScoreMatrix
from .preprocess import l2_normalize
from .store import EmbeddingSet, save_embeddings, load_embeddings

DEFAULT_RIDGE = 1e-6


def _cosine_columns(a: np.ndarray, b: np.ndarray, a_ids, b_ids) -> np.ndarray:
    """Cosine similarity between every column of a and every column of b."""
    a_norms = np.linalg.norm(a, axis=0)
    b_norms = np.linalg.norm(b, axis=0)
    tiny = np.finfo(np.float64).tiny
    for norms, ids, side in ((a_norms, a_ids, "left"), (b_norms, b_ids, "right")):
        bad = np.flatnonzero(norms < tiny)
        if bad.size:
            raise DegenerateVectorError(
                f"{side} query {ids[bad[0]]!r} has a zero vector; cosine is undefined"
            )
    return (a / a_norms).T @ (b / b_norms)


def relative_scores(
    base_left: EmbeddingSet,
    base_right: EmbeddingSet,
    query_left: EmbeddingSet,
    query_right: EmbeddingSet,
    cosine: bool = True,
) -> ScoreMatrix:
    """Compare anchor-similarity profiles across the two modalities.

    With ``cosine=False`` the raw inner products of the relative vectors are
    returned instead of their cosine; the raw variant is what the trace form
    of the local score reduces to (up to an affine shift).
    """
    if base_left.count != base_right.count:
        raise SizeError(f"anchor counts differ: {base_left.count} vs {base_right.count}")
    zb = l2_normalize(base_left)
    hb = l2_normalize(base_right)
    zq = l2_normalize(query_left)
    hq = l2_normalize(query_right)
    rel_left = zb.data.T @ zq.data  # (m, n_left)
    rel_right = hb.data.T @ hq.data
    if cosine:
        values = _cosine_columns(rel_left, rel_right, query_left.ids, query_right.ids)
    else:
        values = rel_left.T @ rel_right
    return ScoreMatrix(values=values, row_ids=query_left.ids, col_ids=query_right.ids)


@dataclass(frozen=True)
class LinearMap:
    """d1 x d2 map from the left space to the right space."""

    w: np.ndarray
    ridge: float

    def __post_init__(self):
        arr = np.asarray(self.w, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError("linear map must be a 2-d matrix")
        if not np.isfinite(arr).all():
            raise ValidationError("linear map contains NaN/Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)


def fit_linear_map(
    base_left: EmbeddingSet, base_right: EmbeddingSet, ridge: float = DEFAULT_RIDGE
) -> LinearMap:
    """Regularized normal equations: W = (Zb Zb^T + ridge I)^-1 Zb Hb^T."""
    if base_left.count != base_right.count:
        raise SizeError(f"anchor counts differ: {base_left.count} vs {base_right.count}")
    if base_left.count < 2:
        raise SizeError("linear map needs at least 2 anchor pairs")
    if ridge < 0:
        raise ValidationError("ridge must be non-negative")
    zb = base_left.data
    gram_z = zb @ zb.T + ridge * np.eye(base_left.dim)
    rhs = zb @ base_right.data.T
    try:
        w = np.linalg.solve(gram_z, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular (ridge={ridge}): {exc}") from exc
    if not np.isfinite(w).all():
        raise NumericalError("linear-map solve produced non-finite values")
    return LinearMap(w=w, ridge=ridge)


def linear_map_scores(
    linear_map: LinearMap, query_left: EmbeddingSet, query_right: EmbeddingSet
) -> ScoreMatrix:
    """values[i][j] = cosine(W^T z_i, h_j)."""
    if linear_map.w.shape[0] != query_left.dim:
        raise SizeError(
            f"map expects dim {linear_map.w.shape[0]}, left queries have {query_left.dim}"
        )
    if linear_map.w.shape[1] != query_right.dim:
        raise SizeError(
            f"map produces dim {linear_map.w.shape[1]}, right queries have {query_right.dim}"
        )
    mapped = linear_map.w.T @ query_left.data
    values = _cosine_columns(mapped, query_right.data, query_left.ids, query_right.ids)
    return ScoreMatrix(values=values, row_ids=query_left.ids, col_ids=query_right.ids)


def save_linear_map(linear_map: LinearMap, path) -> None:
    """Persist W in the EMB1 container; the ridge rides in the modality tag."""
    save_embeddings(
        EmbeddingSet(
            data=linear_map.w,
            ids=tuple(f"col{j}" for j in range(linear_map.w.shape[1])),
            modality_tag=f"linear_map;ridge={linear_map.ridge!r}",
        ),
        path,
    )


def load_linear_map(path) -> LinearMap:
    emb = load_embeddings(path)
    ridge = DEFAULT_RIDGE
    tag = emb.modality_tag
    if tag.startswith("linear_map;ridge="):
        ridge = float(tag.split("=", 1)[1])
    return LinearMap(w=emb.data, ridge=ridge)
