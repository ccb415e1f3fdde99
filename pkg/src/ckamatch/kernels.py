"""Kernels, centering, HSIC and CKA.

All similarity math runs through here: Gram matrices (linear or RBF),
double centering, the biased HSIC estimator tr(KCLC)/(N-1)^2, the CKA
ratio, and the centered unit-Frobenius kernel used as the graph
representation by the QAP matcher (scaled so that tr(Kbar @ Lbar) equals
cka(K, L) exactly).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateBandwidthError,
    DegenerateKernelError,
    SizeError,
    ValidationError,
)
from .store import EmbeddingSet

DEGENERATE_HSIC_EPS = 1e-15

STATE_RAW = "raw"
STATE_CENTERED = "double_centered"
STATE_NORMALIZED = "normalized_centered"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice: ``linear`` or ``rbf`` with a bandwidth policy.

    ``rbf_bandwidth`` is either the string ``"median"`` (median of pairwise
    Euclidean distances) or a fixed positive float.
    """

    kind: str = "linear"
    rbf_bandwidth: str | float = "median"

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValidationError(f"kernel kind must be 'linear' or 'rbf', got {self.kind!r}")
        bw = self.rbf_bandwidth
        if isinstance(bw, str):
            if bw != "median":
                raise ValidationError(f"rbf bandwidth must be 'median' or a float, got {bw!r}")
        else:
            if not np.isfinite(bw) or bw <= 0:
                raise ValidationError(f"fixed rbf bandwidth must be positive, got {bw}")

    def describe(self) -> dict:
        return {"kind": self.kind, "rbf_bandwidth": self.rbf_bandwidth}


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric n x n Gram matrix plus its centering/scaling state."""

    values: np.ndarray
    state: str = STATE_RAW

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"kernel matrix must be square, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("kernel matrix contains NaN/Inf")
        asym = np.abs(arr - arr.T)
        tol = 1e-12 * np.maximum(1.0, np.abs(arr))
        if (asym > tol).any():
            raise ValidationError("kernel matrix is not symmetric")
        if self.state not in (STATE_RAW, STATE_CENTERED, STATE_NORMALIZED):
            raise ValidationError(f"unknown kernel state {self.state!r}")
        arr = (arr + arr.T) / 2.0
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def squared_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between columns of x and y."""
    xx = np.sum(x * x, axis=0)
    yy = np.sum(y * y, axis=0)
    sq = xx[:, None] + yy[None, :] - 2.0 * (x.T @ y)
    return np.maximum(sq, 0.0)


def resolve_bandwidth(x: EmbeddingSet, spec: KernelSpec) -> float:
    """Concrete RBF sigma for a data set: fixed value or median heuristic."""
    if not isinstance(spec.rbf_bandwidth, str):
        return float(spec.rbf_bandwidth)
    sq = squared_distances(x.data, x.data)
    iu = np.triu_indices(x.count, k=1)
    median = float(np.median(np.sqrt(sq[iu])))
    if median <= 0.0:
        raise DegenerateBandwidthError(
            "median pairwise distance is zero (all columns identical); "
            "supply a fixed rbf bandwidth"
        )
    return median


def gram(x: EmbeddingSet, spec: KernelSpec) -> KernelMatrix:
    """Raw Gram matrix of the columns of x under the given kernel."""
    if x.count < 2:
        raise SizeError(f"gram needs at least 2 columns, got {x.count}")
    if spec.kind == "linear":
        values = x.data.T @ x.data
    else:
        sigma = resolve_bandwidth(x, spec)
        values = np.exp(-squared_distances(x.data, x.data) / (2.0 * sigma * sigma))
    return KernelMatrix(values=values, state=STATE_RAW)


def _centered_values(k: KernelMatrix) -> np.ndarray:
    """C K C by explicit mean subtraction; idempotent on centered input."""
    v = k.values
    row_means = v.mean(axis=1, keepdims=True)
    col_means = v.mean(axis=0, keepdims=True)
    grand = v.mean()
    out = v - row_means - col_means + grand
    return (out + out.T) / 2.0


def center(k: KernelMatrix) -> KernelMatrix:
    """Double-center: returns C K C with C = I - (1/n) 11^T."""
    return KernelMatrix(values=_centered_values(k), state=STATE_CENTERED)


def hsic(k: KernelMatrix, l: KernelMatrix) -> float:
    """Biased HSIC estimator tr(K C L C) / (n-1)^2.

    Accepts raw or pre-centered inputs; centering is idempotent so the
    result is identical either way.
    """
    if k.n != l.n:
        raise SizeError(f"HSIC needs equal sizes, got {k.n} and {l.n}")
    if k.n < 2:
        raise SizeError("HSIC needs n >= 2")
    kc = _centered_values(k) if k.state == STATE_RAW else k.values
    lc = _centered_values(l) if l.state == STATE_RAW else l.values
    return float(np.sum(kc * lc) / (k.n - 1) ** 2)


def cka(k: KernelMatrix, l: KernelMatrix) -> float:
    """CKA(K, L) = HSIC(K, L) / sqrt(HSIC(K, K) * HSIC(L, L))."""
    if k.n != l.n:
        raise SizeError(f"CKA needs equal sizes, got {k.n} and {l.n}")
    if k.n < 2:
        raise SizeError("CKA needs n >= 2")
    # center each side once; the three HSIC terms share the centered values
    kc = _centered_values(k) if k.state == STATE_RAW else k.values
    lc = _centered_values(l) if l.state == STATE_RAW else l.values
    scale = (k.n - 1) ** 2
    self_k = float(np.sum(kc * kc)) / scale
    self_l = float(np.sum(lc * lc)) / scale
    if self_k <= DEGENERATE_HSIC_EPS or self_l <= DEGENERATE_HSIC_EPS:
        raise DegenerateKernelError(
            "self-HSIC is numerically zero; CKA is undefined for constant embeddings"
        )
    return float(np.sum(kc * lc)) / scale / float(np.sqrt(self_k * self_l))


def normalized_centered(k: KernelMatrix) -> KernelMatrix:
    """Centered kernel rescaled to unit Frobenius norm.

    With Kbar = CKC / ||CKC||_F (symmetric; trace objectives match the
    one-sided K C form because C is idempotent), tr(Kbar @ Lbar) equals
    cka(K, L) exactly and tr(Kbar @ Kbar) = 1.
    """
    kc = _centered_values(k)
    fro = float(np.sqrt(np.sum(kc * kc)))
    if (fro / (k.n - 1)) ** 2 <= DEGENERATE_HSIC_EPS:
        raise DegenerateKernelError(
            "centered kernel is numerically zero; cannot normalize a constant kernel"
        )
    return KernelMatrix(values=kc / fro, state=STATE_NORMALIZED)
