"""Synthetic aligned corpora with known ground truth.

Two unimodal "encoders" are simulated by mapping shared latent vectors
through per-side matrices (orthonormal columns give provably identical
linear Grams at zero noise) plus Gaussian noise. Every draw is an explicit
function of the seed, so corpora are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .assignment import PermutationMap
from .errors import ValidationError
from .store import EmbeddingSet, PairingManifest

DERANGEMENT_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthSpec:
    """Generator knobs for one aligned corpus."""

    latent_dim: int
    dim_left: int
    dim_right: int
    count: int
    noise_sigma: float = 0.0
    map_kind: str = "orthogonal"  # "orthogonal" | "random_gaussian"
    anisotropy: tuple[float, ...] | None = None
    seed: int = 0
    n_classes: int | None = None
    class_separation: float = 6.0

    def __post_init__(self):
        if min(self.latent_dim, self.dim_left, self.dim_right, self.count) < 1:
            raise ValidationError("all dimensions and the count must be positive")
        if self.map_kind not in ("orthogonal", "random_gaussian"):
            raise ValidationError(f"unknown map kind {self.map_kind!r}")
        if self.map_kind == "orthogonal" and self.latent_dim > min(self.dim_left, self.dim_right):
            raise ValidationError("orthogonal maps need latent_dim <= min(dim_left, dim_right)")
        if self.noise_sigma < 0:
            raise ValidationError("noise sigma must be non-negative")
        if self.anisotropy is not None:
            aniso = tuple(float(a) for a in self.anisotropy)
            if len(aniso) != self.latent_dim:
                raise ValidationError("anisotropy profile length must equal latent_dim")
            if any(a <= 0 or not np.isfinite(a) for a in aniso):
                raise ValidationError("anisotropy scales must be positive and finite")
            object.__setattr__(self, "anisotropy", aniso)
        if self.n_classes is not None:
            if self.n_classes < 1:
                raise ValidationError("n_classes must be positive")
            if self.count < self.n_classes:
                raise ValidationError("count must be >= n_classes")

    def to_json(self) -> str:
        doc = {
            "latent_dim": self.latent_dim,
            "dim_left": self.dim_left,
            "dim_right": self.dim_right,
            "count": self.count,
            "noise_sigma": self.noise_sigma,
            "map_kind": self.map_kind,
            "anisotropy": list(self.anisotropy) if self.anisotropy is not None else None,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "class_separation": self.class_separation,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        doc = json.loads(text)
        aniso = doc.get("anisotropy")
        return cls(
            latent_dim=int(doc["latent_dim"]),
            dim_left=int(doc["dim_left"]),
            dim_right=int(doc["dim_right"]),
            count=int(doc["count"]),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            map_kind=str(doc.get("map_kind", "orthogonal")),
            anisotropy=tuple(aniso) if aniso is not None else None,
            seed=int(doc.get("seed", 0)),
            n_classes=(int(doc["n_classes"]) if doc.get("n_classes") is not None else None),
            class_separation=float(doc.get("class_separation", 6.0)),
        )


def _draw_map(rng: np.random.Generator, dim: int, latent: int, kind: str) -> np.ndarray:
    g = rng.standard_normal((dim, latent))
    if kind == "random_gaussian":
        return g / np.sqrt(latent)
    q, r = np.linalg.qr(g)
    # canonical sign so the factorization is unambiguous
    q = q * np.sign(np.diag(r))[None, :]
    return q[:, :latent]


def _class_centers(rng: np.random.Generator, spec: SynthSpec) -> np.ndarray:
    k, d, sep = spec.n_classes, spec.latent_dim, spec.class_separation
    if k <= d:
        return sep * np.eye(d)[:, :k]
    dirs = rng.standard_normal((d, k))
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    return sep * dirs


@dataclass(frozen=True)
class SynthCorpus:
    left: EmbeddingSet
    right: EmbeddingSet
    manifest: PairingManifest
    labels: tuple[str, ...] | None = None
    latents: np.ndarray = field(repr=False, default=None)


def generate(spec: SynthSpec) -> SynthCorpus:
    """Aligned (left, right, manifest) triple, deterministic from the seed."""
    rng = np.random.default_rng(spec.seed)
    a = _draw_map(rng, spec.dim_left, spec.latent_dim, spec.map_kind)
    b = _draw_map(rng, spec.dim_right, spec.latent_dim, spec.map_kind)

    labels = None
    if spec.n_classes is not None:
        centers = _class_centers(rng, spec)
        assignments = np.arange(spec.count) % spec.n_classes
        latents = centers[:, assignments] + rng.standard_normal((spec.latent_dim, spec.count))
        labels = tuple(f"class{c}" for c in assignments)
        ids = tuple(f"class{c}_item{i}" for i, c in enumerate(assignments))
    else:
        latents = rng.standard_normal((spec.latent_dim, spec.count))
        ids = tuple(f"item{i:05d}" for i in range(spec.count))

    if spec.anisotropy is not None:
        latents = latents * np.asarray(spec.anisotropy)[:, None]

    left = a @ latents
    right = b @ latents
    if spec.noise_sigma > 0:
        left = left + spec.noise_sigma * rng.standard_normal(left.shape)
        right = right + spec.noise_sigma * rng.standard_normal(right.shape)

    manifest = PairingManifest(pairs=tuple((i, i) for i in ids), role="full")
    return SynthCorpus(
        left=EmbeddingSet(data=left, ids=ids, modality_tag="image"),
        right=EmbeddingSet(data=right, ids=ids, modality_tag="text"),
        manifest=manifest,
        labels=labels,
        latents=latents,
    )


def permute_columns(x: EmbeddingSet, perm: PermutationMap) -> EmbeddingSet:
    """Reorder columns so that output column i is input column mapping[i]."""
    if perm.n != x.count:
        raise ValidationError(f"permutation size {perm.n} != column count {x.count}")
    idx = list(perm.mapping)
    return x.select(idx)


def shuffle_fraction(
    x: EmbeddingSet, fraction: float, seed: int
) -> tuple[EmbeddingSet, PermutationMap]:
    """Shuffle a seeded subset of columns, avoiding fixed points.

    Returns the shuffled set and the ground-truth permutation g with
    shuffled[:, i] == original[:, g(i)]; applying g's inverse restores x.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must lie in [0, 1], got {fraction}")
    if fraction > 0 and fraction * x.count < 2:
        raise ValidationError(
            f"fraction {fraction} selects fewer than 2 of {x.count} items; use fraction 0"
        )
    mapping = np.arange(x.count)
    n_sel = int(np.floor(fraction * x.count))
    if n_sel >= 2:
        rng = np.random.default_rng(seed)
        selected = rng.choice(x.count, size=n_sel, replace=False)
        for _ in range(DERANGEMENT_ATTEMPTS):
            local = rng.permutation(n_sel)
            if not np.any(local == np.arange(n_sel)):
                break
        mapping[selected] = selected[local]
    perm = PermutationMap(mapping=tuple(int(i) for i in mapping))
    return permute_columns(x, perm), perm
