"""Task harnesses: matching, retrieval, sweeps, ablations, classification.

Every harness follows the same protocol: pick M anchors on the image side
(k-means or uniform), sample N query pairs from the rest, shuffle the image
queries with a known ground truth, run a method, and score the recovered
correspondence. Reports carry the complete resolved configuration plus one
metric per cell so reruns are bit-reproducible.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from .assignment import PermutationMap
from .baselines import fit_linear_map, linear_map_scores, relative_scores
from .errors import SizeError, ValidationError
from .kernels import KernelSpec, cka, gram
from .local_cka import (
    build_cache,
    match_by_scores,
    retrieve_topk,
    score_matrix,
    uncentered_alignment_scores,
)
from .preprocess import apply_stretch, fit_stretch, l2_normalize, select_anchors
from .qap import QapConfig, qap_match, solve_seeded_qap
from .store import EmbeddingSet, concat_columns
from .synth import shuffle_fraction

METHODS = ("qap", "local_cka", "relative", "linear")

# Table rows for the component ablation: (clustering, stretching, cka)
ABLATION_ROWS = (
    (False, False, False),
    (False, False, True),
    (False, True, True),
    (True, False, True),
    (True, True, True),
)


@dataclass(frozen=True)
class Corpus:
    """Aligned corpus plus the split/protocol knobs shared by harnesses."""

    left: EmbeddingSet
    right: EmbeddingSet
    m: int
    n_query: int
    kernel: KernelSpec = KernelSpec()
    stretch: bool = True
    anchors_method: str = "kmeans"
    qap_config: QapConfig = field(default_factory=QapConfig)

    def __post_init__(self):
        if self.left.count != self.right.count:
            raise SizeError(
                f"corpus sides differ: {self.left.count} vs {self.right.count} columns"
            )
        if self.m < 0 or self.n_query < 2:
            raise ValidationError("corpus needs m >= 0 and n_query >= 2")
        if self.m + self.n_query > self.left.count:
            raise SizeError(
                f"m={self.m} plus n_query={self.n_query} exceeds {self.left.count} pairs"
            )

    def describe(self) -> dict:
        return {
            "m": self.m,
            "n_query": self.n_query,
            "kernel_spec": self.kernel.describe(),
            "stretch": self.stretch,
            "stretch_std": "population",
            "anchors_method": self.anchors_method,
            "pipeline_order": "select anchors, then fit stretch on base+query",
            "qap_config": self.qap_config.describe(),
            "count": self.left.count,
        }


@dataclass(frozen=True)
class EvalReport:
    task: str
    method: str
    config: dict
    metrics: dict
    wall_time_ms: int = 0

    def __post_init__(self):
        for name, value in self.metrics.items():
            if not np.isfinite(value):
                raise ValidationError(f"metric {name!r} is not finite")

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "task": self.task,
            "method": self.method,
            "config": self.config,
            "metrics": {k: float(v) for k, v in sorted(self.metrics.items())},
        }
        if include_timing:
            doc["wall_time_ms"] = self.wall_time_ms
        return doc

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)

    def write_csv(self, path) -> None:
        """One row per metric cell, for plotting."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["task", "method", "metric", "value"])
            for name in sorted(self.metrics):
                writer.writerow([self.task, self.method, name, repr(float(self.metrics[name]))])


def matching_accuracy(found: PermutationMap, truth: PermutationMap) -> float:
    """Fraction of rows mapped to their ground-truth partner."""
    if found.n != truth.n:
        raise ValidationError(f"permutation sizes differ: {found.n} vs {truth.n}")
    found_arr = np.asarray(found.mapping)
    truth_arr = np.asarray(truth.mapping)
    return float(np.mean(found_arr == truth_arr))


def topk_accuracy(ranked, truth: PermutationMap, k: int) -> float:
    """Fraction of rows whose true partner appears in the first k entries."""
    rows = [np.asarray(r) for r in ranked]
    if len(rows) != truth.n:
        raise ValidationError(f"{len(rows)} ranked rows for {truth.n} truths")
    if any(r.shape[0] < k for r in rows):
        raise ValidationError(f"every ranked row needs at least k={k} entries")
    hits = sum(1 for i, r in enumerate(rows) if truth.mapping[i] in r[:k])
    return hits / truth.n


def _derived_seed(seed: int, tag: int) -> int:
    # stable namespacing of one user seed into independent per-step seeds
    return (seed * 1_000_003 + tag) % (2**63)


@dataclass(frozen=True)
class Split:
    base_left: EmbeddingSet | None
    base_right: EmbeddingSet | None
    query_left: EmbeddingSet  # shuffled
    query_right: EmbeddingSet
    truth: PermutationMap


def make_split(corpus: Corpus, seed: int, m: int | None = None, n_query: int | None = None) -> Split:
    """Anchors + query sample + 100% query shuffle with known truth."""
    m = corpus.m if m is None else m
    n_query = corpus.n_query if n_query is None else n_query
    if m + n_query > corpus.left.count:
        raise SizeError(f"m={m} plus n_query={n_query} exceeds {corpus.left.count} pairs")
    if m > 0:
        anchors = select_anchors(corpus.left, m, corpus.anchors_method, _derived_seed(seed, 1))
        anchor_idx = list(anchors.indices)
    else:
        anchor_idx = []
    pool = np.setdiff1d(np.arange(corpus.left.count), np.asarray(anchor_idx, dtype=int))
    rng = np.random.default_rng(_derived_seed(seed, 2))
    query_idx = rng.choice(pool, size=n_query, replace=False)
    base_left = corpus.left.select(anchor_idx) if m else None
    base_right = corpus.right.select(anchor_idx) if m else None
    query_left = corpus.left.select(query_idx)
    query_right = corpus.right.select(query_idx)
    shuffled, truth = shuffle_fraction(query_left, 1.0, _derived_seed(seed, 3))
    return Split(base_left, base_right, shuffled, query_right, truth)


def _stretched(split: Split) -> Split:
    """Per-side stretch fitted on base plus query, applied to both."""
    out = {}
    for side in ("left", "right"):
        base = getattr(split, f"base_{side}")
        query = getattr(split, f"query_{side}")
        fit_base = base if base is not None else query
        transform = fit_stretch(fit_base, query)
        out[f"base_{side}"] = apply_stretch(transform, base) if base is not None else None
        out[f"query_{side}"] = apply_stretch(transform, query)
    return Split(truth=split.truth, **out)


def run_method(split: Split, corpus: Corpus, method: str):
    """Run one matcher on a prepared split.

    Returns (found permutation, score matrix or None, solver milliseconds).
    Wall time covers only the solver call, not data preparation.
    """
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    if method in ("qap", "local_cka") and corpus.stretch:
        split = _stretched(split)
    m = split.base_left.count if split.base_left is not None else 0

    if method == "qap":
        if m:
            left_full = concat_columns(split.base_left, split.query_left)
            right_full = concat_columns(split.base_right, split.query_right)
        else:
            left_full, right_full = split.query_left, split.query_right
        start = time.perf_counter()
        result = qap_match(left_full, right_full, m, corpus.kernel, corpus.qap_config)
        elapsed = time.perf_counter() - start
        return result.permutation, None, int(elapsed * 1000)

    if method == "local_cka":
        if not m:
            raise ValidationError("local CKA needs at least 2 anchors")
        start = time.perf_counter()
        cache = build_cache(split.base_left, split.base_right, corpus.kernel)
        scores = score_matrix(cache, split.query_left, split.query_right)
        found = match_by_scores(scores)
        elapsed = time.perf_counter() - start
        return found, scores, int(elapsed * 1000)

    if method == "relative":
        if not m:
            raise ValidationError("relative representations need anchors")
        start = time.perf_counter()
        scores = relative_scores(
            split.base_left, split.base_right, split.query_left, split.query_right
        )
        found = match_by_scores(scores)
        elapsed = time.perf_counter() - start
        return found, scores, int(elapsed * 1000)

    if not m:
        raise ValidationError("the linear baseline needs anchors")
    start = time.perf_counter()
    linear_map = fit_linear_map(split.base_left, split.base_right)
    scores = linear_map_scores(linear_map, split.query_left, split.query_right)
    found = match_by_scores(scores)
    elapsed = time.perf_counter() - start
    return found, scores, int(elapsed * 1000)


def run_benchmark(corpus: Corpus, method: str, seed: int, topk: int = 5):
    """One (seed, method) cell: accuracy plus top-k when scores exist."""
    split = make_split(corpus, seed)
    found, scores, wall_ms = run_method(split, corpus, method)
    cell = {"matching_accuracy": matching_accuracy(found, split.truth)}
    if scores is not None and topk:
        k = min(topk, scores.n_right)
        cell[f"top{topk}"] = topk_accuracy(retrieve_topk(scores, k), split.truth, k)
    return cell, wall_ms


def run_qap_detailed(corpus: Corpus, seed: int):
    """Like run_benchmark('qap') but keeping the full solver result.

    Returns (QapResult, accuracy, solver milliseconds); used where the
    per-iteration objective trace belongs in the report.
    """
    split = make_split(corpus, seed)
    if corpus.stretch:
        split = _stretched(split)
    if split.base_left is not None:
        left_full = concat_columns(split.base_left, split.query_left)
        right_full = concat_columns(split.base_right, split.query_right)
        m = split.base_left.count
    else:
        left_full, right_full, m = split.query_left, split.query_right, 0
    start = time.perf_counter()
    result = qap_match(left_full, right_full, m, corpus.kernel, corpus.qap_config)
    wall_ms = int((time.perf_counter() - start) * 1000)
    return result, matching_accuracy(result.permutation, split.truth), wall_ms


def shuffle_curve(
    left: EmbeddingSet,
    right: EmbeddingSet,
    fractions,
    spec: KernelSpec,
    seeds,
) -> EvalReport:
    """Mean CKA per shuffle fraction across seeds (Table-1-style curve)."""
    if left.count != right.count:
        raise SizeError(f"aligned sets required: {left.count} vs {right.count} columns")
    metrics = {}
    wall = 0.0
    right_gram = gram(right, spec)
    for fi, fraction in enumerate(fractions):
        per_seed = []
        for seed in seeds:
            shuffled, _ = shuffle_fraction(left, float(fraction), _derived_seed(seed, 100 + fi))
            start = time.perf_counter()
            value = cka(gram(shuffled, spec), right_gram)
            wall += time.perf_counter() - start
            metrics[f"cka/frac={fraction:.2f}/seed={seed}"] = value
            per_seed.append(value)
        metrics[f"cka/frac={fraction:.2f}/mean"] = float(np.mean(per_seed))
    config = {
        "fractions": [float(f) for f in fractions],
        "seeds": [int(s) for s in seeds],
        "kernel_spec": spec.describe(),
        "count": left.count,
    }
    return EvalReport(
        task="shuffle_curve",
        method="cka",
        config=config,
        metrics=metrics,
        wall_time_ms=int(wall * 1000),
    )


def _with_noise(x: EmbeddingSet, eps: np.ndarray, sigma: float, scale: float) -> EmbeddingSet:
    if sigma == 0.0:
        return x
    return EmbeddingSet(
        data=x.data + sigma * scale * eps, ids=x.ids, modality_tag=x.modality_tag
    )


def noise_sweep(corpus: Corpus, method: str, sigmas, seeds) -> EvalReport:
    """Matching accuracy as Gaussian noise grows on both sides.

    Noise is sigma times the per-set global std of all entries. Per seed
    the split is fixed on clean data and a single epsilon draw is scaled
    across sigma levels (common random numbers), so each seed traces the
    degradation of one corpus rather than resampling everything.
    """
    scale_left = float(corpus.left.data.std())
    scale_right = float(corpus.right.data.std())
    metrics = {}
    wall = 0
    per_sigma_means = []
    for si, sigma in enumerate(sigmas):
        per_seed = []
        for seed in seeds:
            split = make_split(corpus, seed)
            rng = np.random.default_rng(_derived_seed(seed, 4))
            noisy = Split(
                base_left=(
                    _with_noise(split.base_left, rng.standard_normal(split.base_left.data.shape), sigma, scale_left)
                    if split.base_left is not None
                    else None
                ),
                base_right=(
                    _with_noise(split.base_right, rng.standard_normal(split.base_right.data.shape), sigma, scale_right)
                    if split.base_right is not None
                    else None
                ),
                query_left=_with_noise(
                    split.query_left, rng.standard_normal(split.query_left.data.shape), sigma, scale_left
                ),
                query_right=_with_noise(
                    split.query_right, rng.standard_normal(split.query_right.data.shape), sigma, scale_right
                ),
                truth=split.truth,
            )
            found, _, ms = run_method(noisy, corpus, method)
            wall += ms
            acc = matching_accuracy(found, noisy.truth)
            metrics[f"matching_accuracy/sigma={sigma:.2f}/seed={seed}"] = acc
            per_seed.append(acc)
        mean = float(np.mean(per_seed))
        metrics[f"matching_accuracy/sigma={sigma:.2f}/mean"] = mean
        per_sigma_means.append(mean)
    reference = per_sigma_means[0]
    for sigma, mean in zip(sigmas, per_sigma_means):
        drop = 0.0 if reference == 0 else (reference - mean) / reference
        metrics[f"relative_drop/sigma={sigma:.2f}"] = drop
    config = corpus.describe() | {
        "method": method,
        "sigmas": [float(s) for s in sigmas],
        "seeds": [int(s) for s in seeds],
        "noise_scale": {"left": scale_left, "right": scale_right},
        "noise_protocol": "split on clean data; one epsilon per seed scaled by sigma",
    }
    return EvalReport("noise_sweep", method, config, metrics, wall)


def _spearman(xs, ys) -> float:
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        return 0.0
    rho = spearmanr(xs, ys).statistic
    return float(rho) if np.isfinite(rho) else 0.0


def size_sweep(
    corpus: Corpus, vary: str, values, fixed_other: int, method: str, seeds
) -> EvalReport:
    """Accuracy versus base-set size M or query-set size N."""
    if vary not in ("base", "query"):
        raise ValidationError(f"vary must be 'base' or 'query', got {vary!r}")
    metrics = {}
    wall = 0
    means = []
    for value in values:
        m, n = (int(value), fixed_other) if vary == "base" else (fixed_other, int(value))
        per_seed = []
        for seed in seeds:
            split = make_split(corpus, seed, m=m, n_query=n)
            found, _, ms = run_method(split, corpus, method)
            wall += ms
            acc = matching_accuracy(found, split.truth)
            metrics[f"matching_accuracy/{vary}={value}/seed={seed}"] = acc
            per_seed.append(acc)
        mean = float(np.mean(per_seed))
        metrics[f"matching_accuracy/{vary}={value}/mean"] = mean
        means.append(mean)
    metrics["spearman"] = _spearman([float(v) for v in values], means)
    config = corpus.describe() | {
        "method": method,
        "vary": vary,
        "values": [int(v) for v in values],
        "fixed_other": int(fixed_other),
        "seeds": [int(s) for s in seeds],
    }
    return EvalReport("size_sweep", method, config, metrics, wall)


def _correlation_graph(x: EmbeddingSet) -> np.ndarray:
    """Cosine Gram of raw columns, scaled to unit Frobenius norm."""
    values = gram(l2_normalize(x), KernelSpec(kind="linear")).values
    return values / float(np.sqrt(np.sum(values * values)))


def _run_ablation_cell(corpus: Corpus, seed: int, clustering: bool, stretching: bool, use_cka: bool):
    cell_corpus = replace(
        corpus,
        anchors_method="kmeans" if clustering else "uniform",
        stretch=stretching,
    )
    split = make_split(cell_corpus, seed)
    work = _stretched(split) if stretching else split
    m = work.base_left.count if work.base_left is not None else 0
    out = {}
    if use_cka:
        found, _, _ = run_method(split, cell_corpus, "qap")
        out["qap"] = matching_accuracy(found, split.truth)
        cache = build_cache(work.base_left, work.base_right, cell_corpus.kernel)
        scores = score_matrix(cache, work.query_left, work.query_right)
    else:
        left_full = concat_columns(work.base_left, work.query_left)
        right_full = concat_columns(work.base_right, work.query_right)
        perm, _, _, _, _ = solve_seeded_qap(
            _correlation_graph(left_full), _correlation_graph(right_full), m, cell_corpus.qap_config
        )
        out["qap"] = matching_accuracy(perm, work.truth)
        cache = build_cache(
            l2_normalize(work.base_left), l2_normalize(work.base_right), KernelSpec(kind="linear")
        )
        scores = uncentered_alignment_scores(
            cache, l2_normalize(work.query_left), l2_normalize(work.query_right)
        )
    out["local"] = matching_accuracy(match_by_scores(scores), work.truth)
    k = min(5, scores.n_right)
    out["local_top5"] = topk_accuracy(retrieve_topk(scores, k), work.truth, k)
    return out


def ablation_grid(corpus: Corpus, seeds, rows=ABLATION_ROWS) -> EvalReport:
    """QAP/local matching and retrieval@5 per component on/off combination."""
    metrics = {}
    start = time.perf_counter()
    for clustering, stretching, use_cka in rows:
        key = (
            f"clustering={'on' if clustering else 'off'}"
            f"|stretching={'on' if stretching else 'off'}"
            f"|cka={'on' if use_cka else 'off'}"
        )
        cells = {"qap": [], "local": [], "local_top5": []}
        for seed in seeds:
            cell = _run_ablation_cell(corpus, seed, clustering, stretching, use_cka)
            for name, value in cell.items():
                cells[name].append(value)
                metrics[f"{name}/{key}/seed={seed}"] = value
        for name, values in cells.items():
            metrics[f"{name}/{key}/mean"] = float(np.mean(values))
    config = corpus.describe() | {
        "rows": [list(r) for r in rows],
        "seeds": [int(s) for s in seeds],
    }
    wall = int((time.perf_counter() - start) * 1000)
    return EvalReport("ablation_grid", "qap+local_cka", config, metrics, wall)


def classify(
    images: EmbeddingSet,
    class_texts: dict,
    anchors_left: EmbeddingSet,
    anchors_right: EmbeddingSet,
    spec: KernelSpec,
) -> EvalReport:
    """Zero-shot classification against averaged per-class text prototypes.

    ``class_texts`` maps class label -> (d2, k) array of text embedding
    columns; the prototype is their arithmetic mean. Image labels are parsed
    from ids of the form ``<label>_item<i>``.
    """
    if not class_texts:
        raise ValidationError("class_texts is empty")
    labels = sorted(class_texts)
    prototypes = []
    for label in labels:
        columns = np.asarray(class_texts[label], dtype=np.float64)
        if columns.ndim == 1:
            columns = columns[:, None]
        if columns.size == 0 or columns.shape[1] == 0:
            raise ValidationError(f"class {label!r} has no text embeddings")
        prototypes.append(columns.mean(axis=1))
    prototype_set = EmbeddingSet(
        data=np.stack(prototypes, axis=1), ids=tuple(labels), modality_tag="class_prototypes"
    )

    label_to_index = {label: i for i, label in enumerate(labels)}
    truth = []
    for item_id in images.ids:
        label = item_id.rsplit("_item", 1)[0]
        if label not in label_to_index:
            raise ValidationError(f"image {item_id!r} has unknown class label {label!r}")
        truth.append(label_to_index[label])
    truth = np.asarray(truth)

    start = time.perf_counter()
    cache = build_cache(anchors_left, anchors_right, spec)
    scores = score_matrix(cache, images, prototype_set)
    wall = int((time.perf_counter() - start) * 1000)

    k = min(5, len(labels))
    ranked = retrieve_topk(scores, k)
    top1 = float(np.mean(ranked[:, 0] == truth))
    topk = float(np.mean([truth[i] in ranked[i] for i in range(len(truth))]))
    config = {
        "kernel_spec": spec.describe(),
        "n_images": images.count,
        "n_classes": len(labels),
        "m": anchors_left.count,
        "topk": k,
    }
    return EvalReport(
        "classify", "local_cka", config, {"top1": top1, f"top{k}": topk}, wall
    )
