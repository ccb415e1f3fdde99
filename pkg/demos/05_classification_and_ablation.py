"""Zero-shot classification and the component ablation.

Classification here means: average each class's text embeddings into a
prototype, then retrieve the nearest prototype for every image by local
CKA. No classifier is trained. The ablation quantifies what each pipeline
component (k-means anchors, stretching, the centered metric) buys.
"""

import numpy as np

from ckamatch import Corpus, KernelSpec, ablation_grid, classify
from ckamatch.synth import SynthSpec, generate

LINEAR = KernelSpec("linear")

print("=== 1. Classification against averaged text prototypes ===")
data = generate(SynthSpec(latent_dim=10, dim_left=32, dim_right=24, count=200,
                          noise_sigma=0.25, seed=0, n_classes=8))
anchor_idx = range(40)
image_idx = range(40, 200)
images = data.left.select(image_idx)
class_texts = {}
for j in image_idx:
    class_texts.setdefault(data.labels[j], []).append(data.right.data[:, j])
class_arrays = {label: np.stack(cols, axis=1) for label, cols in class_texts.items()}

report = classify(images, class_arrays,
                  data.left.select(anchor_idx), data.right.select(anchor_idx), LINEAR)
print(f"{images.count} images, {len(class_arrays)} classes, "
      f"{len(anchor_idx)} anchor pairs")
print(f"top-1 = {report.metrics['top1']:.0%}, top-5 = {report.metrics['top5']:.0%}")

print("\n=== 2. What each component contributes (QAP matching accuracy) ===")
spec = SynthSpec(latent_dim=12, dim_left=48, dim_right=40, count=200,
                 noise_sigma=0.4, map_kind="random_gaussian",
                 anisotropy=(8.0, 4.0) + (1.0,) * 10, seed=0,
                 n_classes=10, class_separation=5.0)
ab = generate(spec)
corpus = Corpus(left=ab.left, right=ab.right, m=48, n_query=64, kernel=LINEAR)
grid = ablation_grid(corpus, seeds=range(5))
rows = [
    ("off", "off", "on"),
    ("off", "on", "on"),
    ("on", "off", "on"),
    ("on", "on", "on"),
]
print(f"{'clustering':>10} {'stretching':>10} {'metric':>8} {'qap acc':>8}")
for c, s, k in rows:
    key = f"qap/clustering={c}|stretching={s}|cka={k}/mean"
    print(f"{c:>10} {s:>10} {'cka':>8} {grid.metrics[key]:>8.0%}")
print("\nAnchor coverage (k-means) and per-dimension stretching compound;")
print("the anisotropic feature scales are exactly what stretching undoes.")
