"""Recovering image-caption correspondences with seeded QAP matching.

Maximizing CKA over permutations is a quadratic assignment problem. A small
set of known-aligned anchor pairs (the base set) turns the hopeless
unseeded problem into a tractable seeded one: the anchors pin the frame and
Frank-Wolfe ascent fills in the query permutation.
"""

import numpy as np

from ckamatch import KernelSpec, QapConfig, matching_accuracy, qap_match
from ckamatch.store import concat_columns
from ckamatch.synth import SynthSpec, generate, shuffle_fraction

LINEAR = KernelSpec("linear")


def run_one(m_anchors, n_query, noise, seed):
    data = generate(SynthSpec(latent_dim=12, dim_left=48, dim_right=32,
                              count=m_anchors + n_query + 50,
                              noise_sigma=noise, seed=seed))
    anchor_idx = range(m_anchors)
    query_idx = range(m_anchors, m_anchors + n_query)
    shuffled, truth = shuffle_fraction(data.left.select(query_idx), 1.0, seed + 1)
    if m_anchors:
        left = concat_columns(data.left.select(anchor_idx), shuffled)
        right = concat_columns(data.right.select(anchor_idx), data.right.select(query_idx))
    else:
        left, right = shuffled, data.right.select(query_idx)
    result = qap_match(left, right, m_anchors, LINEAR, QapConfig())
    return matching_accuracy(result.permutation, truth), result


print("=== 1. Noiseless: the permutation is recovered exactly ===")
accuracy, result = run_one(m_anchors=0, n_query=100, noise=0.0, seed=0)
print(f"unseeded, 100 fully shuffled queries: accuracy = {accuracy:.0%}, "
      f"objective = {result.objective_trace:.6f} (max possible 1.0)")
print(f"objective climbed over {result.iterations} Frank-Wolfe iterations:")
print("  " + " -> ".join(f"{v:.3f}" for v in result.objective_history[:6])
      + (" -> ..." if len(result.objective_history) > 6 else ""))

print("\n=== 2. With noise, anchors carry the matching ===")
for m in (0, 10, 25, 50, 100):
    accs = [run_one(m, 80, 0.35, seed)[0] for seed in range(5)]
    bar = "#" * int(round(np.mean(accs) * 40))
    print(f"M = {m:3d} anchors: mean accuracy {np.mean(accs):.0%} {bar}")

print("\n=== 3. The objective *is* the alignment score ===")
accuracy, result = run_one(m_anchors=40, n_query=60, noise=0.3, seed=3)
print(f"accuracy {accuracy:.0%}; trace objective {result.objective_trace:.4f} "
      f"== CKA after realignment {result.cka_achieved:.4f}")
