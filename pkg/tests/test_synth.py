import numpy as np
import pytest

from ckamatch.errors import ValidationError
from ckamatch.kernels import KernelSpec, cka, gram
from ckamatch.synth import SynthSpec, generate, permute_columns, shuffle_fraction

LINEAR = KernelSpec("linear")


class TestSpecValidation:
    def test_orthogonal_needs_small_latent(self):
        with pytest.raises(ValidationError):
            SynthSpec(latent_dim=10, dim_left=4, dim_right=4, count=5)

    def test_json_round_trip(self):
        spec = SynthSpec(
            latent_dim=4, dim_left=8, dim_right=6, count=20, noise_sigma=0.2,
            map_kind="random_gaussian", anisotropy=(4.0, 1.0, 1.0, 1.0),
            seed=7, n_classes=4,
        )
        assert SynthSpec.from_json(spec.to_json()) == spec


class TestGenerate:
    def test_noiseless_orthogonal_cka_is_one(self):
        corpus = generate(SynthSpec(latent_dim=6, dim_left=16, dim_right=10, count=40, seed=0))
        value = cka(gram(corpus.left, LINEAR), gram(corpus.right, LINEAR))
        assert value == pytest.approx(1.0, abs=1e-9)

    def test_same_seed_bit_identical(self):
        spec = SynthSpec(latent_dim=4, dim_left=8, dim_right=6, count=25,
                         noise_sigma=0.3, seed=11)
        a, b = generate(spec), generate(spec)
        assert a.left.data.tobytes() == b.left.data.tobytes()
        assert a.right.data.tobytes() == b.right.data.tobytes()
        assert a.left.ids == b.left.ids

    def test_full_shuffle_kills_cka(self):
        values = []
        for seed in range(10):
            corpus = generate(SynthSpec(latent_dim=8, dim_left=24, dim_right=16,
                                        count=1000, seed=seed))
            shuffled, _ = shuffle_fraction(corpus.left, 1.0, seed + 50)
            values.append(abs(cka(gram(shuffled, LINEAR), gram(corpus.right, LINEAR))))
        assert np.mean(values) < 0.05

    def test_manifest_pairs_align_columns(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=6, seed=1))
        assert all(l == r for l, r in corpus.manifest.pairs)
        assert corpus.manifest.role == "full"

    def test_class_labels_in_ids(self):
        corpus = generate(SynthSpec(latent_dim=8, dim_left=12, dim_right=10, count=20,
                                    seed=2, n_classes=4))
        assert corpus.labels is not None
        assert corpus.left.ids[0] == "class0_item0"
        assert corpus.left.ids[5] == "class1_item5"
        assert len(set(corpus.labels)) == 4

    def test_anisotropy_scales_latents(self):
        base = SynthSpec(latent_dim=2, dim_left=4, dim_right=4, count=30, seed=3)
        aniso = SynthSpec(latent_dim=2, dim_left=4, dim_right=4, count=30, seed=3,
                          anisotropy=(10.0, 1.0))
        plain = generate(base)
        stretched = generate(aniso)
        # same seed, same draws: scaled latents change the spread
        assert stretched.left.data.std() > plain.left.data.std() * 2


class TestShuffleFraction:
    def test_fraction_zero_is_identity(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=12, seed=4))
        shuffled, perm = shuffle_fraction(corpus.left, 0.0, 9)
        assert perm.mapping == tuple(range(12))
        np.testing.assert_array_equal(shuffled.data, corpus.left.data)

    def test_two_item_full_shuffle_is_swap(self):
        corpus = generate(SynthSpec(latent_dim=2, dim_left=3, dim_right=3, count=2, seed=5))
        _, perm = shuffle_fraction(corpus.left, 1.0, 0)
        assert perm.mapping == (1, 0)

    def test_inverse_restores_exactly(self):
        corpus = generate(SynthSpec(latent_dim=4, dim_left=7, dim_right=5, count=30, seed=6))
        shuffled, perm = shuffle_fraction(corpus.left, 0.5, 13)
        restored = permute_columns(shuffled, perm.inverse())
        assert restored.data.tobytes() == corpus.left.data.tobytes()
        assert restored.ids == corpus.left.ids

    def test_ground_truth_convention(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=10, seed=7))
        shuffled, perm = shuffle_fraction(corpus.left, 1.0, 3)
        for i, g in enumerate(perm.mapping):
            np.testing.assert_array_equal(shuffled.data[:, i], corpus.left.data[:, g])

    def test_no_fixed_points_at_full_shuffle(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=50, seed=8))
        _, perm = shuffle_fraction(corpus.left, 1.0, 21)
        assert all(perm.mapping[i] != i for i in range(50))

    def test_tiny_fraction_rejected(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=10, seed=9))
        with pytest.raises(ValidationError):
            shuffle_fraction(corpus.left, 0.1, 0)  # 0.1 * 10 = 1 < 2

    def test_determinism(self):
        corpus = generate(SynthSpec(latent_dim=3, dim_left=5, dim_right=4, count=20, seed=10))
        a = shuffle_fraction(corpus.left, 0.6, 77)
        b = shuffle_fraction(corpus.left, 0.6, 77)
        assert a[1] == b[1]
        assert a[0].data.tobytes() == b[0].data.tobytes()
