import numpy as np
import pytest

from ckamatch.assignment import PermutationMap
from ckamatch.errors import ValidationError
from ckamatch.evaluation import (
    Corpus,
    EvalReport,
    ablation_grid,
    classify,
    make_split,
    matching_accuracy,
    noise_sweep,
    run_benchmark,
    run_method,
    shuffle_curve,
    size_sweep,
    topk_accuracy,
)
from ckamatch.kernels import KernelSpec, cka, gram
from ckamatch.synth import SynthSpec, generate

LINEAR = KernelSpec("linear")


def small_corpus(sigma=0.3, count=120, seed=0, **kwargs):
    data = generate(
        SynthSpec(latent_dim=8, dim_left=24, dim_right=18, count=count,
                  noise_sigma=sigma, seed=seed)
    )
    return Corpus(left=data.left, right=data.right, m=24, n_query=32,
                  kernel=LINEAR, **kwargs)


class TestMatchingAccuracy:
    def test_equal_permutations(self):
        p = PermutationMap(mapping=(2, 0, 1))
        assert matching_accuracy(p, p) == 1.0

    def test_two_cycle_on_ten(self):
        truth = PermutationMap(mapping=tuple(range(10)))
        swapped = list(range(10))
        swapped[3], swapped[7] = swapped[7], swapped[3]
        assert matching_accuracy(PermutationMap(mapping=tuple(swapped)), truth) == 0.8

    def test_random_permutation_statistics(self):
        n = 1000
        truth = PermutationMap(mapping=tuple(range(n)))
        values = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            found = PermutationMap(mapping=tuple(int(i) for i in rng.permutation(n)))
            values.append(matching_accuracy(found, truth))
        grand_mean = np.mean(values)
        # mean accuracy of a uniform permutation is 1/n; SE of the grand
        # mean is ~1/(n sqrt(100)) = 1e-4
        assert abs(grand_mean - 1.0 / n) < 3e-4

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            matching_accuracy(
                PermutationMap(mapping=(0, 1)), PermutationMap(mapping=(0, 1, 2))
            )


class TestTopkAccuracy:
    def test_k_equals_n_is_one(self):
        truth = PermutationMap(mapping=(2, 0, 1))
        ranked = np.tile(np.arange(3), (3, 1))
        assert topk_accuracy(ranked, truth, 3) == 1.0

    def test_top1_equals_matching_accuracy_of_argmax(self):
        rng = np.random.default_rng(0)
        scores = rng.standard_normal((8, 8))
        argmax = np.argmax(scores, axis=1)
        if len(set(argmax)) == len(argmax):  # argmax happens to be a bijection
            truth = PermutationMap(mapping=tuple(int(i) for i in rng.permutation(8)))
            ranked = np.argsort(-scores, axis=1)
            found = PermutationMap(mapping=tuple(int(i) for i in argmax))
            assert topk_accuracy(ranked, truth, 1) == matching_accuracy(found, truth)

    def test_rows_too_short(self):
        truth = PermutationMap(mapping=(0, 1))
        with pytest.raises(ValidationError):
            topk_accuracy([[0], [1]], truth, 2)


class TestShuffleCurve:
    def test_fraction_zero_equals_plain_cka(self):
        data = generate(SynthSpec(latent_dim=6, dim_left=16, dim_right=12,
                                  count=60, noise_sigma=0.1, seed=1))
        report = shuffle_curve(data.left, data.right, [0.0, 0.5], LINEAR, seeds=[0, 1])
        plain = cka(gram(data.left, LINEAR), gram(data.right, LINEAR))
        assert report.metrics["cka/frac=0.00/mean"] == pytest.approx(plain, abs=1e-12)

    def test_noiseless_curve_starts_at_one(self):
        data = generate(SynthSpec(latent_dim=6, dim_left=16, dim_right=12,
                                  count=60, seed=2))
        report = shuffle_curve(data.left, data.right, [0.0, 1.0], LINEAR, seeds=[0])
        assert report.metrics["cka/frac=0.00/mean"] == pytest.approx(1.0, abs=1e-9)
        assert report.metrics["cka/frac=1.00/mean"] < 0.5


class TestNoiseSweep:
    def test_sigma_zero_equals_plain_benchmark(self):
        corpus = small_corpus()
        report = noise_sweep(corpus, "qap", [0.0], seeds=[0, 1])
        for seed in (0, 1):
            cell, _ = run_benchmark(corpus, "qap", seed)
            assert report.metrics[f"matching_accuracy/sigma=0.00/seed={seed}"] == cell[
                "matching_accuracy"
            ]

    @pytest.mark.parametrize("method", ["qap", "local_cka", "relative", "linear"])
    def test_noise_hurts_every_method(self, method):
        corpus = small_corpus(sigma=0.2)
        report = noise_sweep(corpus, method, [0.0, 0.5], seeds=range(4))
        assert (
            report.metrics["matching_accuracy/sigma=0.50/mean"]
            <= report.metrics["matching_accuracy/sigma=0.00/mean"]
        )

    def test_relative_drop_reported(self):
        corpus = small_corpus()
        report = noise_sweep(corpus, "relative", [0.0, 0.4], seeds=[0])
        assert report.metrics["relative_drop/sigma=0.00"] == 0.0
        assert "relative_drop/sigma=0.40" in report.metrics


class TestSizeSweep:
    def test_single_value_equals_plain_run(self):
        corpus = small_corpus()
        report = size_sweep(corpus, "base", [24], 32, "relative", seeds=[0])
        cell, _ = run_benchmark(corpus, "relative", 0)
        assert report.metrics["matching_accuracy/base=24/seed=0"] == cell["matching_accuracy"]

    def test_invalid_vary(self):
        with pytest.raises(ValidationError):
            size_sweep(small_corpus(), "depth", [1], 4, "qap", seeds=[0])


class TestAblationGrid:
    def test_all_on_row_matches_direct_run(self):
        corpus = small_corpus(stretch=True, anchors_method="kmeans")
        report = ablation_grid(corpus, seeds=[0], rows=[(True, True, True)])
        cell, _ = run_benchmark(corpus, "qap", 0)
        key = "qap/clustering=on|stretching=on|cka=on/seed=0"
        assert report.metrics[key] == cell["matching_accuracy"]
        local_cell, _ = run_benchmark(corpus, "local_cka", 0)
        local_key = "local/clustering=on|stretching=on|cka=on/seed=0"
        assert report.metrics[local_key] == local_cell["matching_accuracy"]

    def test_grid_covers_requested_rows(self):
        corpus = small_corpus()
        rows = [(False, False, True), (True, True, False)]
        report = ablation_grid(corpus, seeds=[0], rows=rows)
        assert "qap/clustering=off|stretching=off|cka=on/mean" in report.metrics
        assert "local_top5/clustering=on|stretching=on|cka=off/mean" in report.metrics


class TestClassify:
    def build_classification_inputs(self, n_classes=5, seed=0):
        data = generate(
            SynthSpec(latent_dim=8, dim_left=20, dim_right=16, count=100,
                      seed=seed, n_classes=n_classes)
        )
        anchors = list(range(30))
        rest = list(range(30, 100))
        images = data.left.select(rest)
        class_texts = {}
        for j in rest:
            label = data.labels[j]
            class_texts.setdefault(label, []).append(data.right.data[:, j])
        class_arrays = {k: np.stack(v, axis=1) for k, v in class_texts.items()}
        return images, class_arrays, data.left.select(anchors), data.right.select(anchors)

    def test_noiseless_classes_top1_perfect(self):
        images, texts, al, ar = self.build_classification_inputs()
        report = classify(images, texts, al, ar, LINEAR)
        assert report.metrics["top1"] == 1.0
        assert report.metrics["top5"] == 1.0

    def test_single_class_trivial(self):
        images, texts, al, ar = self.build_classification_inputs()
        only = {"class0": texts["class0"]}
        keep = [i for i, item in enumerate(images.ids) if item.startswith("class0_")]
        report = classify(images.select(keep), only, al, ar, LINEAR)
        assert report.metrics["top1"] == 1.0

    def test_empty_class_rejected(self):
        images, texts, al, ar = self.build_classification_inputs()
        texts["class0"] = np.zeros((16, 0))
        with pytest.raises(ValidationError):
            classify(images, texts, al, ar, LINEAR)

    def test_unknown_label_rejected(self):
        images, texts, al, ar = self.build_classification_inputs()
        del texts["class0"]
        with pytest.raises(ValidationError):
            classify(images, texts, al, ar, LINEAR)


class TestEvalReport:
    def test_metrics_must_be_finite(self):
        with pytest.raises(ValidationError):
            EvalReport("t", "m", {}, {"bad": float("nan")})

    def test_rerun_reproducibility(self):
        corpus = small_corpus()
        a = noise_sweep(corpus, "qap", [0.0, 0.3], seeds=[0, 1])
        b = noise_sweep(corpus, "qap", [0.0, 0.3], seeds=[0, 1])
        assert a.metrics == b.metrics

    def test_sweeps_never_mutate_the_corpus(self):
        corpus = small_corpus()
        left_before = corpus.left.data.tobytes()
        right_before = corpus.right.data.tobytes()
        noise_sweep(corpus, "relative", [0.0, 0.5], seeds=[0])
        size_sweep(corpus, "base", [8, 16], 24, "relative", seeds=[0])
        assert corpus.left.data.tobytes() == left_before
        assert corpus.right.data.tobytes() == right_before

    def test_csv_export(self, tmp_path):
        report = EvalReport("t", "m", {}, {"x": 0.5, "y": 1.0})
        path = tmp_path / "out.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "task,method,metric,value"
        assert len(lines) == 3

    def test_json_shape(self):
        report = EvalReport("t", "m", {"seed": 0}, {"x": 0.5}, wall_time_ms=12)
        doc = report.to_dict()
        assert doc["wall_time_ms"] == 12
        assert "wall_time_ms" not in report.to_dict(include_timing=False)


class TestSplitMachinery:
    def test_split_deterministic(self):
        corpus = small_corpus()
        a = make_split(corpus, 3)
        b = make_split(corpus, 3)
        assert a.truth == b.truth
        assert a.query_left.ids == b.query_left.ids

    def test_split_disjoint_anchors_and_queries(self):
        corpus = small_corpus()
        split = make_split(corpus, 4)
        assert not set(split.base_left.ids) & set(split.query_left.ids)
        assert split.base_left.count == corpus.m
        assert split.query_left.count == corpus.n_query

    def test_methods_that_need_anchors_reject_m0(self):
        data = generate(SynthSpec(latent_dim=4, dim_left=8, dim_right=8, count=30, seed=5))
        corpus = Corpus(left=data.left, right=data.right, m=0, n_query=10, kernel=LINEAR)
        split = make_split(corpus, 0)
        for method in ("local_cka", "relative", "linear"):
            with pytest.raises(ValidationError):
                run_method(split, corpus, method)
