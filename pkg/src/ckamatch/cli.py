"""Command-line surface binding the modules into reproducible pipelines.

Every subcommand emits a JSON report (stdout or --out) embedding the full
resolved configuration; --no-timestamp strips the timestamp and wall-time
fields so identical invocations produce byte-identical reports. Exit codes:
0 success, 2 for input/validation problems, 1 for internal errors.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime
import json
import sys

import numpy as np

from . import evaluation
from .errors import InputError, NumericalError
from .kernels import KernelSpec, cka, gram
from .qap import QapConfig
from .store import (
    align_by_manifest,
    load_embeddings,
    load_manifest,
    save_embeddings,
    save_manifest,
)
from .synth import SynthSpec, generate

MATCH_METHODS = {"qap": "qap", "local": "local_cka", "relative": "relative", "linear": "linear"}
RETRIEVE_METHODS = {"local": "local_cka", "relative": "relative", "linear": "linear"}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    parser.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    parser.add_argument(
        "--rbf-bandwidth",
        default="median",
        help="'median' or a positive float (ignored for the linear kernel)",
    )
    parser.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    parser.add_argument("--csv", default=None, help="also write metrics as flat CSV")
    parser.add_argument("--pretty", action="store_true", help="print a table instead of JSON")
    parser.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit timestamp and wall-time fields (byte-stable output)",
    )
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS thread count")


def _add_split_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="pairing manifest JSON")
    parser.add_argument("--m", type=int, default=0, help="anchor (base set) count")
    parser.add_argument("--n", type=int, default=None, help="query count (default: all non-anchors)")
    parser.add_argument("--stretch", dest="stretch", action="store_true", default=True)
    parser.add_argument("--no-stretch", dest="stretch", action="store_false")
    parser.add_argument("--anchors-method", choices=("kmeans", "uniform"), default="kmeans")
    parser.add_argument("--qap-iters", type=int, default=30)
    parser.add_argument("--qap-tol", type=float, default=1e-6)
    parser.add_argument("--qap-init", choices=("barycenter", "identity", "random"), default="barycenter")
    parser.add_argument("--qap-restarts", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckamatch",
        description="Training-free cross-modal embedding alignment: CKA, QAP matching, local-CKA retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cka", help="global CKA between two aligned embedding files")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--manifest", default=None, help="optional manifest to align columns by id")
    _add_common(p)

    p = sub.add_parser("match", help="recover the query permutation")
    p.add_argument("method", choices=sorted(MATCH_METHODS))
    p.add_argument("left")
    p.add_argument("right")
    _add_split_flags(p)
    _add_common(p)

    p = sub.add_parser("retrieve", help="top-k retrieval over query pairs")
    p.add_argument("method", choices=sorted(RETRIEVE_METHODS))
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--k", type=int, default=5)
    _add_split_flags(p)
    _add_common(p)

    p = sub.add_parser("classify", help="zero-shot classification via local CKA")
    p.add_argument("images", help="EMB1 file; ids look like <label>_item<i>")
    p.add_argument("class_texts", help="EMB1 file; ids look like <label>::<anything>")
    p.add_argument("--base-left", required=True, help="anchor embeddings, image side")
    p.add_argument("--base-right", required=True, help="anchor embeddings, text side")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic aligned corpus")
    p.add_argument("--spec", required=True, help="SynthSpec JSON file")
    p.add_argument("--out-prefix", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluation harnesses")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)

    e = eval_sub.add_parser("shuffle-curve", help="CKA vs shuffle fraction")
    e.add_argument("left")
    e.add_argument("right")
    e.add_argument("--manifest", default=None)
    e.add_argument("--fractions", default="0,0.2,0.4,0.6,0.8,1.0")
    e.add_argument("--seeds", default="0")
    _add_common(e)

    e = eval_sub.add_parser("noise-sweep", help="accuracy vs added noise")
    e.add_argument("left")
    e.add_argument("right")
    e.add_argument("--method", choices=sorted(MATCH_METHODS), default="qap")
    e.add_argument("--sigmas", default="0,0.1,0.2,0.3,0.4,0.5")
    e.add_argument("--seeds", default="0,1,2")
    _add_split_flags(e)
    _add_common(e)

    e = eval_sub.add_parser("size-sweep", help="accuracy vs base or query size")
    e.add_argument("left")
    e.add_argument("right")
    e.add_argument("--method", choices=sorted(MATCH_METHODS), default="qap")
    e.add_argument("--vary", choices=("base", "query"), required=True)
    e.add_argument("--values", required=True, help="comma-separated sizes")
    e.add_argument("--fixed", type=int, required=True, help="the other size, held fixed")
    e.add_argument("--seeds", default="0,1,2")
    _add_split_flags(e)
    _add_common(e)

    e = eval_sub.add_parser("ablation", help="clustering/stretching/CKA component grid")
    e.add_argument("left")
    e.add_argument("right")
    e.add_argument("--seeds", default="0,1,2")
    _add_split_flags(e)
    _add_common(e)

    return parser


def _kernel_spec(args) -> KernelSpec:
    bandwidth = args.rbf_bandwidth
    if isinstance(bandwidth, str) and bandwidth != "median":
        try:
            bandwidth = float(bandwidth)
        except ValueError:
            raise InputError(
                f"--rbf-bandwidth must be 'median' or a float, got {bandwidth!r}"
            ) from None
    return KernelSpec(kind=args.kernel, rbf_bandwidth=bandwidth)


def _qap_config(args) -> QapConfig:
    return QapConfig(
        max_iters=args.qap_iters,
        tol=args.qap_tol,
        init=args.qap_init,
        init_seed=args.seed,
        restarts=args.qap_restarts,
    )


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip() != ""]


def _parse_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip() != ""]


def _aligned_sets(args):
    left = load_embeddings(args.left)
    right = load_embeddings(args.right)
    manifest = getattr(args, "manifest", None)
    if manifest:
        left, right = align_by_manifest(left, right, load_manifest(manifest))
    elif left.count != right.count:
        raise InputError(
            f"sets hold {left.count} and {right.count} columns; supply --manifest to align them"
        )
    return left, right


def _corpus(args) -> evaluation.Corpus:
    left, right = _aligned_sets(args)
    n_query = args.n if args.n is not None else left.count - args.m
    return evaluation.Corpus(
        left=left,
        right=right,
        m=args.m,
        n_query=n_query,
        kernel=_kernel_spec(args),
        stretch=args.stretch,
        anchors_method=args.anchors_method,
        qap_config=_qap_config(args),
    )


def _base_config(args) -> dict:
    config = {"seed": args.seed, "threads": args.threads}
    if hasattr(args, "kernel"):
        config["kernel_spec"] = _kernel_spec(args).describe()
    return config


def _emit(args, report: evaluation.EvalReport) -> None:
    doc = report.to_dict(include_timing=not args.no_timestamp)
    if not args.no_timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.pretty:
        width = max((len(k) for k in report.metrics), default=0)
        print(f"task: {report.task}  method: {report.method}")
        for name in sorted(report.metrics):
            print(f"  {name:<{width}}  {report.metrics[name]:.6g}")
    elif not args.out:
        sys.stdout.write(text)
    if args.csv:
        report.write_csv(args.csv)


def _cmd_cka(args) -> None:
    left, right = _aligned_sets(args)
    spec = _kernel_spec(args)
    value = cka(gram(left, spec), gram(right, spec))
    report = evaluation.EvalReport(
        task="cka",
        method="cka",
        config=_base_config(args) | {"left_count": left.count, "dim_left": left.dim, "dim_right": right.dim},
        metrics={"cka": value},
    )
    _emit(args, report)


def _cmd_match(args) -> None:
    corpus = _corpus(args)
    method = MATCH_METHODS[args.method]
    if method == "qap":
        result, accuracy, wall = evaluation.run_qap_detailed(corpus, args.seed)
        cell = {
            "matching_accuracy": accuracy,
            "cka_achieved": result.cka_achieved,
            "objective_trace": result.objective_trace,
            "iterations": float(result.iterations),
            "converged": float(result.converged),
        }
        cell.update(
            {f"objective/iter={i}": v for i, v in enumerate(result.objective_history)}
        )
    else:
        cell, wall = evaluation.run_benchmark(corpus, method, args.seed)
    report = evaluation.EvalReport(
        task="match",
        method=method,
        config=_base_config(args) | corpus.describe(),
        metrics=cell,
        wall_time_ms=wall,
    )
    _emit(args, report)


def _cmd_retrieve(args) -> None:
    corpus = _corpus(args)
    method = RETRIEVE_METHODS[args.method]
    split = evaluation.make_split(corpus, args.seed)
    found, scores, wall = evaluation.run_method(split, corpus, method)
    if scores is None:
        raise InputError(f"method {args.method} does not produce retrieval scores")
    k = args.k
    ranked = evaluation.retrieve_topk(scores, k)
    metrics = {
        "matching_accuracy": evaluation.matching_accuracy(found, split.truth),
        "top1": evaluation.topk_accuracy(ranked, split.truth, 1),
        f"top{k}": evaluation.topk_accuracy(ranked, split.truth, k),
    }
    report = evaluation.EvalReport(
        task="retrieve",
        method=method,
        config=_base_config(args) | corpus.describe() | {"k": k},
        metrics=metrics,
        wall_time_ms=wall,
    )
    _emit(args, report)


def _cmd_classify(args) -> None:
    images = load_embeddings(args.images)
    texts = load_embeddings(args.class_texts)
    class_texts: dict[str, list[np.ndarray]] = {}
    for j, text_id in enumerate(texts.ids):
        label = text_id.split("::", 1)[0]
        class_texts.setdefault(label, []).append(texts.data[:, j])
    class_arrays = {label: np.stack(cols, axis=1) for label, cols in class_texts.items()}
    report = evaluation.classify(
        images,
        class_arrays,
        load_embeddings(args.base_left),
        load_embeddings(args.base_right),
        _kernel_spec(args),
    )
    report = evaluation.EvalReport(
        task=report.task,
        method=report.method,
        config=_base_config(args) | report.config,
        metrics=report.metrics,
        wall_time_ms=report.wall_time_ms,
    )
    _emit(args, report)


def _cmd_synth(args) -> None:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = SynthSpec.from_json(fh.read())
    corpus = generate(spec)
    prefix = args.out_prefix
    save_embeddings(corpus.left, f"{prefix}_left.emb")
    save_embeddings(corpus.right, f"{prefix}_right.emb")
    save_manifest(corpus.manifest, f"{prefix}_manifest.json")
    report = evaluation.EvalReport(
        task="synth",
        method="generate",
        config=_base_config(args) | json.loads(spec.to_json()) | {"out_prefix": prefix},
        metrics={"count": float(spec.count)},
    )
    _emit(args, report)


def _cmd_eval(args) -> None:
    seeds = _parse_ints(args.seeds)
    if args.eval_command == "shuffle-curve":
        left, right = _aligned_sets(args)
        report = evaluation.shuffle_curve(
            left, right, _parse_floats(args.fractions), _kernel_spec(args), seeds
        )
    elif args.eval_command == "noise-sweep":
        report = evaluation.noise_sweep(
            _corpus(args), MATCH_METHODS[args.method], _parse_floats(args.sigmas), seeds
        )
    elif args.eval_command == "size-sweep":
        report = evaluation.size_sweep(
            _corpus(args), args.vary, _parse_ints(args.values), args.fixed,
            MATCH_METHODS[args.method], seeds,
        )
    else:
        report = evaluation.ablation_grid(_corpus(args), seeds)
    report = evaluation.EvalReport(
        task=report.task,
        method=report.method,
        config=_base_config(args) | report.config,
        metrics=report.metrics,
        wall_time_ms=report.wall_time_ms,
    )
    _emit(args, report)


COMMANDS = {
    "cka": _cmd_cka,
    "match": _cmd_match,
    "retrieve": _cmd_retrieve,
    "classify": _cmd_classify,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
}


@contextlib.contextmanager
def _thread_cap(threads: int | None):
    if threads is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_cap(args.threads):
            COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    return 0


cli_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
