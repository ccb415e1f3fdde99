"""Command-line entry points for dataset extraction and class-text embedding."""

from __future__ import annotations

import argparse
import json
import sys

from .class_texts import make_class_texts
from .encoders import EncoderResolutionError
from .extract import ExtractJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emb-extract",
        description="Embed image-caption datasets into EMB1 containers for ckamatch.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed a dataset directory")
    p.add_argument("--dataset", required=True, help="directory with captions.json + images")
    p.add_argument("--vision-encoder", default="dummy:64",
                   help="hub model id, or dummy:<dim> for offline runs")
    p.add_argument("--text-encoder", default="dummy:64",
                   help="sentence-transformers id, or dummy:<dim>")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--limit", type=int, default=None, help="embed only the first N records")

    p = sub.add_parser("class-texts", help="embed per-class captions")
    p.add_argument("--classes", default=None, help="comma-separated class names")
    p.add_argument("--classes-file", default=None, help="file with one class per line")
    p.add_argument("--lexicon", default=None,
                   help="JSON lexicon {class: {lemmas, definition, hypernyms}}; "
                        "omit to use WordNet via nltk")
    p.add_argument("--text-encoder", default="dummy:64")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "extract":
            result = extract(
                ExtractJob(
                    dataset=args.dataset,
                    vision_encoder=args.vision_encoder,
                    text_encoder=args.text_encoder,
                    out_prefix=args.out_prefix,
                    batch_size=args.batch_size,
                    device=args.device,
                    limit=args.limit,
                )
            )
        else:
            classes = []
            if args.classes:
                classes.extend(c.strip() for c in args.classes.split(",") if c.strip())
            if args.classes_file:
                with open(args.classes_file, "r", encoding="utf-8") as fh:
                    classes.extend(line.strip() for line in fh if line.strip())
            result = make_class_texts(
                classes,
                text_encoder=args.text_encoder,
                out_path=args.out,
                lexicon_path=args.lexicon,
                device=args.device,
                batch_size=args.batch_size,
            )
        print(json.dumps(result, indent=2))
    except EncoderResolutionError as exc:
        print(f"encoder error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
