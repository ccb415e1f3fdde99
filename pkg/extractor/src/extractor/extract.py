"""Embed an image-caption dataset into EMB1 containers plus a manifest.

Dataset layout: a directory containing ``captions.json``, a list of
``{"id": ..., "image": <relative path>, "caption": <text>}`` records, and
the referenced image files. When a dataset offers multiple captions per
image, the file is expected to carry the chosen one (first by dataset
order is the convention used by the bundled converters); the policy is
recorded in the manifest sidecar metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .emb1 import write_embeddings, write_manifest
from .encoders import resolve_text_encoder, resolve_vision_encoder


@dataclass(frozen=True)
class ExtractJob:
    dataset: str
    vision_encoder: str
    text_encoder: str
    out_prefix: str
    batch_size: int = 16
    device: str = "cpu"
    limit: int | None = None


def load_dataset(root) -> list[dict]:
    root = Path(root)
    captions = root / "captions.json"
    if not captions.is_file():
        raise FileNotFoundError(
            f"{captions} not found; the dataset directory must hold captions.json "
            "([{'id', 'image', 'caption'}, ...]) and the referenced images"
        )
    with open(captions, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    out = []
    seen = set()
    for rec in records:
        item_id = str(rec["id"])
        if item_id in seen:
            raise ValueError(f"duplicate dataset id {item_id!r}")
        seen.add(item_id)
        image = root / rec["image"]
        if not image.is_file():
            raise FileNotFoundError(f"dataset image missing: {image}")
        out.append({"id": item_id, "image": str(image), "caption": str(rec["caption"])})
    if not out:
        raise ValueError(f"{captions} holds no records")
    return out


def extract(job: ExtractJob) -> dict:
    """Run both encoders over the dataset; returns the written paths."""
    records = load_dataset(job.dataset)
    if job.limit is not None:
        records = records[: job.limit]
    ids = [r["id"] for r in records]

    vision = resolve_vision_encoder(job.vision_encoder, job.device, job.batch_size)
    text = resolve_text_encoder(job.text_encoder, job.device, job.batch_size)

    image_emb = vision.encode_images([r["image"] for r in records])
    text_emb = text.encode_texts([r["caption"] for r in records])

    left_path = f"{job.out_prefix}_left.emb"
    right_path = f"{job.out_prefix}_right.emb"
    manifest_path = f"{job.out_prefix}_manifest.json"
    meta_path = f"{job.out_prefix}_meta.json"

    write_embeddings(left_path, image_emb, ids, modality_tag="image")
    write_embeddings(right_path, text_emb, ids, modality_tag="text")
    write_manifest(manifest_path, [(i, i) for i in ids], role="full")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "dataset": str(job.dataset),
                "count": len(ids),
                "vision_encoder": vision.name,
                "vision_pooling": vision.pooling,
                "text_encoder": text.name,
                "text_pooling": text.pooling,
                "caption_policy": "one caption per image as listed in captions.json",
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return {
        "left": left_path,
        "right": right_path,
        "manifest": manifest_path,
        "meta": meta_path,
        "count": len(ids),
    }
