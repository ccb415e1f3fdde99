"""Per-class caption generation and embedding for zero-shot classification.

Captions come from each class's lexical entry: lemma names, the gloss
definition, and hypernym names. The entry source is either WordNet (via
nltk, when installed with its corpus) or a plain JSON lexicon of the form
``{class: {"lemmas": [...], "definition": "...", "hypernyms": [...]}}``.
Classes without an entry are skipped with a warning and recorded in the
sidecar. Output ids are ``<class>::<kind><index>`` so consumers can group
columns by the prefix before ``::``.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .emb1 import write_embeddings
from .encoders import resolve_text_encoder


def _wordnet_entry(class_name: str):
    try:
        from nltk.corpus import wordnet
    except ImportError as exc:
        raise RuntimeError(
            "nltk is not installed; install the 'wordnet' extra and download the "
            "corpus with nltk.download('wordnet'), or supply --lexicon JSON"
        ) from exc
    synsets = wordnet.synsets(class_name.replace(" ", "_"))
    if not synsets:
        return None
    synset = synsets[0]
    return {
        "lemmas": [l.name().replace("_", " ") for l in synset.lemmas()],
        "definition": synset.definition(),
        "hypernyms": [
            l.name().replace("_", " ")
            for h in synset.hypernyms()
            for l in h.lemmas()
        ],
    }


def captions_for(class_name: str, entry: dict) -> list[str]:
    lead = entry["lemmas"][0] if entry.get("lemmas") else class_name
    captions = [f"a photo of a {lemma}." for lemma in entry.get("lemmas", [])]
    if entry.get("definition"):
        captions.append(f"{lead}, {entry['definition']}.")
    captions.extend(f"a {lead}, a kind of {h}." for h in entry.get("hypernyms", []))
    if not captions:
        captions = [f"a photo of a {class_name}."]
    return captions


def make_class_texts(
    classes,
    text_encoder: str,
    out_path,
    lexicon_path=None,
    device: str = "cpu",
    batch_size: int = 32,
) -> dict:
    """Embed per-class captions into one EMB1 file; returns a summary."""
    classes = [str(c) for c in classes]
    if not classes:
        raise ValueError("class list is empty")
    lexicon = None
    if lexicon_path is not None:
        with open(lexicon_path, "r", encoding="utf-8") as fh:
            lexicon = json.load(fh)

    encoder = resolve_text_encoder(text_encoder, device=device, batch_size=batch_size)
    all_captions: list[str] = []
    all_ids: list[str] = []
    skipped: list[str] = []
    for class_name in classes:
        entry = lexicon.get(class_name) if lexicon is not None else _wordnet_entry(class_name)
        if entry is None:
            print(f"warning: no lexical entry for {class_name!r}; skipping", file=sys.stderr)
            skipped.append(class_name)
            continue
        captions = captions_for(class_name, entry)
        all_captions.extend(captions)
        all_ids.extend(f"{class_name}::c{i}" for i in range(len(captions)))
    if not all_captions:
        raise ValueError("every class was skipped; nothing to embed")

    emb = encoder.encode_texts(all_captions)
    write_embeddings(out_path, np.asarray(emb), all_ids, modality_tag="class_texts")
    summary = {
        "out": str(out_path),
        "classes": len(classes) - len(skipped),
        "captions": len(all_captions),
        "skipped": skipped,
        "text_encoder": encoder.name,
    }
    with open(f"{out_path}.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary
