"""Dataset-to-EMB1 extraction pipeline for the alignment toolkit."""

from .class_texts import make_class_texts
from .emb1 import read_embeddings, write_embeddings, write_manifest
from .encoders import (
    DummyEncoder,
    EncoderResolutionError,
    resolve_text_encoder,
    resolve_vision_encoder,
)
from .extract import ExtractJob, extract, load_dataset

__version__ = "0.1.0"
