"""Encoder backends: model-hub wrappers plus an offline deterministic dummy.

Every backend exposes ``encode_images(paths) -> (dim, n)`` and/or
``encode_texts(strings) -> (dim, n)`` with one pooled embedding per column.
Real backends import their heavy dependencies lazily and turn resolution
failures into actionable error messages; the ``dummy:<dim>`` backend needs
nothing and hashes content into reproducible pseudo-embeddings, which keeps
the pipeline and its tests runnable on machines without model access.
"""

from __future__ import annotations

import hashlib

import numpy as np


class EncoderResolutionError(RuntimeError):
    """Backend or model could not be loaded; message carries remediation."""


def _hash_vector(payload: bytes, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


class DummyEncoder:
    """Content-hash embeddings: deterministic, offline, structureless."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dummy encoder dim must be positive")
        self.dim = dim
        self.name = f"dummy:{dim}"
        self.pooling = "content-hash"

    def encode_texts(self, texts) -> np.ndarray:
        cols = [_hash_vector(t.encode("utf-8"), self.dim) for t in texts]
        return np.stack(cols, axis=1)

    def encode_images(self, paths) -> np.ndarray:
        cols = []
        for path in paths:
            with open(path, "rb") as fh:
                cols.append(_hash_vector(fh.read(), self.dim))
        return np.stack(cols, axis=1)


class SentenceTransformerEncoder:
    """Pooled sentence embeddings via the sentence-transformers hub."""

    def __init__(self, model_id: str, device: str = "cpu", batch_size: int = 32):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderResolutionError(
                "sentence-transformers is not installed; "
                "run `pip install sentence-transformers` (the 'models' extra)"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id, device=device)
        except Exception as exc:
            raise EncoderResolutionError(
                f"could not load sentence encoder {model_id!r}: {exc}; "
                "check the model id and that the hub is reachable (or pre-download it)"
            ) from exc
        self.name = model_id
        self.pooling = "sentence-transformers native"
        self._batch_size = batch_size

    def encode_texts(self, texts) -> np.ndarray:
        emb = self._model.encode(
            list(texts),
            batch_size=self._batch_size,
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return np.asarray(emb, dtype=np.float64).T


class HubVisionEncoder:
    """Pooled image embeddings via a transformers vision model.

    Uses the pooler output when the model provides one, otherwise the mean
    of the last hidden state (recorded in ``pooling``).
    """

    def __init__(self, model_id: str, device: str = "cpu", batch_size: int = 16):
        try:
            import torch  # noqa: F401
            from transformers import AutoImageProcessor, AutoModel
        except ImportError as exc:
            raise EncoderResolutionError(
                "torch/transformers are not installed; "
                "run `pip install torch transformers` (the 'models' extra)"
            ) from exc
        try:
            self._processor = AutoImageProcessor.from_pretrained(model_id)
            self._model = AutoModel.from_pretrained(model_id).to(device).eval()
        except Exception as exc:
            raise EncoderResolutionError(
                f"could not load vision encoder {model_id!r}: {exc}; "
                "check the model id and that the hub is reachable (or pre-download it)"
            ) from exc
        self.name = model_id
        self.pooling = "pooler_output or mean of last hidden state"
        self._device = device
        self._batch_size = batch_size

    def encode_images(self, paths) -> np.ndarray:
        import torch
        from PIL import Image

        cols = []
        for start in range(0, len(paths), self._batch_size):
            batch_paths = paths[start : start + self._batch_size]
            images = [Image.open(p).convert("RGB") for p in batch_paths]
            inputs = self._processor(images=images, return_tensors="pt").to(self._device)
            with torch.no_grad():
                out = self._model(**inputs)
            pooled = getattr(out, "pooler_output", None)
            if pooled is None:
                pooled = out.last_hidden_state.mean(dim=1)
            cols.append(pooled.cpu().numpy().astype(np.float64).T)
        return np.hstack(cols)


def resolve_text_encoder(encoder_id: str, device: str = "cpu", batch_size: int = 32):
    if encoder_id.startswith("dummy"):
        dim = int(encoder_id.split(":", 1)[1]) if ":" in encoder_id else 64
        return DummyEncoder(dim)
    return SentenceTransformerEncoder(encoder_id, device=device, batch_size=batch_size)


def resolve_vision_encoder(encoder_id: str, device: str = "cpu", batch_size: int = 16):
    if encoder_id.startswith("dummy"):
        dim = int(encoder_id.split(":", 1)[1]) if ":" in encoder_id else 64
        return DummyEncoder(dim)
    return HubVisionEncoder(encoder_id, device=device, batch_size=batch_size)
