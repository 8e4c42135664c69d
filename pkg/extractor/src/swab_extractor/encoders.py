"""Text and image encoders behind a common batch interface.

Fixture encoders derive every vector from a SHA-256 of (encoder id, payload),
so outputs are byte-stable across runs and machines without any model
download. Real encoders are optional imports.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .spec import ExtractionError


def _hash_normal(key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


def _hash_uniform(key: str) -> float:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") / 2**64


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v if n == 0 else v / n


class FixtureTextEncoder:
    """Deterministic stand-in for a sentence/text encoder."""

    def __init__(self, name: str, dim: int):
        self.name = name
        self.dim = dim

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.vstack([
            _unit(_hash_normal(f"text|{self.name}|{t}", self.dim)) for t in texts
        ])


class FixtureImageEncoder:
    """Fabricates per-class image features around the class text prototype.

    Every class gets a deterministic offset from its prototype, and every
    encoder gets a deterministic noise level ("skill"), so accuracies land
    strictly inside (0, 1) and differ across models. In passthrough mode the
    images equal the prototype exactly and gap vectors vanish.
    """

    def __init__(self, name: str, dim: int, passthrough: bool = False):
        self.name = name
        self.dim = dim
        self.passthrough = passthrough
        self.noise_level = 0.25 + 0.45 * _hash_uniform(f"skill|{name}")

    def encode_class_images(
        self, dataset: str, class_name: str, prototype: np.ndarray, count: int
    ) -> np.ndarray:
        if prototype.shape != (self.dim,):
            raise ExtractionError(
                f"{self.name}: prototype dim {prototype.shape} != {self.dim}"
            )
        if self.passthrough:
            return np.tile(prototype, (count, 1))
        magnitude = 0.15 + 0.5 * _hash_uniform(f"gapmag|{self.name}|{class_name}")
        offset = magnitude * _unit(
            _hash_normal(f"gap|{self.name}|{class_name}", self.dim)
        )
        rows = []
        for i in range(count):
            jitter = self.noise_level * _hash_normal(
                f"img|{self.name}|{dataset}|{class_name}|{i}", self.dim
            )
            rows.append(_unit(prototype) + offset + jitter)
        return np.vstack(rows)


class SentenceTransformerEncoder:
    """Real sentence encoder; requires the sentence-transformers extra."""

    def __init__(self, model_name: str, batch_size: int = 32):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ExtractionError(
                "sentence-transformers is not installed; use fixture encoders "
                "or install the 'encoders' extra"
            ) from exc
        self.model = SentenceTransformer(model_name)
        self.batch_size = batch_size
        self.name = model_name
        self.dim = self.model.get_sentence_embedding_dimension()

    def encode(self, texts: list[str]) -> np.ndarray:  # pragma: no cover
        return np.asarray(
            self.model.encode(texts, batch_size=self.batch_size,
                              convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float64,
        )


def make_text_encoder(identifier: str, batch_size: int = 32):
    """"fixture:<name>:<dim>" or "sbert:<model-name>"."""
    parts = identifier.split(":")
    if parts[0] == "fixture":
        if len(parts) != 3:
            raise ExtractionError(f"bad fixture encoder id {identifier!r}")
        return FixtureTextEncoder(parts[1], int(parts[2]))
    if parts[0] == "sbert":
        return SentenceTransformerEncoder(":".join(parts[1:]), batch_size)
    raise ExtractionError(f"unknown encoder kind in {identifier!r}")


def make_image_encoder(identifier: str, passthrough: bool = False):
    parts = identifier.split(":")
    if parts[0] == "fixture":
        if len(parts) != 3:
            raise ExtractionError(f"bad fixture encoder id {identifier!r}")
        return FixtureImageEncoder(parts[1], int(parts[2]), passthrough)
    raise ExtractionError(
        f"image extraction supports fixture encoders only, got {identifier!r}"
    )
