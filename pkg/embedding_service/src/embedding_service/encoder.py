"""Sentence encoders producing 384-dimensional unit vectors.

Two backends: a local trainable character-3-gram encoder (hashing into a
vocabulary, summing learned gram embeddings, L2-normalizing) and any
sentence-transformers checkpoint whose output width is 384.  The model
identifier picks the backend, so deployments swap models by config.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

OUTPUT_DIM = 384
LOCAL_MODEL_ID = "char-ngram"

_HASH_PERSON = b"embedsvc-ngram1"  # blake2b person tag, max 16 bytes


def _bucket(gram: str, vocab_size: int) -> int:
    digest = hashlib.blake2b(
        gram.encode("utf-8"), digest_size=8, person=_HASH_PERSON
    ).digest()
    return int.from_bytes(digest, "big") % vocab_size


def _grams(text: str) -> list[str]:
    text = text.lower()
    if len(text) < 3:
        return [text] if text else []
    return [text[i : i + 3] for i in range(len(text) - 2)]


class CharNgramEncoder(nn.Module):
    """Trainable bag-of-3-grams encoder; empty text maps to the zero
    vector, everything else to a unit vector."""

    def __init__(self, vocab_size: int = 2048, dim: int = OUTPUT_DIM,
                 seed: int = 0) -> None:
        super().__init__()
        self.vocab_size = vocab_size
        self.dim = dim
        self.seed = seed
        self.bag = nn.EmbeddingBag(vocab_size, dim, mode="sum")
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.bag.weight.copy_(
                torch.randn(vocab_size, dim, generator=generator) * 0.1
            )

    def forward(self, texts: list[str]) -> torch.Tensor:
        indices: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(indices))
            indices.extend(_bucket(g, self.vocab_size) for g in _grams(text))
        index_tensor = torch.tensor(indices, dtype=torch.long)
        offset_tensor = torch.tensor(offsets, dtype=torch.long)
        if len(indices) == 0:
            summed = torch.zeros(len(texts), self.dim)
        else:
            summed = self.bag(index_tensor, offset_tensor)
        return F.normalize(summed, dim=-1, eps=1e-12)

    def encode(self, texts: list[str]) -> torch.Tensor:
        with torch.no_grad():
            return self.forward(texts)

    def save(self, directory: Path, extra: dict | None = None) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        config = {
            "model": LOCAL_MODEL_ID,
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "seed": self.seed,
        }
        if extra:
            config.update(extra)
        (directory / "config.json").write_text(
            json.dumps(config, indent=1, sort_keys=True), encoding="utf-8"
        )
        torch.save(self.state_dict(), directory / "weights.pt")
        return directory

    @classmethod
    def load(cls, directory: Path) -> "CharNgramEncoder":
        directory = Path(directory)
        config = json.loads((directory / "config.json").read_text(encoding="utf-8"))
        encoder = cls(vocab_size=config["vocab_size"], dim=config["dim"],
                      seed=config.get("seed", 0))
        encoder.load_state_dict(torch.load(directory / "weights.pt",
                                           weights_only=True))
        return encoder


class SentenceTransformerEncoder:
    """Thin adapter around a sentence-transformers checkpoint."""

    def __init__(self, identifier: str) -> None:
        from sentence_transformers import SentenceTransformer

        self.identifier = identifier
        self._model = SentenceTransformer(identifier)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> torch.Tensor:
        vectors = self._model.encode(texts, convert_to_tensor=True,
                                     normalize_embeddings=True)
        return vectors.cpu()


def load_encoder(identifier: str):
    """Pick a backend from the model identifier.

    "char-ngram" (optionally "char-ngram:<seed>") builds the local
    encoder; a filesystem path loads a fine-tuned local model directory;
    anything else is treated as a sentence-transformers checkpoint name.
    """
    if identifier == LOCAL_MODEL_ID:
        return CharNgramEncoder()
    if identifier.startswith(LOCAL_MODEL_ID + ":"):
        return CharNgramEncoder(seed=int(identifier.split(":", 1)[1]))
    path = Path(identifier)
    if (path / "config.json").exists():
        return CharNgramEncoder.load(path)
    return SentenceTransformerEncoder(identifier)
