"""Title embeddings and the similarity losses used to train them.

A title becomes a 384-dimensional unit vector.  The built-in embedder
hashes character 3-grams and needs no model or network; a remote provider
speaking the /embed wire protocol can be swapped in by config.  An absent
or empty title is the all-zero vector and never contacts a provider.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import BadDimension, ProviderUnavailable

EMBEDDING_DIM = 384

#: Personalization string fed to blake2b; this is the documented hash seed
#: that makes bucket assignment identical on every platform and process.
HASH_PERSON = b"pgdn-ngram-v1"


def zero_vector() -> np.ndarray:
    return np.zeros(EMBEDDING_DIM, dtype=np.float64)


def is_zero_vector(v: np.ndarray) -> bool:
    return not np.any(v)


def _bucket(gram: str) -> int:
    digest = hashlib.blake2b(
        gram.encode("utf-8"), digest_size=8, person=HASH_PERSON
    ).digest()
    return int.from_bytes(digest, "big") % EMBEDDING_DIM


def builtin_embed(title: str) -> np.ndarray:
    """Hash character 3-grams of the lowercased title into 384 buckets.

    Strings shorter than three characters hash as a single gram so every
    non-empty title still gets a unit vector.
    """
    if not title:
        raise ValueError("builtin_embed needs a non-empty string")
    text = title.lower()
    v = zero_vector()
    if len(text) < 3:
        v[_bucket(text)] += 1.0
    else:
        for i in range(len(text) - 2):
            v[_bucket(text[i : i + 3])] += 1.0
    return v / np.linalg.norm(v)


class EmbeddingProvider(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class BuiltinProvider:
    """In-process provider backed by the 3-gram hash embedder."""

    name = "builtin"

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [builtin_embed(t) for t in texts]


class HttpProvider:
    """Client for the batch embedding wire protocol.

    POST {base_url}/embed with {"texts": [...]}; the response carries
    {"vectors": [[...384 floats...], ...], "dim": 384}.
    """

    name = "http"

    def __init__(self, base_url: str, timeout: float = 10.0,
                 session: requests.Session | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            resp = self._session.post(
                f"{self.base_url}/embed", json={"texts": list(texts)},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"embedding provider unreachable: {exc}") from exc
        if resp.status_code >= 400:
            raise ProviderUnavailable(
                f"embedding provider returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProviderUnavailable(
                f"embedding provider sent a non-JSON response: {exc}"
            ) from exc
        vectors = payload.get("vectors", [])
        if len(vectors) != len(texts):
            raise BadDimension(
                f"provider returned {len(vectors)} vectors for {len(texts)} texts"
            )
        out = []
        for vec in vectors:
            if len(vec) != EMBEDDING_DIM:
                raise BadDimension(
                    f"provider returned {len(vec)}-dim vector, need {EMBEDDING_DIM}"
                )
            out.append(np.asarray(vec, dtype=np.float64))
        return out


def make_provider(name: str, url: str = "") -> EmbeddingProvider:
    if name == "builtin":
        return BuiltinProvider()
    if name == "http":
        if not url:
            raise ValueError("http provider needs a url")
        return HttpProvider(url)
    raise ValueError(f"unknown embedding provider: {name!r}")


def embed_title(title: str | None, provider: EmbeddingProvider) -> np.ndarray:
    """Unit-norm embedding of a title; zero vector for absent/empty."""
    if title is None or not title.strip():
        return zero_vector()
    vec = provider.embed_batch([title])[0]
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return zero_vector()
    return vec / norm


def embed_titles(titles: Sequence[str | None], provider: EmbeddingProvider) -> list[np.ndarray]:
    """Batch variant of embed_title; non-empty titles go out in one call."""
    real = [(i, t) for i, t in enumerate(titles) if t is not None and t.strip()]
    out = [zero_vector() for _ in titles]
    if real:
        vectors = provider.embed_batch([t for _, t in real])
        for (i, _), vec in zip(real, vectors):
            norm = np.linalg.norm(vec)
            out[i] = vec / norm if norm else zero_vector()
    return out


def cosine_similarity(u: np.ndarray, v: np.ndarray, *, with_flag: bool = False):
    """Standard cosine; a zero vector yields 0.0 with the degenerate flag.

    Pass with_flag=True to receive (value, degenerate) instead of the bare
    value.
    """
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return (0.0, True) if with_flag else 0.0
    value = float(np.dot(u, v) / (nu * nv))
    value = max(-1.0, min(1.0, value))
    return (value, False) if with_flag else value


def sbert_triplet_loss(
    anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray, epsilon: float
) -> float:
    """Hinge on the anchor-positive vs anchor-negative distance gap."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    gap = (
        float(np.linalg.norm(anchor - positive))
        - float(np.linalg.norm(anchor - negative))
        + epsilon
    )
    return max(gap, 0.0)


@dataclass(frozen=True)
class PairBatch:
    """Positive and negative embedding pairs plus the exponential scale."""

    positive_pairs: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    negative_pairs: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    scale: float = 20.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "positive_pairs", tuple(self.positive_pairs))
        object.__setattr__(self, "negative_pairs", tuple(self.negative_pairs))
        if self.scale <= 0:
            raise ValueError("scale must be > 0")


def cosent_loss(batch: PairBatch) -> float:
    """log(1 + sum over pos x neg of exp(scale * (cos_neg - cos_pos))).

    Empty pair sets give exactly 0.  Uses log-sum-exp so huge scale values
    cannot overflow.
    """
    if not batch.positive_pairs or not batch.negative_pairs:
        return 0.0
    pos = np.array([cosine_similarity(u, v) for u, v in batch.positive_pairs])
    neg = np.array([cosine_similarity(u, v) for u, v in batch.negative_pairs])
    terms = batch.scale * (neg[None, :] - pos[:, None]).ravel()
    peak = float(np.max(terms))
    log_sum = peak + float(np.log(np.sum(np.exp(terms - peak))))
    # log(1 + e^log_sum) without overflow
    return float(np.logaddexp(0.0, log_sum))
