"""Cosine-similarity-loss fine-tuning of the local encoder.

The objective over a batch of labeled pairs is
log(1 + sum over (pos, neg) combinations of exp(scale * (cos_neg -
cos_pos))): positive pairs are pushed together, negative pairs apart.
Pairs arrive as a CSV of (text_a, text_b, label) with label pos or neg.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import torch

from .encoder import CharNgramEncoder


@dataclass(frozen=True)
class PairSet:
    texts: tuple[str, ...]
    positive: tuple[tuple[int, int], ...]
    negative: tuple[tuple[int, int], ...]


def load_pairs(path: Path) -> PairSet:
    texts: list[str] = []
    index: dict[str, int] = {}
    positive: list[tuple[int, int]] = []
    negative: list[tuple[int, int]] = []

    def intern(text: str) -> int:
        if text not in index:
            index[text] = len(texts)
            texts.append(text)
        return index[text]

    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["text_a", "text_b", "label"]:
            raise ValueError(
                f"{path}: expected header text_a,text_b,label, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: need exactly 3 columns")
            a, b, label = row
            if not a or not b:
                raise ValueError(f"{path}:{lineno}: empty text")
            if label == "pos":
                positive.append((intern(a), intern(b)))
            elif label == "neg":
                negative.append((intern(a), intern(b)))
            else:
                raise ValueError(f"{path}:{lineno}: label must be pos or neg")
    if not positive or not negative:
        raise ValueError(f"{path}: need at least one pos and one neg pair")
    return PairSet(tuple(texts), tuple(positive), tuple(negative))


def pairwise_loss(embeddings: torch.Tensor, pairs: PairSet,
                  scale: float) -> torch.Tensor:
    def cosines(index_pairs):
        left = embeddings[torch.tensor([i for i, _ in index_pairs])]
        right = embeddings[torch.tensor([j for _, j in index_pairs])]
        return torch.nn.functional.cosine_similarity(left, right, dim=-1)

    pos = cosines(pairs.positive)
    neg = cosines(pairs.negative)
    terms = scale * (neg[None, :] - pos[:, None]).reshape(-1)
    zero = torch.zeros(1, dtype=terms.dtype)
    return torch.logsumexp(torch.cat([zero, terms]), dim=0)


def finetune(
    pairs_file: Path,
    scale: float = 20.0,
    epochs: int = 10,
    learning_rate: float = 0.02,
    out_dir: Path = Path("finetuned-model"),
    seed: int = 0,
) -> tuple[Path, list[float]]:
    """Optimize the pair objective; returns (model dir, per-epoch losses).

    losses[0] is computed before any update, so it equals the loss of the
    pristine encoder on the training pairs.
    """
    if scale <= 0:
        raise ValueError("scale must be > 0")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    pairs = load_pairs(Path(pairs_file))
    torch.manual_seed(seed)
    encoder = CharNgramEncoder(seed=seed)
    optimizer = torch.optim.Adam(encoder.parameters(), lr=learning_rate)

    losses: list[float] = []
    for _ in range(epochs):
        embeddings = encoder(list(pairs.texts))
        loss = pairwise_loss(embeddings, pairs, scale)
        losses.append(float(loss.item()))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

    saved = encoder.save(Path(out_dir), extra={
        "finetuned_on": str(pairs_file),
        "scale": scale,
        "epochs": epochs,
        "losses": losses,
    })
    return saved, losses
