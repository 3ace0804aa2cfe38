"""Two-level classification: title verdict first, ensemble second.

Level 1 embeds the title and runs the MLP; a missing title bypasses the
stage and contributes a hard 0.  Level 2 consumes the 19 numeric features
plus that bit.  The trained model serializes to one versioned JSON
document (MLP weights, tree node arrays, dictionaries, config snapshot).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import mlp as mlp_mod
from .embedding import BuiltinProvider, EmbeddingProvider, embed_title, embed_titles
from .errors import SingleClassData
from .features import CategoricalDictionary
from .level2 import (
    LEVEL2_DIM,
    backend_from_json,
    backend_to_json,
    make_backend,
)
from .mlp import MlpParams, TrainConfig, mlp_forward, mlp_train
from .types import BinaryLabel, FeatureVector

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainedModel:
    """Everything needed to classify: MLP (None when no titles were seen at
    training time), the level-2 backend, dictionaries and the config."""

    mlp: MlpParams | None
    level2: object
    dictionaries: dict[str, CategoricalDictionary]
    config: TrainConfig

    def predict_one(
        self, fv: FeatureVector, provider: EmbeddingProvider | None = None
    ) -> tuple[BinaryLabel, float]:
        return classify(self, fv, provider or BuiltinProvider())


def level1_classify(
    fv: FeatureVector, model: TrainedModel, provider: EmbeddingProvider
) -> int:
    """Title verdict bit; absent/empty title bypasses embedding and MLP."""
    if fv.title is None or not fv.title.strip():
        return 0
    if model.mlp is None:
        return 0
    probs = mlp_forward(model.mlp, embed_title(fv.title, provider))
    return 1 if int(np.argmax(probs)) == mlp_mod.PGDN_INDEX else 0


def level2_input(fv: FeatureVector, bit: int) -> np.ndarray:
    row = np.empty(LEVEL2_DIM, dtype=np.float64)
    row[:19] = fv.numeric
    row[19] = float(bit)
    return row


def train_two_level(
    data: Sequence[tuple[FeatureVector, BinaryLabel]],
    cfg: TrainConfig,
    provider: EmbeddingProvider | None = None,
) -> TrainedModel:
    """Train the MLP on titled records, then the level-2 backend on all.

    A dataset without a single titled record skips the MLP entirely; every
    level-1 bit is then 0 and level 2 learns from the numerics alone.
    """
    if not data:
        raise SingleClassData("no training data")
    provider = provider or BuiltinProvider()

    titled = [(fv, label) for fv, label in data if fv.title]
    trained_mlp = None
    if titled:
        vectors = embed_titles([fv.title for fv, _ in titled], provider)
        trained_mlp = mlp_train(
            [(vec, label) for vec, (_, label) in zip(vectors, titled)], cfg
        )

    model = TrainedModel(mlp=trained_mlp, level2=None, dictionaries={}, config=cfg)
    bits = [level1_classify(fv, model, provider) for fv, _ in data]
    x = np.stack([level2_input(fv, bit) for (fv, _), bit in zip(data, bits)])
    y = np.array(
        [1 if label is BinaryLabel.PGDN else 0 for _, label in data], dtype=np.int64
    )
    backend = make_backend(cfg.level2_backend, seed=cfg.seed)
    backend.fit(x, y)
    model.level2 = backend
    return model


def classify(
    model: TrainedModel, fv: FeatureVector, provider: EmbeddingProvider | None = None
) -> tuple[BinaryLabel, float]:
    """Total over any feature vector, including the all-zero one."""
    provider = provider or BuiltinProvider()
    bit = level1_classify(fv, model, provider)
    row = level2_input(fv, bit)
    score = float(model.level2.score(row[None, :])[0])
    # every backend's score is calibrated so that > 0.5 means PGDN and an
    # exact tie resolves to benign
    label = BinaryLabel.PGDN if score > 0.5 else BinaryLabel.BENIGN
    return label, score


# ---------------------------------------------------------------------------
# Fold assignment


def stratified_split(
    labels: Sequence[BinaryLabel],
    fraction: float,
    seed: int,
    groups: Sequence[int] | None = None,
) -> tuple[list[int], list[int]]:
    """Stratified train/validation indices with group pinning.

    Records sharing a group id (an augmented copy and its source) always
    land in the same fold, so augmentation can never leak across the
    split.  Stratification operates on the group's label.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    n = len(labels)
    if groups is None:
        groups = list(range(n))
    by_group: dict[int, list[int]] = {}
    for i, g in enumerate(groups):
        by_group.setdefault(g, []).append(i)

    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    group_ids = sorted(by_group)
    group_labels = {g: labels[by_group[g][0]] for g in group_ids}
    for cls in (BinaryLabel.BENIGN, BinaryLabel.PGDN):
        members = [g for g in group_ids if group_labels[g] is cls]
        order = rng.permutation(len(members))
        cut = int(round(fraction * len(members)))
        for pos, j in enumerate(order):
            bucket = train_idx if pos < cut else val_idx
            bucket.extend(by_group[members[j]])
    return sorted(train_idx), sorted(val_idx)


# ---------------------------------------------------------------------------
# Model persistence


def _mlp_to_json(params: MlpParams | None) -> dict | None:
    if params is None:
        return None
    return {
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def _mlp_from_json(obj: dict | None) -> MlpParams | None:
    if obj is None:
        return None
    sizes = obj["layer_sizes"]
    weights = [
        np.asarray(flat, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
        for i, flat in enumerate(obj["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in obj["biases"]]
    return MlpParams(weights, biases)


def model_to_json(model: TrainedModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "config": dataclasses.asdict(model.config),
        "mlp": _mlp_to_json(model.mlp),
        "level2": backend_to_json(model.level2),
        "dictionaries": {k: d.to_json() for k, d in model.dictionaries.items()},
    }


def model_from_json(obj: dict) -> TrainedModel:
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {obj.get('version')}")
    cfg_obj = dict(obj["config"])
    cfg_obj["hidden_sizes"] = tuple(cfg_obj["hidden_sizes"])
    return TrainedModel(
        mlp=_mlp_from_json(obj["mlp"]),
        level2=backend_from_json(obj["level2"]),
        dictionaries={
            k: CategoricalDictionary.from_json(v)
            for k, v in obj["dictionaries"].items()
        },
        config=TrainConfig(**cfg_obj),
    )


def save_model(model: TrainedModel, path: Path) -> None:
    path.write_text(json.dumps(model_to_json(model), sort_keys=True), encoding="utf-8")


def load_model(path: Path) -> TrainedModel:
    return model_from_json(json.loads(path.read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Estimator wrapper


class TwoLevelClassifier(BaseEstimator, ClassifierMixin):
    """Estimator-style wrapper so the model plugs into generic tooling.

    X is a sequence of FeatureVector, y a sequence of BinaryLabel.  All
    constructor arguments are stored verbatim (get_params/set_params work
    as usual); fitted state lives in model_.
    """

    def __init__(
        self,
        level2_backend: str = "forest",
        learning_rate: float = 0.01,
        momentum: float = 0.9,
        batch_size: int = 32,
        epochs: int = 50,
        seed: int = 0,
        hidden_sizes: tuple[int, int] = (128, 32),
        provider: EmbeddingProvider | None = None,
    ) -> None:
        self.level2_backend = level2_backend
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.hidden_sizes = hidden_sizes
        self.provider = provider

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            level2_backend=self.level2_backend,
            hidden_sizes=tuple(self.hidden_sizes),
        )

    def fit(self, X: Sequence[FeatureVector], y: Sequence[BinaryLabel]):
        if len(X) != len(y):
            raise ValueError("X and y must align")
        self.model_ = train_two_level(list(zip(X, y)), self._config(), self.provider)
        self.classes_ = np.array([BinaryLabel.BENIGN, BinaryLabel.PGDN])
        return self

    def predict(self, X: Sequence[FeatureVector]) -> list[BinaryLabel]:
        self._ensure_fitted()
        provider = self.provider or BuiltinProvider()
        return [classify(self.model_, fv, provider)[0] for fv in X]

    def predict_score(self, X: Sequence[FeatureVector]) -> np.ndarray:
        """Level-2 vote fraction (or margin squash) per record."""
        self._ensure_fitted()
        provider = self.provider or BuiltinProvider()
        return np.array([classify(self.model_, fv, provider)[1] for fv in X])

    def score(self, X: Sequence[FeatureVector], y: Sequence[BinaryLabel]) -> float:
        preds = self.predict(X)
        return float(np.mean([p is t for p, t in zip(preds, y)]))

    def _ensure_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise RuntimeError("classifier is not fitted")
