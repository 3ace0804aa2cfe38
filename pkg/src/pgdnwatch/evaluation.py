"""Confusion metrics, the multi-method comparison harness, proportion
sampling and the early-forecast case-study analytics.

PGDN is the positive class everywhere.  Degenerate 0/0 ratios score 0 and
are flagged rather than raised, so constant classifiers still produce a
total report.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .classifier import (
    TrainedModel,
    classify,
    stratified_split,
    train_two_level,
)
from .embedding import BuiltinProvider, EmbeddingProvider, embed_title
from .errors import EmptyCounts, EmptyDataset, LengthMismatch, MissingTimeline
from .features import CategoricalDictionary, ReverseCnameIndex, assemble_feature_vector
from .level2 import make_backend
from .mlp import PGDN_INDEX, TrainConfig, mlp_forward, mlp_train
from .types import BinaryLabel, DailyObservation, DomainTimeline, FeatureVector

ALL_METHODS = (
    "numeric-svm",
    "numeric-tree",
    "numeric-forest",
    "title-mlp",
    "two-level-svm",
    "two-level-tree",
    "two-level-forest",
)

_BACKEND_OF = {"svm": "linear_svm", "tree": "tree", "forest": "forest"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    runs: int = 1
    degenerate: frozenset[str] = frozenset()


def confusion(
    preds: Sequence[BinaryLabel], truth: Sequence[BinaryLabel]
) -> ConfusionCounts:
    if len(preds) != len(truth):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(truth)} labels")
    if not preds:
        raise LengthMismatch("need at least one prediction")
    tp = fp = tn = fn = 0
    for p, t in zip(preds, truth):
        if p is BinaryLabel.PGDN:
            if t is BinaryLabel.PGDN:
                tp += 1
            else:
                fp += 1
        else:
            if t is BinaryLabel.PGDN:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def metrics(c: ConfusionCounts) -> EvalReport:
    if c.total == 0:
        raise EmptyCounts("cannot score zero records")
    degenerate = set()

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            degenerate.add(name)
            return 0.0
        return num / den

    accuracy = (c.tp + c.tn) / c.total
    precision = ratio(c.tp, c.tp + c.fp, "precision")
    recall = ratio(c.tp, c.tp + c.fn, "recall")
    if precision + recall == 0.0:
        degenerate.add("f1")
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return EvalReport(accuracy, precision, recall, f1, c,
                      degenerate=frozenset(degenerate))


def average_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Arithmetic mean of each metric; counts are summed."""
    if not reports:
        raise EmptyCounts("nothing to average")
    n = len(reports)
    counts = ConfusionCounts(
        sum(r.counts.tp for r in reports),
        sum(r.counts.fp for r in reports),
        sum(r.counts.tn for r in reports),
        sum(r.counts.fn for r in reports),
    )
    return EvalReport(
        accuracy=sum(r.accuracy for r in reports) / n,
        precision=sum(r.precision for r in reports) / n,
        recall=sum(r.recall for r in reports) / n,
        f1=sum(r.f1 for r in reports) / n,
        counts=counts,
        runs=n,
        degenerate=frozenset().union(*(r.degenerate for r in reports)),
    )


# ---------------------------------------------------------------------------
# Comparison harness


def _run_seed(base: int, run: int) -> int:
    # run-indexed but method-independent, so every method of a run shares
    # the exact same split
    return base * 100003 + run


def _numeric_matrix(records: Sequence[tuple[FeatureVector, BinaryLabel]]) -> np.ndarray:
    return np.array([fv.numeric for fv, _ in records], dtype=np.float64)


def _labels01(records) -> np.ndarray:
    return np.array(
        [1 if lab is BinaryLabel.PGDN else 0 for _, lab in records], dtype=np.int64
    )


def _evaluate_method(
    method: str,
    train: list[tuple[FeatureVector, BinaryLabel]],
    val: list[tuple[FeatureVector, BinaryLabel]],
    cfg: TrainConfig,
    provider: EmbeddingProvider,
) -> EvalReport:
    truth = [lab for _, lab in val]
    if method.startswith("numeric-"):
        backend = make_backend(_BACKEND_OF[method.split("-", 1)[1]], seed=cfg.seed)
        backend.fit(_numeric_matrix(train), _labels01(train))
        scores = backend.score(_numeric_matrix(val))
        preds = [BinaryLabel.PGDN if s > 0.5 else BinaryLabel.BENIGN for s in scores]
    elif method == "title-mlp":
        titled = [(embed_title(fv.title, provider), lab)
                  for fv, lab in train if fv.title]
        params = mlp_train(titled, cfg)
        preds = []
        for fv, _ in val:
            if not fv.title:
                preds.append(BinaryLabel.BENIGN)  # bypass contributes 0
                continue
            probs = mlp_forward(params, embed_title(fv.title, provider))
            preds.append(
                BinaryLabel.PGDN if int(np.argmax(probs)) == PGDN_INDEX
                else BinaryLabel.BENIGN
            )
    elif method.startswith("two-level-"):
        backend = _BACKEND_OF[method.split("-")[2]]
        run_cfg = TrainConfig(
            learning_rate=cfg.learning_rate, momentum=cfg.momentum,
            batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed,
            split_fraction=cfg.split_fraction, level2_backend=backend,
            hidden_sizes=cfg.hidden_sizes,
        )
        model = train_two_level(train, run_cfg, provider)
        preds = [classify(model, fv, provider)[0] for fv, _ in val]
    else:
        raise ValueError(f"unknown method: {method!r}")
    return metrics(confusion(preds, truth))


@dataclass(frozen=True)
class ComparisonReport:
    per_run: dict[str, list[EvalReport]]
    averages: dict[str, EvalReport]
    runs: int

    def to_csv(self, fh: TextIO) -> None:
        fh.write("method,run,accuracy,precision,recall,f1\n")
        for method, reports in self.per_run.items():
            for i, r in enumerate(reports, start=1):
                fh.write(
                    f"{method},{i},{r.accuracy:.6f},{r.precision:.6f},"
                    f"{r.recall:.6f},{r.f1:.6f}\n"
                )
            avg = self.averages[method]
            fh.write(
                f"{method},avg,{avg.accuracy:.6f},{avg.precision:.6f},"
                f"{avg.recall:.6f},{avg.f1:.6f}\n"
            )

    def summary_text(self) -> str:
        lines = [
            f"{'method':<18} {'accuracy':>9} {'precision':>10} {'recall':>8} {'f1':>8}   (mean of {self.runs} runs)"
        ]
        for method, avg in self.averages.items():
            lines.append(
                f"{method:<18} {avg.accuracy:>9.4f} {avg.precision:>10.4f} "
                f"{avg.recall:>8.4f} {avg.f1:>8.4f}"
            )
        return "\n".join(lines)


def run_comparison(
    data: Sequence[tuple[FeatureVector, BinaryLabel]],
    backends: Sequence[str] | None = None,
    cfg: TrainConfig | None = None,
    runs: int = 5,
    provider: EmbeddingProvider | None = None,
    groups: Sequence[int] | None = None,
) -> ComparisonReport:
    """Train/evaluate every method over `runs` re-splits.

    Each run re-splits the data with a run-indexed seed; within a run all
    methods see the identical split, so method orderings are paired
    comparisons.  Group ids (augmentation sources) pin related records to
    one fold.
    """
    methods = tuple(backends) if backends else ALL_METHODS
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method: {m!r}")
    cfg = cfg or TrainConfig()
    provider = provider or BuiltinProvider()
    labels = [lab for _, lab in data]

    per_run: dict[str, list[EvalReport]] = {m: [] for m in methods}
    for run in range(runs):
        seed = _run_seed(cfg.seed, run)
        train_idx, val_idx = stratified_split(
            labels, cfg.split_fraction, seed, groups=groups
        )
        train = [data[i] for i in train_idx]
        val = [data[i] for i in val_idx]
        run_cfg = TrainConfig(
            learning_rate=cfg.learning_rate, momentum=cfg.momentum,
            batch_size=cfg.batch_size, epochs=cfg.epochs, seed=seed,
            split_fraction=cfg.split_fraction, level2_backend=cfg.level2_backend,
            hidden_sizes=cfg.hidden_sizes,
        )
        for method in methods:
            per_run[method].append(
                _evaluate_method(method, train, val, run_cfg, provider)
            )

    averages = {m: average_reports(per_run[m]) for m in methods}
    return ComparisonReport(per_run=per_run, averages=averages, runs=runs)


# ---------------------------------------------------------------------------
# Proportion sampling


def sample_proportion(
    dataset: Sequence[FeatureVector],
    fraction: float,
    model: TrainedModel,
    seed: int,
    provider: EmbeddingProvider | None = None,
) -> tuple[int, int, float]:
    """Classify a seeded uniform sample; returns (sampled, positive, share)."""
    if not dataset:
        raise EmptyDataset("nothing to sample")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    provider = provider or BuiltinProvider()
    k = max(1, round(len(dataset) * fraction))
    rng = random.Random(seed)
    picked = rng.sample(range(len(dataset)), k)
    positive = 0
    for i in picked:
        label, _ = model.predict_one(dataset[i], provider)
        positive += label is BinaryLabel.PGDN
    return k, positive, positive / k


# ---------------------------------------------------------------------------
# Forecast case study

CATEGORY_FORECASTED = "forecasted"
CATEGORY_SAME_DAY = "same_day"
CATEGORY_DELAYED = "delayed"


@dataclass(frozen=True)
class ForecastOutcome:
    fqdn: str
    category: str
    date_of_change: int
    first_positive_day: int | None
    days_in_advance: int | None
    forecast_rate: float | None


@dataclass(frozen=True)
class ForecastSummary:
    total: int
    counts: dict[str, int]
    fractions: dict[str, float]
    curves: tuple[tuple[int, int, int, int], ...] = field(default=())
    # curves rows: (day, changed_cum, forecast_cum, detected_cum)

    def curves_csv(self, fh: TextIO) -> None:
        fh.write("day,changed_cum,forecast_cum,detected_cum\n")
        for day, changed, forecast, detected in self.curves:
            fh.write(f"{day},{changed},{forecast},{detected}\n")


def forecast_analysis(
    timelines: Sequence[DomainTimeline],
    per_day_features: Mapping[tuple[str, int], FeatureVector],
    model,
    provider: EmbeddingProvider | None = None,
) -> tuple[list[ForecastOutcome], ForecastSummary]:
    """Classify each domain day by day with prefix features and bucket the
    outcome against its date of change.

    The model is anything with ``predict_one(feature_vector, provider)``;
    a domain predicted positive before its change day is forecasted, on
    the day is same-day, after it (or never inside the horizon) delayed.
    """
    provider = provider or BuiltinProvider()
    outcomes = []
    for tl in timelines:
        change = tl.date_of_change
        if change is None:
            raise MissingTimeline(f"{tl.domain.fqdn} never turns PGDN")
        first_positive = None
        for day in range(1, tl.horizon + 1):
            key = (tl.domain.fqdn, day)
            if key not in per_day_features:
                raise MissingTimeline(f"no features for {key}")
            label, _ = model.predict_one(per_day_features[key], provider)
            if label is BinaryLabel.PGDN:
                first_positive = day
                break

        if first_positive is not None and first_positive < change:
            days_ahead = change - first_positive
            rate = days_ahead / (change - 1) if change > 1 else None
            outcomes.append(ForecastOutcome(
                tl.domain.fqdn, CATEGORY_FORECASTED, change,
                first_positive, days_ahead, rate,
            ))
        elif first_positive == change:
            rate = 0.0 if change > 1 else None
            outcomes.append(ForecastOutcome(
                tl.domain.fqdn, CATEGORY_SAME_DAY, change, first_positive, 0, rate,
            ))
        else:
            outcomes.append(ForecastOutcome(
                tl.domain.fqdn, CATEGORY_DELAYED, change, first_positive, None, None,
            ))

    horizon = max(tl.horizon for tl in timelines) if timelines else 0
    curves = []
    for day in range(1, horizon + 1):
        changed = sum(o.date_of_change <= day for o in outcomes)
        forecast = sum(
            o.category == CATEGORY_FORECASTED and o.first_positive_day <= day
            for o in outcomes
        )
        detected = sum(
            o.first_positive_day is not None
            and max(o.first_positive_day, o.date_of_change) <= day
            for o in outcomes
        )
        curves.append((day, changed, forecast, detected))

    counts = {c: 0 for c in (CATEGORY_FORECASTED, CATEGORY_SAME_DAY, CATEGORY_DELAYED)}
    for o in outcomes:
        counts[o.category] += 1
    total = len(outcomes)
    fractions = {c: (counts[c] / total if total else 0.0) for c in counts}
    summary = ForecastSummary(total, counts, fractions, tuple(curves))
    return outcomes, summary


def outcomes_csv(outcomes: Iterable[ForecastOutcome], fh: TextIO) -> None:
    fh.write("fqdn,category,date_of_change,first_positive_day,days_in_advance,forecast_rate\n")
    for o in outcomes:
        first = "" if o.first_positive_day is None else o.first_positive_day
        days = "" if o.days_in_advance is None else o.days_in_advance
        rate = "" if o.forecast_rate is None else repr(o.forecast_rate)
        fh.write(f"{o.fqdn},{o.category},{o.date_of_change},{first},{days},{rate}\n")


# ---------------------------------------------------------------------------
# Prefix-window feature assembly for forecasting


def prefix_feature_map(
    observations: Sequence[DailyObservation],
    dictionaries: Mapping[str, CategoricalDictionary],
    cname_index: ReverseCnameIndex,
    horizon: int,
) -> dict[tuple[str, int], FeatureVector]:
    """Day-d features use only observations with day_index <= d, so the
    forecast never peeks ahead."""
    by_domain: dict[str, list[DailyObservation]] = {}
    for obs in observations:
        by_domain.setdefault(obs.domain.fqdn, []).append(obs)
    out: dict[tuple[str, int], FeatureVector] = {}
    for fqdn, obs_list in by_domain.items():
        obs_list.sort(key=lambda o: o.day_index)
        for day in range(1, horizon + 1):
            window = [o for o in obs_list if o.day_index <= day]
            if window:
                out[(fqdn, day)] = assemble_feature_vector(
                    window, dictionaries, cname_index
                )
    return out
