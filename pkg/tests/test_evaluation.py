import datetime as dt
import io
import random

import pytest

from pgdnwatch.errors import EmptyCounts, EmptyDataset, LengthMismatch, MissingTimeline
from pgdnwatch.evaluation import (
    ALL_METHODS,
    ConfusionCounts,
    average_reports,
    confusion,
    forecast_analysis,
    metrics,
    outcomes_csv,
    run_comparison,
    sample_proportion,
)
from pgdnwatch.mlp import TrainConfig
from pgdnwatch.types import BinaryLabel, DomainName, DomainTimeline, FeatureVector, Label

from synthdata import synth_records

P, B = BinaryLabel.PGDN, BinaryLabel.BENIGN


def metrics_oracle(tp, fp, tn, fn):
    """Plain-arithmetic reimplementation used to cross-check metrics()."""
    total = tp + fp + tn + fn
    acc = (tp + tn) / total
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1


class TestConfusion:
    def test_perfect_two_records(self):
        c = confusion([P, B], [P, B])
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)

    def test_total_miss(self):
        c = confusion([P, P, P], [B, B, B])
        assert c.fp == 3 and c.tp == 0

    def test_hand_tallied_ten_records(self):
        preds = [P, P, B, B, P, B, P, B, P, B]
        truth = [P, B, B, P, P, B, B, B, P, P]
        # hand tally: tp rows 0,4,8; fp rows 1,6; fn rows 3,9; tn rows 2,5,7
        c = confusion(preds, truth)
        assert (c.tp, c.fp, c.fn, c.tn) == (3, 2, 2, 3)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([P], [P, B])

    def test_empty_rejected(self):
        with pytest.raises(LengthMismatch):
            confusion([], [])

    def test_permutation_invariance(self):
        rng = random.Random(5)
        preds = [rng.choice([P, B]) for _ in range(40)]
        truth = [rng.choice([P, B]) for _ in range(40)]
        base = metrics(confusion(preds, truth))
        order = list(range(40))
        rng.shuffle(order)
        shuffled = metrics(confusion([preds[i] for i in order], [truth[i] for i in order]))
        assert base == shuffled


class TestMetrics:
    def test_arithmetic_example(self):
        r = metrics(ConfusionCounts(tp=9, fp=1, tn=89, fn=1))
        assert r.accuracy == pytest.approx(0.98, abs=1e-12)
        assert r.precision == pytest.approx(0.9, abs=1e-12)
        assert r.recall == pytest.approx(0.9, abs=1e-12)
        assert r.f1 == pytest.approx(0.9, abs=1e-12)

    def test_all_correct(self):
        r = metrics(ConfusionCounts(tp=5, fp=0, tn=5, fn=0))
        assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
        assert not r.degenerate

    def test_degenerate_precision(self):
        r = metrics(ConfusionCounts(tp=0, fp=0, tn=3, fn=2))
        assert r.precision == 0.0
        assert "precision" in r.degenerate

    def test_empty_counts_rejected(self):
        with pytest.raises(EmptyCounts):
            metrics(ConfusionCounts(0, 0, 0, 0))

    def test_matches_oracle_random_tables(self):
        rng = random.Random(11)
        for _ in range(100):
            tp, fp, tn, fn = (rng.randint(0, 50) for _ in range(4))
            if tp + fp + tn + fn == 0:
                tp = 1
            r = metrics(ConfusionCounts(tp, fp, tn, fn))
            acc, prec, rec, f1 = metrics_oracle(tp, fp, tn, fn)
            assert r.accuracy == pytest.approx(acc, abs=1e-12)
            assert r.precision == pytest.approx(prec, abs=1e-12)
            assert r.recall == pytest.approx(rec, abs=1e-12)
            assert r.f1 == pytest.approx(f1, abs=1e-12)

    def test_f1_harmonic_identity(self):
        rng = random.Random(3)
        for _ in range(50):
            c = ConfusionCounts(*(rng.randint(0, 30) for _ in range(4)))
            if c.total == 0:
                continue
            r = metrics(c)
            if r.precision + r.recall > 0:
                assert r.f1 * (r.precision + r.recall) == pytest.approx(
                    2 * r.precision * r.recall, abs=1e-12
                )

    def test_all_metrics_in_unit_interval(self):
        rng = random.Random(9)
        for _ in range(50):
            c = ConfusionCounts(*(rng.randint(0, 9) for _ in range(4)))
            if c.total == 0:
                continue
            r = metrics(c)
            for v in (r.accuracy, r.precision, r.recall, r.f1):
                assert 0.0 <= v <= 1.0


class TestAveraging:
    def test_single_run_average_is_identity(self):
        r = metrics(ConfusionCounts(3, 1, 4, 2))
        avg = average_reports([r])
        assert (avg.accuracy, avg.precision, avg.recall, avg.f1) == (
            r.accuracy, r.precision, r.recall, r.f1,
        )
        assert avg.runs == 1

    def test_mean_identity(self):
        rng = random.Random(2)
        reports = [metrics(ConfusionCounts(*(rng.randint(1, 20) for _ in range(4))))
                   for _ in range(5)]
        avg = average_reports(reports)
        assert avg.accuracy == pytest.approx(
            sum(r.accuracy for r in reports) / 5, abs=1e-12
        )
        assert avg.f1 == pytest.approx(sum(r.f1 for r in reports) / 5, abs=1e-12)


@pytest.fixture(scope="module")
def report():
    data = synth_records(240, seed=17)
    cfg = TrainConfig(epochs=6, seed=2, hidden_sizes=(12, 6))
    return run_comparison(
        data,
        backends=("numeric-forest", "title-mlp", "two-level-forest"),
        cfg=cfg,
        runs=2,
    )


class TestComparison:
    def test_shapes(self, report):
        assert set(report.per_run) == {"numeric-forest", "title-mlp", "two-level-forest"}
        assert all(len(v) == 2 for v in report.per_run.values())

    def test_average_is_arithmetic_mean(self, report):
        for method, runs in report.per_run.items():
            avg = report.averages[method]
            assert avg.accuracy == pytest.approx(
                sum(r.accuracy for r in runs) / len(runs), abs=1e-12
            )

    def test_csv_layout(self, report):
        buf = io.StringIO()
        report.to_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "method,run,accuracy,precision,recall,f1"
        # 3 methods x (2 runs + 1 average row)
        assert len(lines) == 1 + 3 * 3
        assert sum(1 for l in lines if ",avg," in l) == 3

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            run_comparison(synth_records(40), backends=("boosted",), runs=1)

    def test_all_methods_known(self):
        assert len(ALL_METHODS) == 7


class ScriptedModel:
    """Predicts PGDN from the day scripted into feature index 1."""

    def __init__(self, first_positive):
        self.first_positive = first_positive

    def predict_one(self, fv, provider=None):
        domain_idx = int(fv.numeric[0])
        day = int(fv.numeric[1])
        first = self.first_positive[domain_idx]
        if first is not None and day >= first:
            return BinaryLabel.PGDN, 1.0
        return BinaryLabel.BENIGN, 0.0


def make_timeline(idx, change_day, horizon=20):
    dom = DomainName(f"d{idx}.example.com", "example", "com", dt.date(2024, 8, 10))
    labels = [
        (d, Label.GAMBLING if d >= change_day else Label.OTHERS)
        for d in range(1, horizon + 1)
    ]
    return DomainTimeline(dom, tuple(labels))


def scripted_features(n_domains, horizon=20):
    out = {}
    for i in range(n_domains):
        for day in range(1, horizon + 1):
            numeric = [0.0] * 19
            numeric[0] = float(i)
            numeric[1] = float(day)
            out[(f"d{i}.example.com", day)] = FeatureVector(tuple(numeric))
    return out


class TestForecast:
    def test_hand_case_forecasted(self):
        timelines = [make_timeline(0, change_day=11)]
        model = ScriptedModel({0: 5})
        outcomes, summary = forecast_analysis(timelines, scripted_features(1), model)
        o = outcomes[0]
        assert o.category == "forecasted"
        assert o.days_in_advance == 6
        assert o.forecast_rate == pytest.approx(0.6, abs=1e-12)

    def test_full_lead_time_is_rate_one(self):
        timelines = [make_timeline(0, change_day=11)]
        model = ScriptedModel({0: 1})
        outcomes, _ = forecast_analysis(timelines, scripted_features(1), model)
        assert outcomes[0].days_in_advance == 10
        assert outcomes[0].forecast_rate == pytest.approx(1.0, abs=1e-12)

    def test_same_day(self):
        timelines = [make_timeline(0, change_day=7)]
        model = ScriptedModel({0: 7})
        outcomes, _ = forecast_analysis(timelines, scripted_features(1), model)
        assert outcomes[0].category == "same_day"
        assert outcomes[0].days_in_advance == 0

    def test_delayed_and_never(self):
        timelines = [make_timeline(0, 5), make_timeline(1, 5)]
        model = ScriptedModel({0: 9, 1: None})
        outcomes, summary = forecast_analysis(timelines, scripted_features(2), model)
        assert [o.category for o in outcomes] == ["delayed", "delayed"]
        assert outcomes[0].days_in_advance is None
        assert summary.fractions["delayed"] == 1.0

    def test_partition_is_exhaustive(self):
        timelines = [make_timeline(i, 10) for i in range(6)]
        model = ScriptedModel({0: 3, 1: 10, 2: 15, 3: None, 4: 1, 5: 9})
        outcomes, summary = forecast_analysis(timelines, scripted_features(6), model)
        assert summary.counts == {"forecasted": 3, "same_day": 1, "delayed": 2}
        assert sum(summary.fractions.values()) == pytest.approx(1.0)

    def test_curves_non_decreasing(self):
        timelines = [make_timeline(i, 4 + i) for i in range(5)]
        model = ScriptedModel({0: 2, 1: 6, 2: 5, 3: None, 4: 20})
        _, summary = forecast_analysis(timelines, scripted_features(5), model)
        for col in (1, 2, 3):
            series = [row[col] for row in summary.curves]
            assert series == sorted(series)

    def test_missing_features_rejected(self):
        timelines = [make_timeline(0, 5)]
        with pytest.raises(MissingTimeline):
            forecast_analysis(timelines, {}, ScriptedModel({0: 2}))

    def test_never_changed_timeline_rejected(self):
        dom = DomainName("x.example.com", "example", "com", dt.date(2024, 8, 10))
        tl = DomainTimeline(dom, tuple((d, Label.OTHERS) for d in range(1, 21)))
        with pytest.raises(MissingTimeline):
            forecast_analysis([tl], scripted_features(1), ScriptedModel({0: 1}))

    def test_outcomes_csv(self):
        timelines = [make_timeline(0, 11)]
        outcomes, _ = forecast_analysis(timelines, scripted_features(1),
                                        ScriptedModel({0: 5}))
        buf = io.StringIO()
        outcomes_csv(outcomes, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("fqdn,category,")
        assert lines[1].startswith("d0.example.com,forecasted,11,5,6,0.6")


class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict_one(self, fv, provider=None):
        return self.label, 1.0


class TestSampleProportion:
    def test_constant_classifier_full_fraction(self):
        dataset = [FeatureVector((0.0,) * 19) for _ in range(10)]
        sampled, positive, share = sample_proportion(
            dataset, 1.0, ConstantModel(P), seed=1
        )
        assert (sampled, positive, share) == (10, 10, 1.0)

    def test_seeded_sampling_reproducible(self):
        dataset = [FeatureVector((float(i),) + (0.0,) * 18) for i in range(100)]

        class Recorder:
            def __init__(self):
                self.seen = []

            def predict_one(self, fv, provider=None):
                self.seen.append(fv.numeric[0])
                return B, 0.0

        a, b = Recorder(), Recorder()
        sample_proportion(dataset, 0.3, a, seed=42)
        sample_proportion(dataset, 0.3, b, seed=42)
        assert a.seen == b.seen
        assert len(a.seen) == 30

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            sample_proportion([], 0.5, ConstantModel(P), seed=0)
