"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to watch them stream)."""

import datetime as dt
import math
import random
import time

import numpy as np
import pytest

from pgdnwatch.augment import AugmentationPlan, augment_dataset
from pgdnwatch.classifier import (
    classify,
    level1_classify,
    level2_input,
    train_two_level,
)
from pgdnwatch.collector import (
    ObservationStore,
    VirtualClock,
    run_detection,
)
from pgdnwatch.embedding import (
    BuiltinProvider,
    PairBatch,
    cosent_loss,
    sbert_triplet_loss,
    zero_vector,
)
from pgdnwatch.evaluation import (
    ConfusionCounts,
    forecast_analysis,
    metrics,
    run_comparison,
)
from pgdnwatch.features import ip_url_redirect_metric, oscillating_metric
from pgdnwatch.mlp import (
    MlpParams,
    TrainConfig,
    min_preactivation_gap,
    relative_gradient_error,
)
from pgdnwatch.probers import fixture_probers
from pgdnwatch.suffixes import load_default_suffixes
from pgdnwatch.types import (
    BinaryLabel,
    DomainName,
    DomainTimeline,
    FeatureVector,
    Label,
    parse_domain,
)

from fixturegen import write_fixture
from synthdata import synth_records
from test_features import ip_url_oracle, oscillating_oracle


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[acceptance] {name}: {status}{suffix}")
    assert ok, f"{name} failed: {detail}"


class TestFormulaOracles:
    def test_formula_oracles(self):
        start = time.time()
        rng = random.Random(20240810)
        alphabet = ["a", "b", "c"]
        for _ in range(1000):
            n = rng.randint(1, 6)
            days = [
                {v for v in alphabet if rng.random() < 0.4} for _ in range(n)
            ]
            assert oscillating_metric(days) == oscillating_oracle(days)

        pieces = [
            "http://{ip}/x", "https://{ip}/", 'src="//{ip}/a.js"',
            "ftp://{ip}/pub", "http://{ip}.evil.com/", "http://example.com/",
            "visit {ip} now", "//{ip}:8000/p", "http://{big}/", "<div>win</div>",
        ]
        for _ in range(200):
            parts = []
            for _ in range(rng.randint(1, 12)):
                ip = ".".join(str(rng.randint(0, 255)) for _ in range(4))
                big = ".".join(str(rng.randint(256, 999)) for _ in range(4))
                parts.append(rng.choice(pieces).format(ip=ip, big=big))
            html = " ".join(parts)
            got = ip_url_redirect_metric(html)
            want = ip_url_oracle(html)
            assert abs(got - want) <= 1e-12

        for _ in range(100):
            counts = ConfusionCounts(*(rng.randint(0, 60) for _ in range(4)))
            if counts.total == 0:
                counts = ConfusionCounts(1, 0, 0, 0)
            r = metrics(counts)
            total = counts.total
            acc = (counts.tp + counts.tn) / total
            prec = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
            rec = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert abs(r.accuracy - acc) <= 1e-12
            assert abs(r.precision - prec) <= 1e-12
            assert abs(r.recall - rec) <= 1e-12
            assert abs(r.f1 - f1) <= 1e-12

        elapsed = time.time() - start
        report("formula-oracles", elapsed < 10.0, f"{elapsed:.1f}s")


class TestMlpGradientCheck:
    def test_gradient_check(self):
        start = time.time()
        worst = 0.0
        for seed in range(5):
            params = MlpParams.init((32, 16), np.random.default_rng(seed + 100))
            # central differences need a kink-free evaluation point; redraw
            # the batch until no pre-activation sits near the rectifier
            for attempt in range(100):
                rng = np.random.default_rng(seed * 1000 + attempt)
                x = rng.normal(size=(10, 384))
                y = rng.integers(0, 2, size=10)
                if min_preactivation_gap(params, x) > 1e-3:
                    break
            worst = max(worst, relative_gradient_error(params, x, y))
        elapsed = time.time() - start
        report(
            "mlp-gradient-check",
            worst < 1e-4 and elapsed < 30.0,
            f"max rel err {worst:.2e}, {elapsed:.1f}s",
        )


def vector_at(cosine: float) -> np.ndarray:
    v = zero_vector()
    angle = math.acos(max(-1.0, min(1.0, cosine)))
    v[0], v[1] = math.cos(angle), math.sin(angle)
    return v


def cosent_oracle(pos, neg, scale):
    return math.log(1.0 + sum(
        math.exp(scale * (cn - cp)) for cp in pos for cn in neg
    ))


class TestLossFunctions:
    def test_loss_oracles_and_monotonicity(self):
        rng = np.random.default_rng(20240810)
        base = vector_at(1.0)
        for trial in range(100):
            pos = rng.uniform(-0.95, 0.95, int(rng.integers(1, 5))).tolist()
            neg = rng.uniform(-0.95, 0.95, int(rng.integers(1, 5))).tolist()
            scale = float(rng.uniform(1.0, 25.0))
            batch = PairBatch(
                tuple((base, vector_at(c)) for c in pos),
                tuple((base, vector_at(c)) for c in neg),
                scale,
            )
            got = cosent_loss(batch)
            want = cosent_oracle(pos, neg, scale)
            assert abs(got - want) <= max(1e-9, 1e-9 * abs(want))

            # triplet loss against direct arithmetic
            a, p, n = (rng.normal(size=384) for _ in range(3))
            eps = float(rng.uniform(0, 1))
            direct = max(
                float(np.linalg.norm(a - p)) - float(np.linalg.norm(a - n)) + eps,
                0.0,
            )
            assert abs(sbert_triplet_loss(a, p, n, eps) - direct) <= 1e-9

            # single-pair monotonicity, perturbing the pair behind the
            # dominant exponential term so the change is representable in
            # double precision: the smallest positive cosine and the
            # largest negative cosine
            i = int(np.argmin(pos))
            bumped = list(pos)
            bumped[i] = min(0.999, bumped[i] + 0.05)
            better = cosent_loss(PairBatch(
                tuple((base, vector_at(c)) for c in bumped),
                batch.negative_pairs, scale,
            ))
            assert better < got
            j = int(np.argmax(neg))
            bumped_neg = list(neg)
            bumped_neg[j] = min(0.999, bumped_neg[j] + 0.05)
            worse = cosent_loss(PairBatch(
                batch.positive_pairs,
                tuple((base, vector_at(c)) for c in bumped_neg), scale,
            ))
            assert worse > got
        report("loss-oracles", True, "100 batches, all monotone")


class TestBypassInvariant:
    def test_bypass_forces_zero_and_matches_forced_path(self):
        provider = BuiltinProvider()
        rng = np.random.default_rng(99)
        fvs = []
        for _ in range(500):
            numeric = rng.uniform(0, 50, 19)
            numeric[10] = float(rng.integers(0, 2))
            numeric[14] = float(rng.integers(0, 2))
            title = "casino night" if rng.random() < 0.5 else None
            fvs.append(FeatureVector(tuple(numeric), title))

        checked = 0
        for m in range(50):
            data = synth_records(60, seed=m)
            cfg = TrainConfig(epochs=3, seed=m, hidden_sizes=(8, 4))
            model = train_two_level(data, cfg, provider)
            for fv in fvs[(m * 10) % 490:][:10]:
                untitled = fv.with_title(None)
                bit = level1_classify(untitled, model, provider)
                assert bit == 0
                got = classify(model, untitled, provider)
                row = level2_input(untitled, 0)
                want_score = float(model.level2.score(row[None, :])[0])
                want_label = (BinaryLabel.PGDN if want_score > 0.5
                              else BinaryLabel.BENIGN)
                assert got == (want_label, want_score)
                checked += 1
        report("bypass-invariant", checked == 500, f"{checked} (model, fv) pairs")


SUFFIXES = load_default_suffixes()


class TestCollectorExactlyOnce:
    def test_consumer_counts_agree(self, tmp_path):
        start = time.time()
        fqdns = [f"site{i:02d}.{tld}" for i, tld in
                 zip(range(50), ["com", "top", "xyz", "shop", "online"] * 10)]
        rng = random.Random(1)
        cert_day = {}
        for f in fqdns:
            cert_day[f] = rng.choice([1, 1, 2, 3, None])
        fixture = tmp_path / "fixture.jsonl"
        write_fixture(fixture, fqdns, days=3, seed=11, cert_day=cert_day)
        domains = [parse_domain(f, dt.date(2024, 8, 10), SUFFIXES) for f in fqdns]

        dumps = {}
        keysets = {}
        for consumers in (1, 2, 4, 8):
            store = ObservationStore()
            run_detection(domains, 3, fixture_probers(fixture), store,
                          consumers=consumers, clock=VirtualClock())
            dumps[consumers] = store.canonical_dump()
            keysets[consumers] = store.row_keys()

        identical = all(dumps[k] == dumps[1] for k in (2, 4, 8))

        expected = set()
        for f in fqdns:
            for day in (1, 2, 3):
                expected |= {(f, day, "dns"), (f, day, "ip_history"),
                             (f, day, "html")}
            expected |= {(f, 1, "whois"), (f, 1, "site_history")}
            last_cert_day = cert_day[f] or 3
            expected |= {(f, d, "certificate") for d in range(1, last_cert_day + 1)}
        schedule_ok = keysets[1] == expected

        one_shot_ok = all(
            day == 1
            for f, day, probe in keysets[1]
            if probe in ("whois", "site_history")
        )
        cessation_ok = all(
            not (cert_day[f] and day > cert_day[f])
            for f, day, probe in keysets[1]
            if probe == "certificate"
            for f in [f]
        )
        elapsed = time.time() - start
        report(
            "collector-exactly-once",
            identical and schedule_ok and one_shot_ok and cessation_ok
            and elapsed < 60.0,
            f"{len(expected)} scheduled rows, {elapsed:.1f}s",
        )


class TestAugmentationProportions:
    def test_expansion_proportions(self):
        records = synth_records(2000, seed=0, titled_positive_fraction=1.0,
                                titled_benign_fraction=1.0)
        out = augment_dataset(records, AugmentationPlan(seed=1))
        sizes = {"orig": 0, "discard": 0, "zero": 0, "replace": 0}
        zero_ok = True
        for fv, label, prov in out:
            sizes[prov.strategy] += 1
            if prov.strategy == "zero":
                src = records[prov.source_index][0]
                changed = [i for i in range(19) if fv.numeric[i] != src.numeric[i]]
                if not (1 <= len(changed) <= 5
                        and all(fv.numeric[i] == 0.0 for i in changed)
                        and fv.title == src.title):
                    zero_ok = False
            if label is not records[prov.source_index][1]:
                zero_ok = False
        counts_ok = (len(out) == 4000 and sizes == {
            "orig": 2000, "discard": 400, "zero": 1500, "replace": 100,
        })
        report("augmentation-proportions", counts_ok and zero_ok,
               f"counts {sizes}")


class TestSyntheticEndToEnd:
    def test_five_run_comparison(self):
        start = time.time()
        data = synth_records(2000, seed=42, titled_positive_fraction=0.6)
        cfg = TrainConfig(seed=1)
        result = run_comparison(
            data,
            backends=("numeric-forest", "two-level-forest"),
            cfg=cfg,
            runs=5,
            provider=BuiltinProvider(),
        )
        full = result.averages["two-level-forest"]
        numeric = result.averages["numeric-forest"]
        elapsed = time.time() - start
        report(
            "synthetic-end-to-end",
            full.accuracy >= 0.95
            and full.accuracy > numeric.accuracy
            and elapsed < 300.0,
            f"full {full.accuracy:.4f} > numeric {numeric.accuracy:.4f}, "
            f"{elapsed:.0f}s",
        )


class ScriptedModel:
    def __init__(self, first_positive):
        self.first_positive = first_positive

    def predict_one(self, fv, provider=None):
        idx, day = int(fv.numeric[0]), int(fv.numeric[1])
        first = self.first_positive[idx]
        if first is not None and day >= first:
            return BinaryLabel.PGDN, 1.0
        return BinaryLabel.BENIGN, 0.0


class TestForecastHarness:
    def test_ten_hand_built_timelines(self):
        reg = dt.date(2024, 8, 10)
        change_days = [11, 11, 7, 5, 16, 3, 9, 13, 2, 19]
        first_positive = {0: 5, 1: 1, 2: 7, 3: 9, 4: None, 5: 2, 6: 4, 7: 13,
                          8: 2, 9: 20}
        # hand computation per the lead-time formula
        expected = {
            0: ("forecasted", 6, 6 / 10), 1: ("forecasted", 10, 1.0),
            2: ("same_day", 0, 0.0), 3: ("delayed", None, None),
            4: ("delayed", None, None), 5: ("forecasted", 1, 1 / 2),
            6: ("forecasted", 5, 5 / 8), 7: ("same_day", 0, 0.0),
            8: ("same_day", 0, 0.0), 9: ("delayed", None, None),
        }
        timelines = []
        features = {}
        for i, change in enumerate(change_days):
            fqdn = f"d{i}.example.com"
            dom = DomainName(fqdn, "example", "com", reg)
            labels = tuple(
                (d, Label.PORNOGRAPHY if d >= change else Label.OTHERS)
                for d in range(1, 21)
            )
            timelines.append(DomainTimeline(dom, labels))
            for day in range(1, 21):
                numeric = [0.0] * 19
                numeric[0], numeric[1] = float(i), float(day)
                features[(fqdn, day)] = FeatureVector(tuple(numeric))

        outcomes, summary = forecast_analysis(
            timelines, features, ScriptedModel(first_positive)
        )
        all_ok = True
        for i, outcome in enumerate(outcomes):
            category, days_ahead, rate = expected[i]
            ok = (outcome.category == category
                  and outcome.days_in_advance == days_ahead)
            if rate is None:
                ok = ok and outcome.forecast_rate is None
            else:
                ok = ok and outcome.forecast_rate == pytest.approx(rate, abs=0)
            all_ok = all_ok and ok

        partition_ok = summary.counts == {"forecasted": 4, "same_day": 3,
                                          "delayed": 3}
        curves_ok = all(
            [row[col] for row in summary.curves]
            == sorted(row[col] for row in summary.curves)
            for col in (1, 2, 3)
        )
        report(
            "forecast-harness",
            all_ok and partition_ok and curves_ok,
            f"partition {summary.counts}",
        )
