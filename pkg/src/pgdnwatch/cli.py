"""Operator command line: ingest, collect, extract, train, evaluate,
forecast and friends.

Every subcommand is deterministic given identical inputs and seeds, exits
0 exactly when its artifact was produced, and reports failures as one
machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from .augment import AugmentationPlan, augment_dataset
from .classifier import load_model, save_model, train_two_level
from .collector import ObservationStore, VirtualClock, run_detection
from .config import AppConfig, load_config
from .embedding import make_provider
from .errors import ArtifactMissing, PgdnError
from .evaluation import (
    forecast_analysis,
    outcomes_csv,
    prefix_feature_map,
    run_comparison,
    sample_proportion,
)
from .features import FeatureExtractor, load_dictionaries, save_dictionaries
from .mlp import TrainConfig
from .nrd2024 import load_dump
from .probers import (
    LiveCertProber,
    LiveDnsProber,
    LiveHtmlProber,
    LiveWhoisProber,
    fixture_probers,
)
from .collector import ProbeType
from .serialize import (
    read_feature_csv,
    write_feature_csv,
)
from .suffixes import load_default_suffixes
from .timelines import load_single_day, load_timelines
from .types import DomainName, binarize
from . import serialize

LEVEL2_ALIASES = {
    "rf": "forest", "forest": "forest",
    "dt": "tree", "tree": "tree",
    "svm": "linear_svm", "linear_svm": "linear_svm",
}


def _ensure(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise ArtifactMissing(f"{what} not found at {path}")
    return Path(path)


def _load_domains(path: Path) -> list[DomainName]:
    domains = []
    with open(_ensure(path, "ingested domain list"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                domains.append(serialize._domain_from_json(json.loads(line)))
    return domains


def _write_domains(domains, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in sorted(domains, key=lambda d: d.fqdn):
            fh.write(json.dumps(serialize._domain_to_json(d), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(cfg: AppConfig, args) -> int:
    from .types import parse_domain
    from .errors import MalformedDomain

    src = _ensure(Path(args.nrd_list), "domain list file")
    date = dt.date.fromisoformat(args.date)
    suffixes = load_default_suffixes()
    domains: dict[str, DomainName] = {}
    rejects = []
    for lineno, raw in enumerate(src.read_text(encoding="utf-8").splitlines(), 1):
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        try:
            d = parse_domain(raw, date, suffixes)
        except MalformedDomain as exc:
            rejects.append((lineno, raw, str(exc)))
            continue
        domains.setdefault(d.fqdn, d)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_domains(domains.values(), cfg.domains_path)
    print(f"ingested {len(domains)} domains -> {cfg.domains_path}")
    if rejects:
        report = cfg.out_dir / "ingest_rejects.csv"
        with open(report, "w", encoding="utf-8") as fh:
            fh.write("line,entry,reason\n")
            for lineno, raw, reason in rejects:
                fh.write(f"{lineno},{raw},{reason}\n")
        print(f"rejected {len(rejects)} entries -> {report}")
    return 0


def cmd_collect(cfg: AppConfig, args) -> int:
    if args.days < 1:
        raise PgdnError("--days must be >= 1")
    domains = _load_domains(cfg.domains_path)
    if args.fixture:
        probers = fixture_probers(_ensure(Path(args.fixture), "fixture file"))
    elif args.live:
        fixture_backed = {}
        if cfg.fixture_path:
            fixture_backed = fixture_probers(cfg.fixture_path)

        class _Absent:
            def probe(self, task):
                return None

        absent = _Absent()
        probers = {
            ProbeType.DNS: LiveDnsProber(),
            ProbeType.HTML: LiveHtmlProber(),
            ProbeType.CERTIFICATE: LiveCertProber(),
            ProbeType.WHOIS: LiveWhoisProber(),
            # third-party directions stay fixture-backed stubs
            ProbeType.IP_HISTORY: fixture_backed.get(ProbeType.IP_HISTORY, absent),
            ProbeType.SITE_HISTORY: fixture_backed.get(ProbeType.SITE_HISTORY, absent),
        }
    else:
        raise PgdnError("choose --fixture FILE or --live")

    store = ObservationStore()
    run_detection(domains, args.days, probers, store,
                  consumers=args.consumers or cfg.consumers,
                  clock=VirtualClock())
    cfg.store_path.parent.mkdir(parents=True, exist_ok=True)
    count = store.save(cfg.store_path)
    print(f"collected {count} observations over {args.days} day(s) -> {cfg.store_path}")
    return 0


def cmd_load_nrd2024(cfg: AppConfig, args) -> int:
    dump = _ensure(Path(args.dump), "dataset dump")
    store = (ObservationStore.load(cfg.store_path)
             if cfg.store_path.exists() else ObservationStore())
    report = load_dump(dump, store)
    cfg.store_path.parent.mkdir(parents=True, exist_ok=True)
    store.save(cfg.store_path)
    print(f"imported {report.imported} records -> {cfg.store_path}")
    if report.rejects:
        print(f"skipped {len(report.rejects)} bad rows "
              f"(first: line {report.rejects[0][0]}: {report.rejects[0][1]})")
    return 0


def _windows_from_store(store: ObservationStore):
    by_domain: dict[str, list] = {}
    for obs in store.observations():
        by_domain.setdefault(obs.domain.fqdn, []).append(obs)
    windows = []
    for fqdn in sorted(by_domain):
        window = sorted(by_domain[fqdn], key=lambda o: o.day_index)
        windows.append(window)
    return windows


def cmd_extract(cfg: AppConfig, args) -> int:
    store = ObservationStore.load(_ensure(cfg.store_path, "observation store"))
    windows = _windows_from_store(store)
    extractor = FeatureExtractor()
    features = extractor.fit_transform(windows)
    save_dictionaries(extractor.dictionaries_, cfg.dictionaries_path)

    out = Path(args.out or cfg.out_dir / "features.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [(w[0].domain.fqdn, fv) for w, fv in zip(windows, features)]
    with open(out, "w", encoding="utf-8") as fh:
        write_feature_csv(fh, rows, with_fqdn=True)
    print(f"extracted {len(rows)} feature rows -> {out}")
    print(f"dictionaries -> {cfg.dictionaries_path}")
    return 0


def _read_features(path: Path, what: str) -> list[dict]:
    with open(_ensure(path, what), encoding="utf-8") as fh:
        return read_feature_csv(fh)


def _read_labeled(features_path: Path, labels_path: Path):
    rows = _read_features(features_path, "feature matrix")
    labels = {fqdn: binarize(lab)
              for fqdn, _, lab in load_single_day(_ensure(labels_path, "label file"))}
    labeled = []
    for rec in rows:
        fqdn = rec.get("fqdn")
        if fqdn in labels:
            labeled.append((fqdn, rec["features"], labels[fqdn]))
    if not labeled:
        raise PgdnError("no overlap between feature rows and label rows")
    return labeled


def _read_augmented(path: Path):
    rows = _read_features(path, "augmented matrix")
    out = []
    for rec in rows:
        if "label" not in rec:
            raise PgdnError(f"{path} rows carry no label column")
        out.append((rec.get("fqdn", ""), rec["features"], rec["label"]))
    return out


def cmd_augment(cfg: AppConfig, args) -> int:
    labeled = _read_labeled(Path(args.features), Path(args.labels))
    records = [(fv, lab) for _, fv, lab in labeled]
    plan = AugmentationPlan(seed=cfg.seed)
    augmented = augment_dataset(records, plan)

    out = Path(args.out or cfg.out_dir / "augmented.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for fv, lab, prov in augmented:
        source_fqdn = labeled[prov.source_index][0]
        rows.append((source_fqdn, fv, lab, prov.strategy))
    with open(out, "w", encoding="utf-8") as fh:
        write_feature_csv(fh, rows, with_fqdn=True, with_label=True, with_aug=True)
    print(f"augmented {len(records)} -> {len(augmented)} records -> {out}")
    return 0


def _train_config(cfg: AppConfig, args, level2: str) -> TrainConfig:
    return TrainConfig(
        epochs=getattr(args, "epochs", 50) or 50,
        seed=cfg.seed,
        level2_backend=level2,
    )


def _training_records(cfg, args):
    if getattr(args, "augmented", None):
        rows = _read_augmented(Path(args.augmented))
    else:
        if not (args.features and args.labels):
            raise PgdnError("need --augmented FILE or both --features and --labels")
        rows = _read_labeled(Path(args.features), Path(args.labels))
    records = [(fv, lab) for _, fv, lab in rows]
    groups = []
    index_of: dict[str, int] = {}
    for fqdn, _, _ in rows:
        groups.append(index_of.setdefault(fqdn, len(index_of)))
    return records, groups


def cmd_train(cfg: AppConfig, args) -> int:
    level2 = LEVEL2_ALIASES.get(args.level2)
    if level2 is None:
        raise PgdnError(f"unknown level-2 backend {args.level2!r}")
    records, _ = _training_records(cfg, args)
    provider = make_provider(cfg.provider, cfg.provider_url)
    model = train_two_level(records, _train_config(cfg, args, level2), provider)
    if cfg.dictionaries_path.exists():
        model.dictionaries = load_dictionaries(cfg.dictionaries_path)
    out = Path(args.out or cfg.model_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"trained {level2} model on {len(records)} records -> {out}")
    return 0


def cmd_classify(cfg: AppConfig, args) -> int:
    model = load_model(_ensure(Path(args.model or cfg.model_path), "model file"))
    provider = make_provider(cfg.provider, cfg.provider_url)
    rows = _read_features(Path(args.features), "feature matrix")
    out = Path(args.out or cfg.out_dir / "predictions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("fqdn,label,score\n")
        for rec in rows:
            label, score = model.predict_one(rec["features"], provider)
            fh.write(f"{rec.get('fqdn', '')},{label.value},{repr(score)}\n")
    print(f"classified {len(rows)} records -> {out}")
    return 0


def cmd_evaluate(cfg: AppConfig, args) -> int:
    records, groups = _training_records(cfg, args)
    provider = make_provider(cfg.provider, cfg.provider_url)
    level2 = LEVEL2_ALIASES.get(args.level2 or "rf", "forest")
    report = run_comparison(
        records,
        backends=tuple(args.methods.split(",")) if args.methods else None,
        cfg=_train_config(cfg, args, level2),
        runs=args.runs,
        provider=provider,
        groups=groups if getattr(args, "augmented", None) else None,
    )
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.reports_dir / "comparison.csv"
    with open(out, "w", encoding="utf-8") as fh:
        report.to_csv(fh)
    summary = cfg.reports_dir / "comparison.txt"
    summary.write_text(report.summary_text() + "\n", encoding="utf-8")
    print(report.summary_text())
    print(f"report -> {out}")
    return 0


def cmd_forecast(cfg: AppConfig, args) -> int:
    model = load_model(_ensure(Path(args.model or cfg.model_path), "model file"))
    store = ObservationStore.load(_ensure(cfg.store_path, "observation store"))
    timelines = load_timelines(_ensure(Path(args.timelines), "timeline labels"),
                               horizon=args.horizon or cfg.horizon_days)
    usable = [tl for tl in timelines if tl.date_of_change is not None]
    skipped = len(timelines) - len(usable)
    if skipped:
        print(f"warning: skipping {skipped} timeline(s) that never turn PGDN",
              file=sys.stderr)
    if not usable:
        raise PgdnError("no timeline has a date of change; nothing to forecast")

    provider = make_provider(cfg.provider, cfg.provider_url)
    horizon = max(tl.horizon for tl in usable)
    features = prefix_feature_map(
        store.observations(), model.dictionaries or {},
        _cname_index_from_store(store), horizon,
    )

    class _Predictor:
        def predict_one(self, fv, prov=None):
            return model.predict_one(fv, provider)

    outcomes, summary = forecast_analysis(usable, features, _Predictor())
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.reports_dir / "forecast_outcomes.csv"
    with open(out, "w", encoding="utf-8") as fh:
        outcomes_csv(outcomes, fh)
    curves = cfg.reports_dir / "forecast_curves.csv"
    with open(curves, "w", encoding="utf-8") as fh:
        summary.curves_csv(fh)
    for category in ("forecasted", "same_day", "delayed"):
        print(f"{category}: {summary.counts[category]} "
              f"({summary.fractions[category]:.1%})")
    print(f"outcomes -> {out}")
    print(f"curves -> {curves}")
    return 0


def _cname_index_from_store(store: ObservationStore):
    from .features import ReverseCnameIndex

    pairs = []
    for obs in store.observations():
        if obs.dns is not None and obs.dns.cname is not None:
            pairs.append((obs.domain.fqdn, obs.dns.cname))
    return ReverseCnameIndex.build(pairs)


def cmd_sample(cfg: AppConfig, args) -> int:
    model = load_model(_ensure(Path(args.model or cfg.model_path), "model file"))
    provider = make_provider(cfg.provider, cfg.provider_url)
    rows = _read_features(Path(args.features), "feature matrix")
    sampled, positive, share = sample_proportion(
        [r["features"] for r in rows], args.fraction, model, cfg.seed, provider
    )
    print(f"sampled {sampled}, positive {positive}, proportion {share:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgdnwatch",
        description="Collect, featurize and classify newly registered "
                    "pornographic/gambling domains.",
    )
    parser.add_argument("--config", type=Path, help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", type=Path, help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a newline list of domains")
    p.add_argument("nrd_list")
    p.add_argument("--date", required=True, help="registration date YYYY-MM-DD")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("collect", help="run the daily detection cycles")
    p.add_argument("--fixture", help="scripted probe results (JSON-lines)")
    p.add_argument("--live", action="store_true", help="probe the real network")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--consumers", type=int, default=0)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("load-nrd2024", help="import a published dataset dump")
    p.add_argument("dump")
    p.set_defaults(func=cmd_load_nrd2024)

    p = sub.add_parser("extract", help="observation store -> feature matrix")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("augment", help="expand a labeled feature matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fit the two-level model")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--augmented")
    p.add_argument("--level2", default="rf", help="rf | dt | svm")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="score a feature matrix with a model")
    p.add_argument("--features", required=True)
    p.add_argument("--model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="multi-method comparison harness")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--augmented")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--level2", default="rf")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--methods", help="comma-separated subset of methods")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="early-detection case study")
    p.add_argument("--timelines", required=True)
    p.add_argument("--model")
    p.add_argument("--horizon", type=int, default=0)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("sample", help="classify a random sample of a matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--model")
    p.set_defaults(func=cmd_sample)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else AppConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out_dir is not None:
            overrides["out_dir"] = args.out_dir
        if overrides:
            import dataclasses

            cfg = dataclasses.replace(cfg, **overrides)
        cfg = cfg.resolved()
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, args)
    except PgdnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
