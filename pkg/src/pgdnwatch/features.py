"""Feature extraction: 19 numeric features plus the page title.

All operations are pure functions over immutable inputs.  A missing data
source always contributes 0.0, so extraction is total over any non-empty
observation window.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EmptyWindow
from .types import DailyObservation, DomainName, FeatureVector

_OCTET = r"(?:25[0-5]|2[0-4][0-9]|1[0-9]{2}|[1-9]?[0-9])"
_IPV4_HOST = rf"{_OCTET}(?:\.{_OCTET}){{3}}"

#: Literal-IP URL: http(s) scheme or scheme-relative "//", followed by a
#: dotted-quad host.  The lookbehind rejects other schemes ("ftp://..."),
#: the lookahead rejects hosts that keep going ("//1.2.3.4.example.com").
IP_URL_RE = re.compile(
    rf"(?:https?:|(?<!:))//{_IPV4_HOST}(?![\w.-])", re.IGNORECASE
)

VOWELS = frozenset("aeiou")
DIGITS = frozenset("0123456789")

DICTIONARY_KINDS = ("tld", "registrar", "cert_issuer")


def ip_url_redirect_metric(raw_html: str) -> float:
    """Ratio of literal-IP URLs to HTML length; 0.0 for an empty page."""
    if not raw_html:
        return 0.0
    return len(IP_URL_RE.findall(raw_html)) / len(raw_html)


def oscillating_metric(daily_sets: Sequence[Iterable[str]]) -> float:
    """Day-over-day churn of a record set, normalized by distinct values.

    The numerator counts, from the second day on, every value present on a
    day but absent the day before; the denominator is the number of
    distinct values over the whole window.  A stable record set scores
    exactly 0; an all-empty window scores 0 by convention.
    """
    if not daily_sets:
        raise ValueError("need at least one day of data")
    sets = [frozenset(s) for s in daily_sets]
    changes = 0
    for prev, cur in zip(sets, sets[1:]):
        changes += len(cur - prev)
    distinct = len(frozenset().union(*sets))
    if distinct == 0:
        return 0.0
    return changes / distinct


@dataclass(frozen=True)
class ReverseCnameIndex:
    """How many distinct corpus domains point at each CNAME target."""

    counts: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, pairs: Iterable[tuple[str, str]]) -> "ReverseCnameIndex":
        """Build from (fqdn, cname_target) pairs; each domain counts once
        per target regardless of how many days it kept the record."""
        seen: set[tuple[str, str]] = set()
        counts: dict[str, int] = {}
        for fqdn, target in pairs:
            key = (fqdn.lower(), target.lower())
            if key in seen:
                continue
            seen.add(key)
            counts[key[1]] = counts.get(key[1], 0) + 1
        return cls(counts)


def cname_fanin(snapshot_cname: str | None, index: ReverseCnameIndex) -> int:
    """Number of corpus domains aliasing the same CNAME target.

    No CNAME means 0.  A target the index has never seen counts 1: the
    querying domain itself.
    """
    if snapshot_cname is None:
        return 0
    return index.counts.get(snapshot_cname.lower(), 1)


def sld_lexical_features(domain: DomainName) -> tuple[int, int, int]:
    """(vowel count, digit count, IDN flag) of the second-level label."""
    sld = domain.sld
    vowels = sum(1 for ch in sld if ch in VOWELS)
    digits = sum(1 for ch in sld if ch in DIGITS)
    idn = 1 if sld.startswith("xn--") else 0
    return vowels, digits, idn


@dataclass(frozen=True)
class CategoricalDictionary:
    """Stable string-to-code mapping; unseen values always map to 0."""

    name: str
    mapping: Mapping[str, int] = field(default_factory=dict)
    unknown_code: int = 0

    def code(self, value: str | None) -> int:
        if value is None:
            return self.unknown_code
        return self.mapping.get(value, self.unknown_code)

    def to_json(self) -> dict:
        return {"version": 1, "name": self.name, "mapping": dict(self.mapping)}

    @classmethod
    def from_json(cls, obj: dict) -> "CategoricalDictionary":
        return cls(name=obj["name"], mapping=dict(obj["mapping"]))


def build_dictionary(values: Iterable[str], name: str) -> CategoricalDictionary:
    """Code distinct values 1..K in lexicographic order.

    Sorting makes the mapping a pure function of the corpus, so two builds
    over the same data always agree.
    """
    if name not in DICTIONARY_KINDS:
        raise ValueError(f"unknown dictionary kind: {name!r}")
    distinct = sorted(set(values))
    return CategoricalDictionary(name, {v: i + 1 for i, v in enumerate(distinct)})


def save_dictionaries(dicts: Mapping[str, CategoricalDictionary], path: Path) -> None:
    doc = {"version": 1, "dictionaries": {k: d.to_json() for k, d in dicts.items()}}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def load_dictionaries(path: Path) -> dict[str, CategoricalDictionary]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {
        k: CategoricalDictionary.from_json(v)
        for k, v in doc["dictionaries"].items()
    }


def _dns_series(window: Sequence[DailyObservation], field_name: str) -> list[frozenset[str]]:
    # One entry per observation day; a day whose DNS probe failed
    # contributes an empty set.
    out = []
    for obs in window:
        if obs.dns is None:
            out.append(frozenset())
        else:
            out.append(getattr(obs.dns, field_name))
    return out


def assemble_feature_vector(
    window: Sequence[DailyObservation],
    dicts: Mapping[str, CategoricalDictionary],
    index: ReverseCnameIndex,
) -> FeatureVector:
    """Fill all 19 canonical feature indices from an observation window.

    The window must be non-empty, single-domain and sorted by day.  Any
    unavailable source becomes 0.0.  The title is taken from the latest
    titled HTML snapshot; the redirect metric from the latest snapshot
    with any HTML at all; certificate features from the first acquired
    certificate; SOA and CNAME from the latest DNS snapshot that carries
    them.
    """
    if not window:
        raise EmptyWindow("feature assembly needs at least one observation")
    fqdns = {obs.domain.fqdn for obs in window}
    if len(fqdns) != 1:
        raise ValueError(f"window mixes domains: {sorted(fqdns)}")
    days = [obs.day_index for obs in window]
    if days != sorted(days):
        raise ValueError("window must be sorted by day")

    domain = window[0].domain
    f = [0.0] * 19

    latest_html = next((o.html for o in reversed(window) if o.html is not None), None)
    if latest_html is not None:
        f[0] = ip_url_redirect_metric(latest_html.raw_html)

    first_cert = next((o.cert for o in window if o.cert is not None), None)
    if first_cert is not None:
        f[1] = float(dicts["cert_issuer"].code(first_cert.issuer))
        f[2] = float(first_cert.duration_days)

    f[3] = oscillating_metric(_dns_series(window, "a"))
    f[4] = oscillating_metric(_dns_series(window, "aaaa"))
    f[5] = oscillating_metric(_dns_series(window, "ns"))

    latest_dns = next((o.dns for o in reversed(window) if o.dns is not None), None)
    if latest_dns is not None:
        f[6] = float(cname_fanin(latest_dns.cname, index))

    latest_soa = next(
        (o.dns.soa for o in reversed(window) if o.dns is not None and o.dns.soa is not None),
        None,
    )
    if latest_soa is not None:
        f[7] = float(latest_soa.ttl_seconds)
        f[8] = float(latest_soa.refresh_seconds)
        f[9] = float(latest_soa.retry_seconds)

    f[10] = 1.0 if any(o.dns is not None and o.dns.mx for o in window) else 0.0

    f[11] = float(dicts["tld"].code(domain.tld))
    vowels, digits, idn = sld_lexical_features(domain)
    f[12], f[13], f[14] = float(vowels), float(digits), float(idn)

    whois = next((o.whois for o in window if o.whois is not None), None)
    if whois is not None:
        f[15] = float(dicts["registrar"].code(whois.registrar))
        f[16] = float(whois.registration_duration_days)

    first_history = next((o.history for o in window if o.history is not None), None)
    if first_history is not None:
        f[17] = float(first_history.site_age_years)
    latest_history = next((o.history for o in reversed(window) if o.history is not None), None)
    if latest_history is not None:
        f[18] = float(latest_history.ip_domain_count)

    title = next(
        (o.html.title for o in reversed(window)
         if o.html is not None and o.html.title is not None),
        None,
    )
    return FeatureVector(tuple(f), title)


class FeatureExtractor:
    """Corpus-fitted extractor: dictionaries plus the reverse CNAME index.

    Follows the fit/transform convention: fit() learns the categorical
    dictionaries and the CNAME fan-in index from an observation corpus,
    transform() turns per-domain windows into feature vectors.
    """

    def __init__(self) -> None:
        self.dictionaries_: dict[str, CategoricalDictionary] | None = None
        self.cname_index_: ReverseCnameIndex | None = None

    def fit(self, observations: Iterable[DailyObservation]) -> "FeatureExtractor":
        tlds, registrars, issuers = [], [], []
        cname_pairs = []
        for obs in observations:
            tlds.append(obs.domain.tld)
            if obs.whois is not None:
                registrars.append(obs.whois.registrar)
            if obs.cert is not None:
                issuers.append(obs.cert.issuer)
            if obs.dns is not None and obs.dns.cname is not None:
                cname_pairs.append((obs.domain.fqdn, obs.dns.cname))
        self.dictionaries_ = {
            "tld": build_dictionary(tlds, "tld"),
            "registrar": build_dictionary(registrars, "registrar"),
            "cert_issuer": build_dictionary(issuers, "cert_issuer"),
        }
        self.cname_index_ = ReverseCnameIndex.build(cname_pairs)
        return self

    def transform(self, windows: Iterable[Sequence[DailyObservation]]) -> list[FeatureVector]:
        if self.dictionaries_ is None or self.cname_index_ is None:
            raise RuntimeError("extractor is not fitted")
        return [
            assemble_feature_vector(w, self.dictionaries_, self.cname_index_)
            for w in windows
        ]

    def fit_transform(self, windows: list[Sequence[DailyObservation]]) -> list[FeatureVector]:
        flat = [obs for w in windows for obs in w]
        return self.fit(flat).transform(windows)
