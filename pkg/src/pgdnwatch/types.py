"""Core domain types shared by every stage of the pipeline.

All types are immutable values after construction and therefore safe to
share between threads.  Missing probe data is first-class: any subset of
the per-day probe fields may be absent, and a missing numeric source is
encoded as 0.0 in the feature vector.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field

from .errors import MalformedDomain

#: Width of the numeric part of a feature vector.
NUM_FEATURES = 19

#: Canonical order of the 19 numeric features.  Index comments double as
#: the authoritative reference for every producer and consumer.
FEATURE_NAMES = (
    "ip_url_redirect_metric",   # 0  literal-IP URLs per HTML character
    "cert_issuer_code",         # 1  enumerated certificate issuer
    "cert_duration_days",       # 2  certificate validity in whole days
    "oscillation_a",            # 3  day-over-day churn of DNS-A sets
    "oscillation_aaaa",         # 4  day-over-day churn of DNS-AAAA sets
    "oscillation_ns",           # 5  day-over-day churn of DNS-NS sets
    "cname_fanin",              # 6  corpus domains sharing the CNAME target
    "soa_ttl",                  # 7  SOA TTL seconds
    "soa_refresh",              # 8  SOA refresh seconds
    "soa_retry",                # 9  SOA retry seconds
    "has_mx",                   # 10 0/1 flag: any day with an MX record
    "tld_code",                 # 11 enumerated TLD
    "sld_vowels",               # 12 vowel count in the SLD
    "sld_digits",               # 13 digit count in the SLD
    "is_idn",                   # 14 0/1 flag: SLD carries the xn-- prefix
    "registrar_code",           # 15 enumerated registrar
    "registration_days",        # 16 registration duration in days
    "site_age_years",           # 17 years since first site record
    "ip_domain_count",          # 18 domains seen on the same IP
)

FLAG_INDICES = (10, 14)


class Label(enum.Enum):
    """Ground-truth content label of a domain on a given day."""

    PORNOGRAPHY = "pornography"
    GAMBLING = "gambling"
    OTHERS = "others"


class BinaryLabel(enum.Enum):
    """Positive class is PGDN (pornography or gambling); rest is benign."""

    PGDN = "pgdn"
    BENIGN = "benign"


def binarize(label: Label) -> BinaryLabel:
    """Collapse the three content labels onto the binary task."""
    if label in (Label.PORNOGRAPHY, Label.GAMBLING):
        return BinaryLabel.PGDN
    return BinaryLabel.BENIGN


@dataclass(frozen=True, slots=True)
class DomainName:
    """A parsed, lowercased fully qualified domain name."""

    fqdn: str
    sld: str
    tld: str
    registration_date: dt.date

    def __post_init__(self) -> None:
        if not self.fqdn or "." not in self.fqdn:
            raise MalformedDomain(f"not a dotted domain name: {self.fqdn!r}")
        for part in (self.fqdn, self.sld, self.tld):
            if part != part.lower():
                raise MalformedDomain(f"domain fields must be lowercase: {part!r}")


def parse_domain(
    fqdn: str,
    registration_date: dt.date,
    suffix_list: frozenset[str] | set[str],
) -> DomainName:
    """Split ``fqdn`` into SLD and public-suffix TLD.

    The longest suffix present in ``suffix_list`` wins; when none matches,
    the last label is used as the TLD.  A single trailing dot is tolerated.

    Raises:
        MalformedDomain: no dot, an empty label, or no label left of the
            matched suffix.
    """
    name = fqdn.strip().lower().rstrip(".")
    if not name or "." not in name:
        raise MalformedDomain(f"not a dotted domain name: {fqdn!r}")
    labels = name.split(".")
    if any(not lab for lab in labels):
        raise MalformedDomain(f"empty label in domain name: {fqdn!r}")

    if name in suffix_list:
        raise MalformedDomain(f"whole name is a public suffix: {fqdn!r}")
    tld = labels[-1]
    # Longest matching suffix must leave at least one label for the SLD.
    for start in range(1, len(labels)):
        candidate = ".".join(labels[start:])
        if candidate in suffix_list:
            tld = candidate
            break
    sld_labels = labels[: len(labels) - len(tld.split("."))]
    if not sld_labels:
        raise MalformedDomain(f"no registrable label left of suffix: {fqdn!r}")
    return DomainName(
        fqdn=name, sld=sld_labels[-1], tld=tld, registration_date=registration_date
    )


@dataclass(frozen=True, slots=True)
class SoaRecord:
    """TTL / refresh / retry seconds from a DNS SOA answer."""

    ttl_seconds: int
    refresh_seconds: int
    retry_seconds: int

    def __post_init__(self) -> None:
        for name in ("ttl_seconds", "refresh_seconds", "retry_seconds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _lower_frozen(values) -> frozenset[str]:
    return frozenset(v.lower() for v in values)


@dataclass(frozen=True, slots=True)
class DnsSnapshot:
    """One day's DNS answers for a domain; empty sets mean no answer."""

    a: frozenset[str] = frozenset()
    aaaa: frozenset[str] = frozenset()
    ns: frozenset[str] = frozenset()
    cname: str | None = None
    mx: frozenset[str] = frozenset()
    soa: SoaRecord | None = None
    txt: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _lower_frozen(self.a))
        object.__setattr__(self, "aaaa", _lower_frozen(self.aaaa))
        object.__setattr__(self, "ns", _lower_frozen(self.ns))
        object.__setattr__(self, "mx", _lower_frozen(self.mx))
        object.__setattr__(self, "txt", tuple(self.txt))
        if self.cname is not None:
            object.__setattr__(self, "cname", self.cname.lower())


@dataclass(frozen=True, slots=True)
class CertRecord:
    """Leaf-certificate issuer and validity window."""

    issuer: str
    not_before: dt.date
    not_after: dt.date

    def __post_init__(self) -> None:
        if self.not_after < self.not_before:
            raise ValueError("certificate expires before it begins")

    @property
    def duration_days(self) -> int:
        return (self.not_after - self.not_before).days


@dataclass(frozen=True, slots=True)
class HtmlSnapshot:
    """Fetched page content; an empty title is normalized to absent."""

    status_code: int
    title: str | None = None
    keywords: str | None = None
    description: str | None = None
    raw_html: str = ""

    def __post_init__(self) -> None:
        if self.title is not None and not self.title.strip():
            object.__setattr__(self, "title", None)
        if self.title is not None and not self.raw_html:
            raise ValueError("a titled snapshot must carry raw HTML")


@dataclass(frozen=True, slots=True)
class WhoisRecord:
    registrar: str
    registration_duration_days: int

    def __post_init__(self) -> None:
        if self.registration_duration_days < 0:
            raise ValueError("registration_duration_days must be >= 0")


@dataclass(frozen=True, slots=True)
class HistoryRecord:
    """Site-history and IP-history results merged into one record."""

    site_age_years: int = 0
    historical_titles: tuple[str, ...] = ()
    ip_domain_count: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "historical_titles", tuple(self.historical_titles))
        if self.site_age_years < 0 or self.ip_domain_count < 0:
            raise ValueError("history counts must be >= 0")


@dataclass(frozen=True, slots=True)
class DailyObservation:
    """All probe results for one domain on one detection day.

    day_index is 1-based; day 1 is the registration day.  Any probe field
    may be absent: a failed or unscheduled probe is missing data, not an
    error record.
    """

    domain: DomainName
    day_index: int
    dns: DnsSnapshot | None = None
    html: HtmlSnapshot | None = None
    cert: CertRecord | None = None
    whois: WhoisRecord | None = None
    history: HistoryRecord | None = None

    def __post_init__(self) -> None:
        if self.day_index < 1:
            raise ValueError("day_index is 1-based")


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """19 ordered numeric features plus the optional page title.

    Missing underlying data is encoded as 0.0 at the corresponding index;
    the two flags (has_mx, is_idn) are exactly 0.0 or 1.0.
    """

    numeric: tuple[float, ...]
    title: str | None = None

    def __post_init__(self) -> None:
        numeric = tuple(float(x) for x in self.numeric)
        object.__setattr__(self, "numeric", numeric)
        if len(numeric) != NUM_FEATURES:
            raise ValueError(f"feature vector needs {NUM_FEATURES} numbers, got {len(numeric)}")
        for i in FLAG_INDICES:
            if numeric[i] not in (0.0, 1.0):
                raise ValueError(f"feature {FEATURE_NAMES[i]} must be a 0/1 flag")
        if self.title is not None and not self.title.strip():
            object.__setattr__(self, "title", None)

    def with_title(self, title: str | None) -> "FeatureVector":
        return FeatureVector(self.numeric, title)


@dataclass(frozen=True)
class DomainTimeline:
    """Per-day ground-truth labels for one forecast case-study domain.

    date_of_change is derived, never supplied: the smallest day whose label
    binarizes to PGDN, or None when the domain never turns bad.
    """

    domain: DomainName
    daily_labels: tuple[tuple[int, Label], ...]
    date_of_change: int | None = field(default=None, init=False)

    def __post_init__(self) -> None:
        labels = tuple(sorted(self.daily_labels, key=lambda pair: pair[0]))
        object.__setattr__(self, "daily_labels", labels)
        days = [d for d, _ in labels]
        if not days:
            raise ValueError("timeline needs at least one labeled day")
        if days != list(range(days[0], days[0] + len(days))):
            raise ValueError("daily labels must cover contiguous days")
        first_bad = next(
            (d for d, lab in labels if binarize(lab) is BinaryLabel.PGDN), None
        )
        object.__setattr__(self, "date_of_change", first_bad)

    @property
    def horizon(self) -> int:
        return self.daily_labels[-1][0]
