"""Ingestion loader for published NRD2024-style dumps.

Accepts JSON-lines where each row is one record of one detection day:

    {"domain": "...", "registration_date": "YYYY-MM-DD", "day": N,
     "type": "DNS" | "HTML" | "Certificate" | "WHOIS" |
             "IP History" | "Site History",
     ...record fields...}

Field names follow the published record layout (A, AAAA, CNAME, MX, NS,
SOA, TXT; Title / Keywords / Description / Raw HTML; Certificate Issuer /
Certificate Duration; Registrar / Registration Duration; Domain Name
List; Age / Historical Title List); lowercase snake_case aliases are
accepted too.  Unknown fields are ignored, missing fields tolerated, and
rows with unparseable dates are skipped and counted.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

from .collector import ObservationStore, ProbeType
from .suffixes import load_default_suffixes
from .errors import MalformedDomain
from .types import (
    CertRecord,
    DnsSnapshot,
    HtmlSnapshot,
    SoaRecord,
    WhoisRecord,
    parse_domain,
)


@dataclass(frozen=True)
class ImportReport:
    imported: int
    rejects: tuple[tuple[int, str], ...]  # (line number, reason)


def _get(obj: dict, *names, default=None):
    for name in names:
        if name in obj:
            return obj[name]
    return default


def _parse_dns(obj: dict) -> DnsSnapshot:
    soa_raw = _get(obj, "SOA", "soa")
    soa = None
    if isinstance(soa_raw, dict):
        soa = SoaRecord(
            ttl_seconds=int(_get(soa_raw, "ttl", "TTL", default=0)),
            refresh_seconds=int(_get(soa_raw, "refresh", "Refresh", default=0)),
            retry_seconds=int(_get(soa_raw, "retry", "Retry", default=0)),
        )
    return DnsSnapshot(
        a=frozenset(_get(obj, "A", "a", default=()) or ()),
        aaaa=frozenset(_get(obj, "AAAA", "aaaa", default=()) or ()),
        ns=frozenset(_get(obj, "NS", "ns", default=()) or ()),
        cname=_get(obj, "CNAME", "cname"),
        mx=frozenset(_get(obj, "MX", "mx", default=()) or ()),
        soa=soa,
        txt=tuple(_get(obj, "TXT", "txt", default=()) or ()),
    )


def _parse_record(
    record_type: str, obj: dict, registration_date: dt.date
) -> tuple[ProbeType, object]:
    kind = record_type.strip().lower().replace(" ", "_")
    if kind == "dns":
        return ProbeType.DNS, _parse_dns(obj)
    if kind == "html":
        title = _get(obj, "Title", "title")
        raw = _get(obj, "Raw HTML", "raw_html", default="") or ""
        if title and not raw:
            raw = title  # titled rows in the wild sometimes drop the body
        return ProbeType.HTML, HtmlSnapshot(
            status_code=int(_get(obj, "Status Code", "status_code", default=200)),
            title=title,
            keywords=_get(obj, "Keywords", "keywords"),
            description=_get(obj, "Description", "description"),
            raw_html=raw,
        )
    if kind == "certificate":
        not_before = _get(obj, "not_before")
        not_after = _get(obj, "not_after")
        if not_before and not_after:
            begin = dt.date.fromisoformat(not_before)
            end = dt.date.fromisoformat(not_after)
        else:
            # published rows may carry only the validity span in days
            duration = int(_get(obj, "Certificate Duration", "duration_days", default=0))
            begin = registration_date
            end = registration_date + dt.timedelta(days=duration)
        return ProbeType.CERTIFICATE, CertRecord(
            issuer=str(_get(obj, "Certificate Issuer", "issuer", default="")),
            not_before=begin,
            not_after=end,
        )
    if kind == "whois":
        return ProbeType.WHOIS, WhoisRecord(
            registrar=str(_get(obj, "Registrar", "registrar", default="")),
            registration_duration_days=int(
                _get(obj, "Registration Duration", "registration_duration_days",
                     default=0)
            ),
        )
    if kind == "ip_history":
        domains = _get(obj, "Domain Name List", "domains", default=()) or ()
        return ProbeType.IP_HISTORY, len(tuple(domains))
    if kind == "site_history":
        return ProbeType.SITE_HISTORY, {
            "site_age_years": int(_get(obj, "Age", "site_age_years", default=0)),
            "historical_titles": tuple(
                _get(obj, "Historical Title List", "historical_titles", default=())
                or ()
            ),
        }
    raise ValueError(f"unknown record type {record_type!r}")


def load_dump(path: Path, store: ObservationStore) -> ImportReport:
    """Import a dump into the observation store row by row."""
    suffixes = load_default_suffixes()
    imported = 0
    rejects: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                registration = dt.date.fromisoformat(str(obj["registration_date"]))
                domain = parse_domain(str(obj["domain"]), registration, suffixes)
                day = int(obj.get("day", 1))
                if day < 1:
                    raise ValueError("day must be >= 1")
                probe, payload = _parse_record(str(obj["type"]), obj, registration)
            except (KeyError, ValueError, MalformedDomain, TypeError) as exc:
                rejects.append((lineno, str(exc)))
                continue
            store.upsert(domain, day, probe, payload)
            imported += 1
    return ImportReport(imported, tuple(rejects))
