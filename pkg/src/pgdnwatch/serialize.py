"""Wire and file formats for observations and feature vectors.

Observation files are JSON-lines: one object per (domain, day) with keys
exactly ``{"domain", "day", "dns", "html", "cert", "whois", "history"}``
and absent probes omitted.  Feature matrices are CSV with the canonical
``f00..f18,title`` columns, optionally prefixed by an ``fqdn`` key column
and followed by ``label`` and ``aug`` columns when the file carries
training data.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from typing import Iterable, Iterator, TextIO

from .types import (
    NUM_FEATURES,
    BinaryLabel,
    CertRecord,
    DailyObservation,
    DnsSnapshot,
    DomainName,
    FeatureVector,
    HistoryRecord,
    HtmlSnapshot,
    SoaRecord,
    WhoisRecord,
)

FEATURE_COLUMNS = tuple(f"f{i:02d}" for i in range(NUM_FEATURES))


def _domain_to_json(d: DomainName) -> dict:
    return {
        "fqdn": d.fqdn,
        "sld": d.sld,
        "tld": d.tld,
        "registration_date": d.registration_date.isoformat(),
    }


def _domain_from_json(obj: dict) -> DomainName:
    return DomainName(
        fqdn=obj["fqdn"],
        sld=obj["sld"],
        tld=obj["tld"],
        registration_date=dt.date.fromisoformat(obj["registration_date"]),
    )


def _dns_to_json(s: DnsSnapshot) -> dict:
    out: dict = {}
    if s.a:
        out["a"] = sorted(s.a)
    if s.aaaa:
        out["aaaa"] = sorted(s.aaaa)
    if s.ns:
        out["ns"] = sorted(s.ns)
    if s.cname is not None:
        out["cname"] = s.cname
    if s.mx:
        out["mx"] = sorted(s.mx)
    if s.soa is not None:
        out["soa"] = {
            "ttl": s.soa.ttl_seconds,
            "refresh": s.soa.refresh_seconds,
            "retry": s.soa.retry_seconds,
        }
    if s.txt:
        out["txt"] = list(s.txt)
    return out


def _dns_from_json(obj: dict) -> DnsSnapshot:
    soa = None
    if "soa" in obj:
        soa = SoaRecord(
            ttl_seconds=int(obj["soa"]["ttl"]),
            refresh_seconds=int(obj["soa"]["refresh"]),
            retry_seconds=int(obj["soa"]["retry"]),
        )
    return DnsSnapshot(
        a=frozenset(obj.get("a", ())),
        aaaa=frozenset(obj.get("aaaa", ())),
        ns=frozenset(obj.get("ns", ())),
        cname=obj.get("cname"),
        mx=frozenset(obj.get("mx", ())),
        soa=soa,
        txt=tuple(obj.get("txt", ())),
    )


def observation_to_json(obs: DailyObservation) -> dict:
    obj: dict = {"domain": _domain_to_json(obs.domain), "day": obs.day_index}
    if obs.dns is not None:
        obj["dns"] = _dns_to_json(obs.dns)
    if obs.html is not None:
        h = obs.html
        html: dict = {"status_code": h.status_code, "raw_html": h.raw_html}
        if h.title is not None:
            html["title"] = h.title
        if h.keywords is not None:
            html["keywords"] = h.keywords
        if h.description is not None:
            html["description"] = h.description
        obj["html"] = html
    if obs.cert is not None:
        obj["cert"] = {
            "issuer": obs.cert.issuer,
            "not_before": obs.cert.not_before.isoformat(),
            "not_after": obs.cert.not_after.isoformat(),
        }
    if obs.whois is not None:
        obj["whois"] = {
            "registrar": obs.whois.registrar,
            "registration_duration_days": obs.whois.registration_duration_days,
        }
    if obs.history is not None:
        obj["history"] = {
            "site_age_years": obs.history.site_age_years,
            "historical_titles": list(obs.history.historical_titles),
            "ip_domain_count": obs.history.ip_domain_count,
        }
    return obj


def observation_from_json(obj: dict) -> DailyObservation:
    dns = _dns_from_json(obj["dns"]) if "dns" in obj else None
    html = None
    if "html" in obj:
        h = obj["html"]
        html = HtmlSnapshot(
            status_code=int(h["status_code"]),
            title=h.get("title"),
            keywords=h.get("keywords"),
            description=h.get("description"),
            raw_html=h.get("raw_html", ""),
        )
    cert = None
    if "cert" in obj:
        c = obj["cert"]
        cert = CertRecord(
            issuer=c["issuer"],
            not_before=dt.date.fromisoformat(c["not_before"]),
            not_after=dt.date.fromisoformat(c["not_after"]),
        )
    whois = None
    if "whois" in obj:
        w = obj["whois"]
        whois = WhoisRecord(
            registrar=w["registrar"],
            registration_duration_days=int(w["registration_duration_days"]),
        )
    history = None
    if "history" in obj:
        hy = obj["history"]
        history = HistoryRecord(
            site_age_years=int(hy.get("site_age_years", 0)),
            historical_titles=tuple(hy.get("historical_titles", ())),
            ip_domain_count=int(hy.get("ip_domain_count", 0)),
        )
    return DailyObservation(
        domain=_domain_from_json(obj["domain"]),
        day_index=int(obj["day"]),
        dns=dns,
        html=html,
        cert=cert,
        whois=whois,
        history=history,
    )


def dump_observation_line(obs: DailyObservation) -> str:
    """Canonical single-line JSON; sorted keys keep output byte-stable."""
    return json.dumps(observation_to_json(obs), sort_keys=True, ensure_ascii=False)


def write_observations(obs_list: Iterable[DailyObservation], fh: TextIO) -> int:
    n = 0
    for obs in obs_list:
        fh.write(dump_observation_line(obs) + "\n")
        n += 1
    return n


def read_observations(fh: TextIO) -> Iterator[DailyObservation]:
    for line in fh:
        line = line.strip()
        if line:
            yield observation_from_json(json.loads(line))


# ---------------------------------------------------------------------------
# Feature matrix CSV


def feature_header(with_fqdn: bool = False, with_label: bool = False,
                   with_aug: bool = False) -> list[str]:
    cols = list(FEATURE_COLUMNS) + ["title"]
    if with_fqdn:
        cols = ["fqdn"] + cols
    if with_label:
        cols.append("label")
    if with_aug:
        cols.append("aug")
    return cols


def write_feature_csv(
    fh: TextIO,
    rows: Iterable[tuple],
    *,
    with_fqdn: bool = False,
    with_label: bool = False,
    with_aug: bool = False,
) -> int:
    """Write feature rows.

    Each row is a tuple whose elements follow the column layout: optional
    fqdn string, then the FeatureVector, then optional BinaryLabel, then
    optional augmentation tag.  repr() of Python floats round-trips
    exactly, so written and re-read values are identical.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(feature_header(with_fqdn, with_label, with_aug))
    n = 0
    for row in rows:
        items = list(row)
        out: list[str] = []
        if with_fqdn:
            out.append(items.pop(0))
        fv: FeatureVector = items.pop(0)
        out.extend(repr(x) for x in fv.numeric)
        # Line breaks cannot live in a CSV field reliably; titles are
        # single-line by extraction, so flatten defensively.
        title = fv.title if fv.title is not None else ""
        out.append(title.replace("\r", " ").replace("\n", " "))
        if with_label:
            label: BinaryLabel = items.pop(0)
            out.append(label.value)
        if with_aug:
            out.append(items.pop(0))
        writer.writerow(out)
        n += 1
    return n


def read_feature_csv(fh: TextIO) -> list[dict]:
    """Read any feature CSV variant.

    Returns dicts with keys ``features`` (FeatureVector) and, when the
    header carries them, ``fqdn``, ``label`` (BinaryLabel) and ``aug``.
    """
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return []
    expected = list(FEATURE_COLUMNS)
    with_fqdn = header[:1] == ["fqdn"]
    body = header[1:] if with_fqdn else header
    if body[: len(expected) + 1] != expected + ["title"]:
        raise ValueError("not a feature CSV: unexpected header")
    tail = body[len(expected) + 1 :]
    with_label = "label" in tail
    with_aug = "aug" in tail

    out = []
    for row in reader:
        if not row:
            continue
        idx = 0
        rec: dict = {}
        if with_fqdn:
            rec["fqdn"] = row[idx]
            idx += 1
        numeric = tuple(float(x) for x in row[idx : idx + NUM_FEATURES])
        idx += NUM_FEATURES
        title = row[idx] or None
        idx += 1
        rec["features"] = FeatureVector(numeric, title)
        if with_label:
            rec["label"] = BinaryLabel(row[idx].lower())
            idx += 1
        if with_aug:
            rec["aug"] = row[idx]
            idx += 1
        out.append(rec)
    return out


def feature_csv_string(rows, **kw) -> str:
    buf = io.StringIO()
    write_feature_csv(buf, rows, **kw)
    return buf.getvalue()
