"""Probe executors: the deterministic fixture prober plus live network
probers behind the same interface.

A prober returns the typed payload for its probe, or None when the probe
ran and failed; failures are missing data, never error records.  Live
probers default to 5-second timeouts and swallow network errors into
None.  The IP-history and site-history directions come from third-party
services, so their live variants stay fixture-backed stubs.
"""

from __future__ import annotations

import datetime as dt
import json
import re
import socket
import ssl
from pathlib import Path
from typing import Protocol

import requests

from .collector import ProbeTask, ProbeType
from .errors import FixtureMiss
from . import dnswire
from .types import CertRecord, DnsSnapshot, HtmlSnapshot, SoaRecord, WhoisRecord

DEFAULT_TIMEOUT = 5.0

_FAIL = object()


class Prober(Protocol):
    def probe(self, task: ProbeTask) -> object | None: ...


def _parse_dns_payload(obj: dict) -> DnsSnapshot:
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


def parse_fixture_result(probe: ProbeType, obj: dict) -> object:
    if probe is ProbeType.DNS:
        return _parse_dns_payload(obj)
    if probe is ProbeType.HTML:
        return HtmlSnapshot(
            status_code=int(obj.get("status_code", 200)),
            title=obj.get("title"),
            keywords=obj.get("keywords"),
            description=obj.get("description"),
            raw_html=obj.get("raw_html", ""),
        )
    if probe is ProbeType.CERTIFICATE:
        return CertRecord(
            issuer=obj["issuer"],
            not_before=dt.date.fromisoformat(obj["not_before"]),
            not_after=dt.date.fromisoformat(obj["not_after"]),
        )
    if probe is ProbeType.WHOIS:
        return WhoisRecord(
            registrar=obj["registrar"],
            registration_duration_days=int(obj["registration_duration_days"]),
        )
    if probe is ProbeType.SITE_HISTORY:
        return {
            "site_age_years": int(obj.get("site_age_years", 0)),
            "historical_titles": tuple(obj.get("historical_titles", ())),
        }
    if probe is ProbeType.IP_HISTORY:
        if "count" in obj:
            return int(obj["count"])
        return len(obj.get("domains", ()))
    raise ValueError(f"unhandled probe type {probe}")


class FixtureProber:
    """Scripted responses from a JSON-lines fixture file.

    Each line is {"fqdn", "day", "probe", ...} carrying either a "result"
    object or "fail": true.  An unscripted (fqdn, day, probe) is a
    test-authoring bug and raises FixtureMiss, with one exception: an
    unscripted certificate probe means the site simply had no certificate
    to offer that day, so it reads as a failed probe.  That keeps cert
    acquisition timing expressible by scripting only the day it succeeds.
    """

    def __init__(self, entries: dict[tuple[str, int, str], object]) -> None:
        self._entries = entries

    @classmethod
    def from_path(cls, path: Path) -> "FixtureProber":
        entries: dict[tuple[str, int, str], object] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                probe = ProbeType(obj["probe"])
                key = (obj["fqdn"].lower(), int(obj["day"]), probe.value)
                if obj.get("fail"):
                    entries[key] = _FAIL
                else:
                    entries[key] = parse_fixture_result(probe, obj["result"])
        return cls(entries)

    def probe(self, task: ProbeTask) -> object | None:
        key = (task.domain.fqdn, task.day_index, task.probe_type.value)
        if key not in self._entries:
            if task.probe_type is ProbeType.CERTIFICATE:
                return None
            raise FixtureMiss(f"fixture does not script {key}")
        payload = self._entries[key]
        return None if payload is _FAIL else payload


def fixture_probers(path: Path) -> dict[ProbeType, FixtureProber]:
    """One shared fixture prober wired to every probe type."""
    prober = FixtureProber.from_path(path)
    return {pt: prober for pt in ProbeType}


# ---------------------------------------------------------------------------
# Live probers


class LiveDnsProber:
    def __init__(self, server: str = "8.8.8.8", timeout: float = DEFAULT_TIMEOUT) -> None:
        self.server = server
        self.timeout = timeout

    def probe(self, task: ProbeTask) -> DnsSnapshot | None:
        name = task.domain.fqdn
        answers: dict[str, list] = {}
        any_answer = False
        for qtype in ("A", "AAAA", "NS", "CNAME", "MX", "SOA", "TXT"):
            try:
                records = dnswire.query(name, qtype, self.server, self.timeout)
            except (OSError, ValueError):
                continue
            values = [value for _, tname, value in records if tname == qtype]
            if values:
                any_answer = True
                answers[qtype] = values
        if not any_answer:
            return None
        soa = None
        if answers.get("SOA"):
            raw = answers["SOA"][0]
            soa = SoaRecord(
                ttl_seconds=int(raw["minimum"]),
                refresh_seconds=int(raw["refresh"]),
                retry_seconds=int(raw["retry"]),
            )
        return DnsSnapshot(
            a=frozenset(answers.get("A", ())),
            aaaa=frozenset(answers.get("AAAA", ())),
            ns=frozenset(answers.get("NS", ())),
            cname=(answers.get("CNAME") or [None])[0],
            mx=frozenset(exchange for _, exchange in answers.get("MX", ())),
            soa=soa,
            txt=tuple(answers.get("TXT", ())),
        )


TITLE_RE = re.compile(r"<title[^>]*>(.*?)</title>", re.IGNORECASE | re.DOTALL)
META_RE = re.compile(
    r'<meta\s+[^>]*name=["\'](keywords|description)["\'][^>]*'
    r'content=["\']([^"\']*)["\']',
    re.IGNORECASE,
)


def extract_page_fields(raw_html: str, status_code: int) -> HtmlSnapshot:
    title = None
    match = TITLE_RE.search(raw_html)
    if match:
        title = re.sub(r"\s+", " ", match.group(1)).strip() or None
    keywords = description = None
    for name, content in META_RE.findall(raw_html):
        if name.lower() == "keywords" and keywords is None:
            keywords = content
        elif name.lower() == "description" and description is None:
            description = content
    return HtmlSnapshot(
        status_code=status_code,
        title=title,
        keywords=keywords,
        description=description,
        raw_html=raw_html,
    )


class LiveHtmlProber:
    def __init__(self, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.timeout = timeout

    def probe(self, task: ProbeTask) -> HtmlSnapshot | None:
        for scheme in ("https", "http"):
            try:
                resp = requests.get(
                    f"{scheme}://{task.domain.fqdn}/",
                    timeout=self.timeout,
                    verify=False,
                    headers={"User-Agent": "Mozilla/5.0 (compatible; pgdnwatch)"},
                )
            except requests.RequestException:
                continue
            return extract_page_fields(resp.text, resp.status_code)
        return None


class LiveCertProber:
    """TLS handshake against port 443; parses the leaf of the offered chain."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.timeout = timeout

    def probe(self, task: ProbeTask) -> CertRecord | None:
        context = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        context.check_hostname = False
        context.verify_mode = ssl.CERT_NONE
        fqdn = task.domain.fqdn
        try:
            with socket.create_connection((fqdn, 443), timeout=self.timeout) as raw:
                with context.wrap_socket(raw, server_hostname=fqdn) as tls:
                    der = tls.getpeercert(binary_form=True)
        except (OSError, ssl.SSLError):
            return None
        if not der:
            return None
        return parse_der_certificate(der)


def parse_der_certificate(der: bytes) -> CertRecord | None:
    from cryptography import x509
    from cryptography.x509.oid import NameOID

    try:
        cert = x509.load_der_x509_certificate(der)
    except ValueError:
        return None
    issuer = ""
    for oid in (NameOID.COMMON_NAME, NameOID.ORGANIZATION_NAME):
        attrs = cert.issuer.get_attributes_for_oid(oid)
        if attrs:
            issuer = str(attrs[0].value)
            break
    if not issuer:
        issuer = cert.issuer.rfc4514_string()
    return CertRecord(
        issuer=issuer,
        not_before=cert.not_valid_before_utc.date(),
        not_after=cert.not_valid_after_utc.date(),
    )


WHOIS_SERVER = "whois.iana.org"

_REGISTRAR_RE = re.compile(r"^\s*Registrar:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)
_REFER_RE = re.compile(r"^\s*(?:refer|whois):\s*(\S+)\s*$", re.IGNORECASE | re.MULTILINE)
_DATE_RES = {
    "created": re.compile(
        r"^\s*(?:Creation Date|created|Registered On):\s*(\S+)", re.IGNORECASE | re.MULTILINE
    ),
    "expires": re.compile(
        r"^\s*(?:Registry Expiry Date|Expiration Date|Expiry Date|paid-till|Expires On):\s*(\S+)",
        re.IGNORECASE | re.MULTILINE,
    ),
}


def _whois_roundtrip(server: str, query_text: str, timeout: float) -> str:
    with socket.create_connection((server, 43), timeout=timeout) as sock:
        sock.sendall(query_text.encode("ascii", "ignore") + b"\r\n")
        chunks = []
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            chunks.append(chunk)
    return b"".join(chunks).decode("utf-8", "replace")


def _parse_whois_date(text: str) -> dt.date | None:
    text = text.strip().rstrip("Z").split("T")[0].split()[0]
    text = text.replace(".", "-").replace("/", "-")
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        return None


def parse_whois_text(text: str) -> WhoisRecord | None:
    registrar_match = _REGISTRAR_RE.search(text)
    created = _DATE_RES["created"].search(text)
    expires = _DATE_RES["expires"].search(text)
    duration = 0
    if created and expires:
        c = _parse_whois_date(created.group(1))
        e = _parse_whois_date(expires.group(1))
        if c and e and e >= c:
            duration = (e - c).days
    if registrar_match is None and duration == 0:
        return None
    registrar = registrar_match.group(1) if registrar_match else ""
    return WhoisRecord(registrar=registrar, registration_duration_days=duration)


class LiveWhoisProber:
    def __init__(self, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.timeout = timeout

    def probe(self, task: ProbeTask) -> WhoisRecord | None:
        fqdn = task.domain.fqdn
        try:
            referral = _whois_roundtrip(WHOIS_SERVER, task.domain.tld, self.timeout)
            match = _REFER_RE.search(referral)
            server = match.group(1) if match else WHOIS_SERVER
            text = _whois_roundtrip(server, fqdn, self.timeout)
        except OSError:
            return None
        return parse_whois_text(text)
