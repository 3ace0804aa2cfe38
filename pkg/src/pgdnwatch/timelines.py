"""Ground-truth label file loaders.

Two shapes of annotation arrive as CSV: one label per domain for the
training set, and full per-day coverage for the forecast case-study
domains.  Label strings map case-insensitively onto the three classes.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from pathlib import Path
from typing import TextIO

from .errors import DuplicateDomain, GapInCoverage, UnknownLabel
from .suffixes import load_default_suffixes
from .types import DomainTimeline, Label, parse_domain

log = logging.getLogger(__name__)

_LABELS = {label.value: label for label in Label}


def parse_label(text: str) -> Label:
    try:
        return _LABELS[text.strip().lower()]
    except KeyError:
        raise UnknownLabel(f"not a known label: {text!r}") from None


def _open_rows(fh: TextIO, expected_header: list[str], path_hint: str):
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != expected_header:
        raise ValueError(
            f"{path_hint}: expected header {','.join(expected_header)!r}, "
            f"got {header}"
        )
    return reader


def load_single_day(path: Path) -> list[tuple[str, int, Label]]:
    """Rows of (fqdn, day, label); each domain may appear once."""
    out: list[tuple[str, int, Label]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for row in _open_rows(fh, ["fqdn", "day", "label"], str(path)):
            if not row:
                continue
            fqdn = row[0].strip().lower()
            if fqdn in seen:
                raise DuplicateDomain(f"{fqdn} is labeled twice in {path}")
            seen.add(fqdn)
            out.append((fqdn, int(row[1]), parse_label(row[2])))
    return out


def load_timelines(
    path: Path,
    registration_date: dt.date = dt.date(2024, 8, 10),
    horizon: int = 20,
) -> list[DomainTimeline]:
    """Build per-domain timelines from full-coverage daily labels.

    Every domain must cover days 1..horizon without gaps.  Domains that
    never turn PGDN load fine (date_of_change absent) but are logged,
    since forecast runs will have to drop them.
    """
    by_domain: dict[str, dict[int, Label]] = {}
    with open(path, encoding="utf-8") as fh:
        for row in _open_rows(fh, ["fqdn", "day", "label"], str(path)):
            if not row:
                continue
            fqdn = row[0].strip().lower()
            day = int(row[1])
            by_domain.setdefault(fqdn, {})[day] = parse_label(row[2])

    suffixes = load_default_suffixes()
    timelines = []
    for fqdn in sorted(by_domain):
        days = by_domain[fqdn]
        missing = [d for d in range(1, horizon + 1) if d not in days]
        if missing:
            raise GapInCoverage(f"{fqdn} misses day(s) {missing} in {path}")
        domain = parse_domain(fqdn, registration_date, suffixes)
        tl = DomainTimeline(
            domain, tuple((d, days[d]) for d in range(1, horizon + 1))
        )
        if tl.date_of_change is None:
            log.warning("%s never turns PGDN; forecast runs will skip it", fqdn)
        timelines.append(tl)
    return timelines
