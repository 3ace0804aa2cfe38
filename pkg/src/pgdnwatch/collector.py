"""Distributed detection orchestration: producer, queues, consumers, store.

One work queue per probe type; competing consumers drain them and commit
results to the observation store.  Upserts are keyed by (fqdn, probe,
day), so at-least-once delivery still yields exactly-once effects, and a
fixture-driven run produces byte-identical stores for any consumer count.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import queue as queue_mod
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import MalformedDomain, QueueUnavailable, StoreUnavailable
from .serialize import dump_observation_line, observation_from_json
from .types import DailyObservation, DomainName, HistoryRecord, parse_domain


class ProbeType(enum.Enum):
    DNS = "dns"
    IP_HISTORY = "ip_history"
    HTML = "html"
    CERTIFICATE = "certificate"
    WHOIS = "whois"
    SITE_HISTORY = "site_history"


#: Probes repeated every detection day.
DAILY_PROBES = (ProbeType.DNS, ProbeType.IP_HISTORY, ProbeType.HTML,
                ProbeType.CERTIFICATE)
#: Probes executed once, on the registration day.
ONE_SHOT_PROBES = (ProbeType.WHOIS, ProbeType.SITE_HISTORY)


@dataclass(frozen=True)
class ProbeTask:
    domain: DomainName
    probe_type: ProbeType
    day_index: int

    def __post_init__(self) -> None:
        if self.day_index < 1:
            raise ValueError("day_index is 1-based")
        if self.probe_type in ONE_SHOT_PROBES and self.day_index != 1:
            raise ValueError(f"{self.probe_type.value} runs only on day 1")


@dataclass
class DomainProbeState:
    domain: DomainName
    cert_acquired_flag: bool = False
    days_completed: int = 0

    def mark_cert_acquired(self) -> None:
        # one-way transition; repeated calls are no-ops
        self.cert_acquired_flag = True


class VirtualClock:
    """Replaces the 24-hour wall cadence so 20-day runs finish instantly."""

    def __init__(self, start_day: int = 1) -> None:
        if start_day < 1:
            raise ValueError("days are 1-based")
        self.day = start_day

    def advance(self) -> int:
        self.day += 1
        return self.day


class WorkQueue:
    """In-process FIFO with the small surface a broker client would have."""

    def __init__(self, name: str = "") -> None:
        self.name = name
        self._q: queue_mod.Queue = queue_mod.Queue()
        self._closed = False

    def put(self, task: ProbeTask) -> None:
        if self._closed:
            raise QueueUnavailable(f"queue {self.name!r} is closed")
        self._q.put(task)

    def requeue(self, task: ProbeTask) -> None:
        self.put(task)

    def get(self, timeout: float = 0.05) -> ProbeTask | None:
        """Next task, or None once the queue stays empty past the timeout."""
        if self._closed:
            raise QueueUnavailable(f"queue {self.name!r} is closed")
        try:
            return self._q.get(timeout=timeout)
        except queue_mod.Empty:
            return None

    def close(self) -> None:
        self._closed = True

    def __len__(self) -> int:
        return self._q.qsize()


Broker = dict


def make_broker() -> dict[ProbeType, WorkQueue]:
    return {pt: WorkQueue(pt.value) for pt in ProbeType}


# ---------------------------------------------------------------------------
# Observation store


class ObservationStore:
    """Thread-safe per-probe row store with idempotent upserts.

    A row exists for every executed probe; a failed probe stores a None
    payload, which merges into an absent field.  observations() merges the
    rows of each (domain, day) into a DailyObservation.
    """

    def __init__(self) -> None:
        self._rows: dict[tuple[str, int, str], object] = {}
        self._domains: dict[str, DomainName] = {}
        self._lock = threading.Lock()
        self._unavailable = False

    def set_unavailable(self, value: bool) -> None:
        self._unavailable = value

    def upsert(self, domain: DomainName, day: int, probe: ProbeType,
               payload: object | None) -> None:
        if self._unavailable:
            raise StoreUnavailable("observation store is not accepting commits")
        with self._lock:
            self._domains.setdefault(domain.fqdn, domain)
            self._rows[(domain.fqdn, day, probe.value)] = payload

    def rows(self) -> list[tuple[str, int, str, object]]:
        with self._lock:
            return sorted(
                (fqdn, day, probe, payload)
                for (fqdn, day, probe), payload in self._rows.items()
            )

    def row_keys(self) -> set[tuple[str, int, str]]:
        with self._lock:
            return set(self._rows)

    def has_cert(self, fqdn: str) -> bool:
        """True once any certificate probe actually returned a record."""
        with self._lock:
            return any(
                probe == ProbeType.CERTIFICATE.value and payload is not None
                for (f, _, probe), payload in self._rows.items()
                if f == fqdn
            )

    def domains(self) -> list[DomainName]:
        with self._lock:
            return [self._domains[f] for f in sorted(self._domains)]

    def observations(self) -> list[DailyObservation]:
        """Merged per-(domain, day) observations, sorted for determinism."""
        with self._lock:
            days: dict[tuple[str, int], dict[str, object]] = {}
            for (fqdn, day, probe), payload in self._rows.items():
                days.setdefault((fqdn, day), {})[probe] = payload
            out = []
            for (fqdn, day) in sorted(days):
                probes = days[(fqdn, day)]
                site = probes.get(ProbeType.SITE_HISTORY.value)
                ip_count = probes.get(ProbeType.IP_HISTORY.value)
                history = None
                if site is not None or ip_count is not None:
                    site = site or {}
                    history = HistoryRecord(
                        site_age_years=int(site.get("site_age_years", 0)),
                        historical_titles=tuple(site.get("historical_titles", ())),
                        ip_domain_count=int(ip_count or 0),
                    )
                out.append(DailyObservation(
                    domain=self._domains[fqdn],
                    day_index=day,
                    dns=probes.get(ProbeType.DNS.value),
                    html=probes.get(ProbeType.HTML.value),
                    cert=probes.get(ProbeType.CERTIFICATE.value),
                    whois=probes.get(ProbeType.WHOIS.value),
                    history=history,
                ))
            return out

    def save(self, path: Path) -> int:
        """Canonical JSON-lines dump; identical content for identical rows."""
        observations = self.observations()
        with open(path, "w", encoding="utf-8") as fh:
            for obs in observations:
                fh.write(dump_observation_line(obs) + "\n")
        return len(observations)

    def canonical_dump(self) -> str:
        return "".join(dump_observation_line(o) + "\n" for o in self.observations())

    @classmethod
    def load(cls, path: Path) -> "ObservationStore":
        """Rebuild per-probe rows from a canonical observation dump."""
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obs = observation_from_json(json.loads(line))
                store.ingest_observation(obs)
        return store

    def ingest_observation(self, obs: DailyObservation) -> None:
        d, day = obs.domain, obs.day_index
        if obs.dns is not None:
            self.upsert(d, day, ProbeType.DNS, obs.dns)
        if obs.html is not None:
            self.upsert(d, day, ProbeType.HTML, obs.html)
        if obs.cert is not None:
            self.upsert(d, day, ProbeType.CERTIFICATE, obs.cert)
        if obs.whois is not None:
            self.upsert(d, day, ProbeType.WHOIS, obs.whois)
        if obs.history is not None:
            h = obs.history
            if h.site_age_years or h.historical_titles:
                self.upsert(d, day, ProbeType.SITE_HISTORY, {
                    "site_age_years": h.site_age_years,
                    "historical_titles": h.historical_titles,
                })
            self.upsert(d, day, ProbeType.IP_HISTORY, h.ip_domain_count)
        with self._lock:
            self._domains.setdefault(d.fqdn, d)


# ---------------------------------------------------------------------------
# Producer


@dataclass(frozen=True)
class PublishReport:
    published: int
    accepted_domains: tuple[DomainName, ...]
    rejects: tuple[tuple[str, str], ...] = ()


def enqueue_domains(
    raw_list: Sequence[str],
    day: int,
    queues: Mapping[ProbeType, WorkQueue],
    *,
    registration_date: dt.date,
    suffixes: frozenset[str],
) -> PublishReport:
    """Standardize raw domain strings and fan them out to every applicable
    probe queue for the given day.

    Day 1 publishes to all six queues; later days to the four daily ones.
    Duplicates are collapsed, malformed entries are skipped and reported.
    """
    applicable = tuple(ProbeType) if day == 1 else DAILY_PROBES
    for pt in applicable:
        if pt not in queues:
            raise QueueUnavailable(f"no queue for probe type {pt.value}")

    seen: set[str] = set()
    accepted: list[DomainName] = []
    rejects: list[tuple[str, str]] = []
    for raw in raw_list:
        try:
            domain = parse_domain(raw, registration_date, suffixes)
        except MalformedDomain as exc:
            rejects.append((raw, str(exc)))
            continue
        if domain.fqdn in seen:
            continue
        seen.add(domain.fqdn)
        accepted.append(domain)

    published = 0
    for domain in accepted:
        for pt in applicable:
            queues[pt].put(ProbeTask(domain, pt, day))
            published += 1
    return PublishReport(published, tuple(accepted), tuple(rejects))


# ---------------------------------------------------------------------------
# Scheduler


def detection_cycle(
    domains: Sequence[DomainName],
    day: int,
    state: Mapping[str, DomainProbeState],
) -> list[ProbeTask]:
    """Pure per-day schedule.

    DNS, IP-history and HTML run every day; the certificate probe only
    until a certificate has been acquired; WHOIS and site history only on
    day 1.
    """
    if day < 1:
        raise ValueError("day is 1-based")
    tasks = []
    for domain in domains:
        tasks.append(ProbeTask(domain, ProbeType.DNS, day))
        tasks.append(ProbeTask(domain, ProbeType.IP_HISTORY, day))
        tasks.append(ProbeTask(domain, ProbeType.HTML, day))
        domain_state = state.get(domain.fqdn)
        if domain_state is None or not domain_state.cert_acquired_flag:
            tasks.append(ProbeTask(domain, ProbeType.CERTIFICATE, day))
        if day == 1:
            tasks.append(ProbeTask(domain, ProbeType.WHOIS, 1))
            tasks.append(ProbeTask(domain, ProbeType.SITE_HISTORY, 1))
    return tasks


def run_consumer(
    queue: WorkQueue,
    prober,
    store: ObservationStore,
    stop: threading.Event | None = None,
    idle_timeout: float = 0.05,
) -> int:
    """Drain one queue through one prober; returns the processed count.

    A probe failure commits a None payload (absent field).  A store outage
    puts the task back and re-raises, preserving at-least-once delivery.
    """
    processed = 0
    while stop is None or not stop.is_set():
        task = queue.get(timeout=idle_timeout)
        if task is None:
            break
        payload = prober.probe(task)
        try:
            store.upsert(task.domain, task.day_index, task.probe_type, payload)
        except StoreUnavailable:
            queue.requeue(task)
            raise
        processed += 1
    return processed


def run_detection(
    domains: Sequence[DomainName],
    days: int,
    probers: Mapping[ProbeType, object],
    store: ObservationStore,
    consumers: int = 1,
    clock: VirtualClock | None = None,
) -> dict[str, DomainProbeState]:
    """Run the full daily cycle for days 1..N over an in-process broker.

    Per day: schedule, publish, drain each queue with the configured number
    of competing consumers, then refresh certificate flags from the store.
    """
    if days < 1:
        raise ValueError("need at least one day")
    if consumers < 1:
        raise ValueError("need at least one consumer")
    clock = clock or VirtualClock()
    state = {d.fqdn: DomainProbeState(d) for d in domains}

    while clock.day <= days:
        day = clock.day
        tasks = detection_cycle(domains, day, state)
        broker = make_broker()
        for task in tasks:
            broker[task.probe_type].put(task)

        threads = []
        errors: list[BaseException] = []

        def drain(q: WorkQueue, prober) -> None:
            try:
                run_consumer(q, prober, store)
            except BaseException as exc:  # surfaced after join
                errors.append(exc)

        for pt, q in broker.items():
            for _ in range(consumers):
                t = threading.Thread(target=drain, args=(q, probers[pt]))
                t.start()
                threads.append(t)
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

        for fqdn, domain_state in state.items():
            if store.has_cert(fqdn):
                domain_state.mark_cert_acquired()
            domain_state.days_completed = day
        clock.advance()
    return state
