"""Call workload, data-packet routing on learned tables, per-call accounting and CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .topology import FailureSchedule, Topology

NodeId = int

METRICS_COLUMNS = ("time", "delivered", "dropped", "ant_launches", "ant_deaths", "mean_delay")
SUMMARY_COLUMNS = ("calls", "completed", "completion_rate", "mean_delay", "p95_delay", "drops")


class WorkloadError(ValueError):
    pass


class NoRouteError(LookupError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    calls: int = 0
    rate: float = 1.0
    packet_count: int = 10
    packet_size: int = 8000
    start: float = 0.0
    convergence_window: float = 0.0

    def __post_init__(self):
        if self.calls < 0:
            raise WorkloadError("calls must be >= 0")
        if not self.rate > 0:
            raise WorkloadError("rate must be > 0")
        if self.packet_count < 1:
            raise WorkloadError("packet_count must be >= 1")
        if not self.packet_size > 0:
            raise WorkloadError("packet_size must be > 0")
        if self.start < 0 or self.convergence_window < 0:
            raise WorkloadError("start and convergence_window must be >= 0")


@dataclass(frozen=True)
class CallSpec:
    call_id: int
    issue_time: float
    source: NodeId
    destination: NodeId
    packet_count: int = 10
    packet_size: int = 8000


@dataclass
class CallRecord:
    call_id: int
    packet_count: int
    delivered: int = 0
    dropped: int = 0
    first_delivery: float | None = None
    last_delivery: float | None = None
    delays: list[float] = field(default_factory=list)
    hops: list[int] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.delivered == self.packet_count

    @property
    def outcome(self) -> str:
        return "completed" if self.completed else "failed"

    @property
    def mean_delay(self) -> float | None:
        return sum(self.delays) / len(self.delays) if self.delays else None


@dataclass(frozen=True)
class RunSummary:
    calls: int
    completed: int
    completion_rate: float | None
    mean_delay: float | None
    p95_delay: float | None
    drops: int

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


@dataclass
class MetricsSeries:
    interval: float
    delivered: list[int] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    ant_launches: list[int] = field(default_factory=list)
    ant_deaths: list[int] = field(default_factory=list)
    delay_sum: list[float] = field(default_factory=list)
    summary: RunSummary | None = None

    def _grow(self, index: int) -> None:
        while len(self.delivered) <= index:
            self.delivered.append(0)
            self.dropped.append(0)
            self.ant_launches.append(0)
            self.ant_deaths.append(0)
            self.delay_sum.append(0.0)

    def bucket(self, t: float) -> int:
        i = int(t // self.interval)
        self._grow(i)
        return i

    def pad_to(self, duration: float) -> None:
        if duration > 0:
            self._grow(math.ceil(duration / self.interval) - 1)

    def rows(self) -> list[list[str]]:
        out = []
        for i in range(len(self.delivered)):
            mean = self.delay_sum[i] / self.delivered[i] if self.delivered[i] else None
            out.append([
                _fmt(i * self.interval),
                str(self.delivered[i]),
                str(self.dropped[i]),
                str(self.ant_launches[i]),
                str(self.ant_deaths[i]),
                _fmt(mean),
            ])
        return out

    def totals(self) -> dict[str, int]:
        return {
            "delivered": sum(self.delivered),
            "dropped": sum(self.dropped),
            "ant_launches": sum(self.ant_launches),
            "ant_deaths": sum(self.ant_deaths),
        }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def generate_calls(
    count: int,
    rate: float,
    topo: Topology,
    rng: random.Random,
    *,
    start: float = 0.0,
    packet_count: int = 10,
    packet_size: int = 8000,
    schedule: FailureSchedule | None = None,
) -> list[CallSpec]:
    """Poisson call arrivals with endpoints drawn uniformly from distinct live node pairs."""
    if count < 0:
        raise WorkloadError("count must be >= 0")
    if len(topo.nodes) < 2:
        raise WorkloadError("need at least 2 nodes to generate calls")
    calls = []
    t = start
    for call_id in range(count):
        gap = 0.0
        while gap <= 0.0:
            gap = rng.expovariate(rate)
        t += gap
        removed = schedule.removed_by(t) if schedule else frozenset()
        live = sorted(topo.nodes - removed)
        if len(live) < 2:
            raise WorkloadError(f"fewer than 2 live nodes at t={t}")
        src = live[int(rng.random() * len(live))]
        others = [n for n in live if n != src]
        dst = others[int(rng.random() * len(others))]
        calls.append(CallSpec(call_id, t, src, dst, packet_count, packet_size))
    return calls


def route_data_packet(at: NodeId, dest: NodeId, table) -> NodeId:
    """Greedy next hop: highest probability, ties to the smallest neighbor id."""
    row = table.rows.get(dest) if hasattr(table, "rows") else table.get(dest)
    if not row:
        raise NoRouteError(f"node {at} has no route to {dest}")
    return min(row, key=lambda k: (-row[k], k))


def summarize(records: Iterable[CallRecord], series: MetricsSeries | None = None) -> RunSummary:
    records = list(records)
    done = [r for r in records if r.completed]
    delays = [r.mean_delay for r in done]
    drops = series.totals()["dropped"] if series is not None else sum(r.dropped for r in records)
    return RunSummary(
        calls=len(records),
        completed=len(done),
        completion_rate=len(done) / len(records) if records else None,
        mean_delay=float(np.mean(delays)) if delays else None,
        p95_delay=float(np.percentile(delays, 95)) if delays else None,
        drops=drops,
    )


def workload_digest(calls: Sequence[CallSpec]) -> str:
    h = hashlib.sha256()
    for c in calls:
        h.update(f"{c.call_id},{c.issue_time!r},{c.source},{c.destination},{c.packet_count},{c.packet_size};".encode())
    return h.hexdigest()


def metrics_csv(series: MetricsSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    w.writerows(series.rows())
    return buf.getvalue()


def summary_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerow(summary.row())
    return buf.getvalue()


def cohort(
    calls: Sequence[CallSpec],
    records: Mapping[int, CallRecord],
    topo: Topology,
    schedule: FailureSchedule,
    window: float,
) -> list[CallRecord]:
    """Calls issued at least ``window`` after the final removal whose endpoints
    are still connected in the final topology."""
    final = schedule.apply(topo)
    since = (schedule.last_time or 0.0) + window
    out = []
    for c in calls:
        if c.issue_time < since:
            continue
        if c.source not in final.nodes or c.destination not in final.nodes:
            continue
        if final.is_connected(c.source, c.destination):
            out.append(records[c.call_id])
    return out
