"""Deterministic discrete-event core.

One global heap of ``(time, seq, kind, payload)`` events drives everything.
Every directed link has a non-preemptive transmitter with two FIFO classes;
backward ants ride the HIGH class, forward ants and data the LOW class.
A packet leaving a node first pays that node's processing delay, then joins
the link queue.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from . import ants as antops
from .routing import AntNetParams, PheromoneTable, TrafficModel, init_uniform, select_next_hop
from .topology import FailureSchedule, LinkSpec, Topology, TopologyError, transmission_weight
from .workload import (
    CallRecord,
    CallSpec,
    MetricsSeries,
    NoRouteError,
    WorkloadSpec,
    generate_calls,
    route_data_packet,
    summarize,
)

NodeId = int
HIGH, LOW = 0, 1


class SimError(RuntimeError):
    pass


class EventKind(IntEnum):
    NODE_REMOVAL = 0
    CALL_LAUNCH = 1
    ANT_LAUNCH = 2
    DISPATCH = 3
    TX_END = 4
    ARRIVAL = 5


class PacketKind(IntEnum):
    FORWARD_ANT = 0
    BACKWARD_ANT = 1
    DATA = 2


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    duration: float = 60.0
    processing_delay_base: float = 1e-4
    load_smoothing: float = 1.0
    ant_size: int = 512
    metrics_interval: float = 1.0
    data_ttl: int = 255
    routing: str = "antnet"
    ants: bool = True
    trace: bool = False
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)

    def __post_init__(self):
        if self.duration < 0:
            raise SimError("duration must be >= 0")
        if self.processing_delay_base < 0:
            raise SimError("processing_delay_base must be >= 0")
        if not self.load_smoothing > 0:
            raise SimError("load_smoothing must be > 0")
        if not self.ant_size > 0:
            raise SimError("ant_size must be > 0")
        if not self.metrics_interval > 0:
            raise SimError("metrics_interval must be > 0")
        if self.data_ttl < 1:
            raise SimError("data_ttl must be >= 1")
        if self.routing not in ("antnet", "static"):
            raise SimError(f"unknown routing mode {self.routing!r}")


@dataclass(slots=True)
class Packet:
    pid: int
    kind: PacketKind
    size: float
    born: float
    call_id: int = -1
    dest: NodeId = -1
    hops: int = 0
    ant: object = None
    path: tuple = ()
    est_hop: float = 0.0

    @property
    def priority(self) -> int:
        return HIGH if self.kind == PacketKind.BACKWARD_ANT else LOW


class EventQueue:
    """Min-heap keyed by (time, insertion sequence)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def push(self, time: float, kind: EventKind, payload=None) -> int:
        if time < self.now:
            raise SimError(f"event scheduled in the past ({time} < {self.now})")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (time, seq, kind, payload))
        return seq

    def pop(self):
        event = heapq.heappop(self._heap)
        self.now = event[0]
        return event

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        return len(self._heap)


class LinkQueue:
    """Transmitter for one direction of a link."""

    __slots__ = ("src", "dst", "link", "queues", "bits", "busy_until", "current", "alive")

    def __init__(self, src: NodeId, dst: NodeId, link: LinkSpec):
        self.src = src
        self.dst = dst
        self.link = link
        self.queues = (deque(), deque())
        self.bits = [0.0, 0.0]
        self.busy_until = -1.0
        self.current: Packet | None = None
        self.alive = True

    def bits_ahead(self, priority: int, now: float) -> float:
        residual = max(self.busy_until - now, 0.0) * self.link.bandwidth if self.current else 0.0
        ahead = self.bits[HIGH]
        if priority == LOW:
            ahead += self.bits[LOW]
        return ahead + residual

    def __len__(self) -> int:
        return len(self.queues[HIGH]) + len(self.queues[LOW])


class NodeRuntime:
    """Per-node transmission queues and smoothed processing load (packets/s)."""

    def __init__(self, node: NodeId, smoothing: float):
        self.node = node
        self.smoothing = smoothing
        self.links: dict[NodeId, LinkQueue] = {}
        self._rate = 0.0
        self._stamp = 0.0

    def processing_load(self, now: float) -> float:
        return self._rate * math.exp(-(now - self._stamp) / self.smoothing)

    def note_processed(self, now: float) -> None:
        self._rate = self.processing_load(now) + 1.0 / self.smoothing
        self._stamp = now


def link_term(link: LinkSpec, queue_bits_ahead: float, size: float) -> float:
    if not link.up:
        raise SimError(f"link {link.a}-{link.b} is down")
    return (queue_bits_ahead + size) / link.bandwidth + link.propagation_delay


def node_term(load: float, base: float) -> float:
    return base * (1.0 + load)


def hop_delay(link: LinkSpec, queue_bits_ahead: float, packet: Packet, node: NodeRuntime | float, base: float, now: float = 0.0):
    """Return the (link load, node load) terms of one hop; their sum is the hop time."""
    load = node if isinstance(node, (int, float)) else node.processing_load(now)
    return link_term(link, queue_bits_ahead, packet.size), node_term(load, base)


def enqueue(queue: LinkQueue, packet: Packet) -> bool:
    """Append to the packet's class; False when the link is gone (caller records the drop)."""
    if not queue.alive or not queue.link.up:
        return False
    prio = packet.priority
    queue.queues[prio].append(packet)
    queue.bits[prio] += packet.size
    return True


def next_for_transmission(queue: LinkQueue) -> Packet | None:
    for prio in (HIGH, LOW):
        if queue.queues[prio]:
            packet = queue.queues[prio].popleft()
            queue.bits[prio] -= packet.size
            return packet
    return None


@dataclass
class Counters:
    data_injected: int = 0
    data_delivered: int = 0
    data_dropped: int = 0
    ants_launched: int = 0
    ants_completed: int = 0
    ants_destroyed: int = 0
    in_flight: int = 0
    events: int = 0
    stale_updates: int = 0

    def reconciles(self) -> bool:
        injected = self.data_injected + self.ants_launched
        terminal = self.data_delivered + self.data_dropped + self.ants_completed + self.ants_destroyed
        return injected == terminal + self.in_flight


@dataclass
class SimulationResult:
    series: MetricsSeries
    calls: list[CallSpec]
    records: dict[int, CallRecord]
    counters: Counters
    trace_hash: str
    tx_trace: list | None
    topology: Topology
    tables: dict[NodeId, PheromoneTable]

    @property
    def summary(self):
        return self.series.summary


class Simulation:
    def __init__(self, config: SimConfig, topo: Topology, schedule: FailureSchedule | None = None,
                 params: AntNetParams | None = None, calls: list[CallSpec] | None = None):
        if not topo.nodes:
            raise SimError("topology has no nodes")
        schedule = schedule or FailureSchedule()
        schedule.validate_against(topo)
        self.config = config
        self.params = params or AntNetParams()
        self.initial_topology = topo
        self.topo = topo
        self.schedule = schedule
        self.rng = random.Random(config.seed)
        self.queue = EventQueue()
        self.series = MetricsSeries(config.metrics_interval)
        self.counters = Counters()
        self.live_packets: dict[int, Packet] = {}
        self._pid = 0
        self._ant_id = 0
        self._hash = hashlib.blake2b(digest_size=16)
        self.tx_trace: list | None = [] if config.trace else None

        self.nodes: dict[NodeId, NodeRuntime] = {}
        for n in sorted(topo.nodes):
            rt = NodeRuntime(n, config.load_smoothing)
            for m in sorted(topo.neighbors(n)):
                rt.links[m] = LinkQueue(n, m, topo.link(n, m))
            self.nodes[n] = rt

        self.tables: dict[NodeId, PheromoneTable] = {}
        self.models: dict[NodeId, TrafficModel] = {}
        if config.routing == "antnet":
            for n in sorted(topo.nodes):
                dests = topo.nodes - {n}
                nbrs = topo.neighbors(n)
                self.tables[n] = init_uniform(n, nbrs, dests) if nbrs else PheromoneTable(n)
                self.models[n] = TrafficModel.for_destinations(n, dests)
        self._static_paths: dict[tuple[NodeId, NodeId], tuple[NodeId, ...] | None] = {}

        wl = config.workload
        if calls is None:
            calls = generate_calls(
                wl.calls, wl.rate, topo, self.rng, start=wl.start,
                packet_count=wl.packet_count, packet_size=wl.packet_size, schedule=schedule,
            ) if wl.calls else []
        self.calls = calls
        self.records = {c.call_id: CallRecord(c.call_id, c.packet_count) for c in calls}
        self._calls_by_id = {c.call_id: c for c in calls}

        if config.duration > 0:
            for t, node in schedule.events:
                self.queue.push(t, EventKind.NODE_REMOVAL, node)
            for c in calls:
                self.queue.push(c.issue_time, EventKind.CALL_LAUNCH, c.call_id)
            if config.ants and config.routing == "antnet":
                interval = self.params.launch_interval
                for n in sorted(topo.nodes):
                    self.queue.push(self.rng.random() * interval, EventKind.ANT_LAUNCH, n)

    # -- bookkeeping --------------------------------------------------------

    def _new_packet(self, kind: PacketKind, size: float, **kw) -> Packet:
        self._pid += 1
        p = Packet(self._pid, kind, size, self.queue.now, **kw)
        self.live_packets[p.pid] = p
        return p

    def _lose(self, p: Packet) -> None:
        """Terminal loss: data counts as dropped, ants as destroyed."""
        if self.live_packets.pop(p.pid, None) is None:
            return
        now = self.queue.now
        if p.kind == PacketKind.DATA:
            self.counters.data_dropped += 1
            self.series.dropped[self.series.bucket(now)] += 1
            self.records[p.call_id].dropped += 1
        else:
            self.counters.ants_destroyed += 1
            self.series.ant_deaths[self.series.bucket(now)] += 1

    def live(self, node: NodeId) -> bool:
        return node in self.topo.nodes

    # -- sending ------------------------------------------------------------

    def _send(self, p: Packet, at: NodeId, to: NodeId) -> None:
        """Charge node processing at ``at`` and schedule the enqueue onto link at->to."""
        now = self.queue.now
        rt = self.nodes[at]
        nt = node_term(rt.processing_load(now), self.config.processing_delay_base)
        rt.note_processed(now)
        p.est_hop = nt
        self.queue.push(now + nt, EventKind.DISPATCH, (p, at, to))

    def _dispatch(self, p: Packet, at: NodeId, to: NodeId) -> None:
        if p.pid not in self.live_packets:
            return
        lq = self.nodes[at].links.get(to) if self.live(at) else None
        if lq is None or not lq.alive:
            self._lose(p)
            return
        now = self.queue.now
        if p.kind == PacketKind.FORWARD_ANT:
            p.est_hop += link_term(lq.link, lq.bits_ahead(LOW, now), p.size)
        enqueue(lq, p)
        if lq.current is None:
            self._start_tx(lq)

    def _start_tx(self, lq: LinkQueue) -> None:
        p = next_for_transmission(lq)
        if p is None:
            return
        now = self.queue.now
        if self.tx_trace is not None:
            self.tx_trace.append((now, lq.src, lq.dst, p.priority, len(lq.queues[HIGH]), len(lq.queues[LOW]), p.pid))
        lq.current = p
        lq.busy_until = now + p.size / lq.link.bandwidth
        self.queue.push(lq.busy_until, EventKind.TX_END, lq)

    def _tx_end(self, lq: LinkQueue) -> None:
        p = lq.current
        lq.current = None
        if p is not None and p.pid in self.live_packets:
            self.queue.push(self.queue.now + lq.link.propagation_delay, EventKind.ARRIVAL, (p, lq.dst, lq.src))
        if lq.alive:
            self._start_tx(lq)

    # -- event handlers -----------------------------------------------------

    def _call_launch(self, call_id: int) -> None:
        c = self._calls_by_id[call_id]
        for _ in range(c.packet_count):
            p = self._new_packet(PacketKind.DATA, c.packet_size, call_id=c.call_id, dest=c.destination)
            self.counters.data_injected += 1
            if self.config.routing == "static":
                p.path = self._static_path(c.source, c.destination) or ()
            self._route_data(p, c.source)

    def _static_path(self, src: NodeId, dst: NodeId):
        key = (src, dst)
        if key not in self._static_paths:
            weight = transmission_weight(self.config.workload.packet_size)
            try:
                path, _ = self.initial_topology.dijkstra_path(src, dst, weight)
                self._static_paths[key] = tuple(path)
            except TopologyError:
                self._static_paths[key] = None
        return self._static_paths[key]

    def _route_data(self, p: Packet, at: NodeId) -> None:
        if p.hops >= self.config.data_ttl:
            self._lose(p)
            return
        if self.config.routing == "static":
            if not p.path or p.hops + 1 >= len(p.path):
                self._lose(p)
                return
            nxt = p.path[p.hops + 1]
        else:
            try:
                nxt = route_data_packet(at, p.dest, self.tables[at])
            except NoRouteError:
                self._lose(p)
                return
        p.hops += 1
        self._send(p, at, nxt)

    def _ant_launch(self, node: NodeId) -> None:
        if not self.live(node):
            return
        now = self.queue.now
        self.queue.push(now + self.params.launch_interval, EventKind.ANT_LAUNCH, node)
        if len(self.topo.nodes) < 2:
            return
        self._ant_id += 1
        ant = antops.spawn_forward(self._ant_id, node, self.topo.nodes, now, self.rng)
        p = self._new_packet(PacketKind.FORWARD_ANT, self.config.ant_size, ant=ant, dest=ant.destination)
        self.counters.ants_launched += 1
        self.series.ant_launches[self.series.bucket(now)] += 1
        self._forward_step(p, node)

    def _forward_step(self, p: Packet, at: NodeId) -> None:
        ant: antops.ForwardAnt = p.ant
        if ant.hops >= 2 * len(self.topo.nodes):
            self._lose(p)
            return
        row = self.tables[at].rows.get(ant.destination)
        if not row:
            self._lose(p)
            return
        nxt = select_next_hop(row, ant.visited, self.rng, self.params.explore)
        ant.hops += 1
        self._send(p, at, nxt)

    def _arrival(self, p: Packet, at: NodeId, came_from: NodeId) -> None:
        if p.pid not in self.live_packets:
            return
        if not self.live(at):
            self._lose(p)
            return
        if p.kind == PacketKind.DATA:
            if at == p.dest:
                self._deliver(p)
            else:
                self._route_data(p, at)
        elif p.kind == PacketKind.FORWARD_ANT:
            ant: antops.ForwardAnt = p.ant
            if ant.on_stack(at):
                antops.remove_loop(ant, at)
            else:
                antops.record_visit(ant, at, ant.elapsed + p.est_hop)
            if at == ant.destination:
                back = antops.to_backward(ant)
                p.kind = PacketKind.BACKWARD_ANT
                p.ant = back
                nxt = back.advance()
                self._send(p, at, nxt)
            else:
                self._forward_step(p, at)
        else:
            self._backward_step(p, at)

    def _backward_step(self, p: Packet, at: NodeId) -> None:
        back: antops.BackwardAnt = p.ant
        if not self.live(back.destination):
            self._lose(p)
            return
        table = self.tables[at]
        came_from = back.stack[back.cursor + 1].node
        targets = back.stack[back.cursor + 1:] if self.params.subpath else back.stack[-1:]
        fresh = all(came_from in table.rows.get(t.node, ()) for t in targets)
        if fresh:
            nxt = antops.backward_update_at(back, at, table, self.models[at], self.params)
        else:
            # the reverse path changed under the ant; skip the stale update
            self.counters.stale_updates += 1
            nxt = back.advance()
        if nxt is None:
            self.live_packets.pop(p.pid, None)
            self.counters.ants_completed += 1
        else:
            self._send(p, at, nxt)

    def _deliver(self, p: Packet) -> None:
        now = self.queue.now
        self.live_packets.pop(p.pid, None)
        self.counters.data_delivered += 1
        delay = now - p.born
        b = self.series.bucket(now)
        self.series.delivered[b] += 1
        self.series.delay_sum[b] += delay
        rec = self.records[p.call_id]
        rec.delivered += 1
        rec.delays.append(delay)
        rec.hops.append(p.hops)
        if rec.first_delivery is None:
            rec.first_delivery = now
        rec.last_delivery = now

    def apply_node_removal(self, node: NodeId) -> None:
        if not self.live(node):
            raise SimError(f"node {node} already removed")
        self.topo = self.topo.remove_node(node)
        rt = self.nodes[node]
        for lq in rt.links.values():
            self._purge(lq, include_current=True)
        for other in self.nodes.values():
            lq = other.links.pop(node, None)
            if lq is not None:
                # the frame already on the wire is dropped when it reaches the dead node
                self._purge(lq, include_current=False)
        for n, table in self.tables.items():
            if n != node:
                table.drop_node(node)
                self.models[n].stats.pop(node, None)
        self.tables.pop(node, None)
        self.models.pop(node, None)

    def _purge(self, lq: LinkQueue, include_current: bool) -> None:
        lq.alive = False
        for q in lq.queues:
            while q:
                self._lose(q.popleft())
        lq.bits = [0.0, 0.0]
        if include_current and lq.current is not None:
            self._lose(lq.current)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SimulationResult:
        duration = self.config.duration
        q = self.queue
        handlers = {
            EventKind.NODE_REMOVAL: self.apply_node_removal,
            EventKind.CALL_LAUNCH: self._call_launch,
            EventKind.ANT_LAUNCH: self._ant_launch,
        }
        last = -math.inf
        while q and q.peek_time() <= duration:
            time, seq, kind, payload = q.pop()
            if time < last:
                raise SimError("clock moved backwards")
            last = time
            self.counters.events += 1
            self._hash.update(f"{time!r}:{seq}:{int(kind)};".encode())
            if kind == EventKind.DISPATCH:
                self._dispatch(*payload)
            elif kind == EventKind.TX_END:
                self._tx_end(payload)
            elif kind == EventKind.ARRIVAL:
                self._arrival(*payload)
            else:
                handlers[kind](payload)
        self.counters.in_flight = len(self.live_packets)
        if duration > 0:
            self.series.pad_to(duration)
        self.series.summary = summarize(self.records.values(), self.series)
        return SimulationResult(
            series=self.series,
            calls=self.calls,
            records=self.records,
            counters=self.counters,
            trace_hash=self._hash.hexdigest(),
            tx_trace=self.tx_trace,
            topology=self.topo,
            tables=self.tables,
        )


def run(config: SimConfig, topo: Topology, schedule: FailureSchedule | None = None,
        params: AntNetParams | None = None, calls: list[CallSpec] | None = None) -> SimulationResult:
    return Simulation(config, topo, schedule, params, calls).run()


def priority_violations(tx_trace) -> int:
    """LOW-class transmissions started while a HIGH packet waited on the same link.

    Trace rows are ``(time, src, dst, priority, high_waiting, low_waiting, pid)``.
    """
    return sum(1 for row in tx_trace if row[3] == LOW and row[4] > 0)
