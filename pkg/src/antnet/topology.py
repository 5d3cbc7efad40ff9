"""Network graph model, node removal, connectivity and the static shortest-path baseline."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

NodeId = int


class TopologyError(ValueError):
    """Raised for malformed topology documents or invalid graph queries."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NoPathError(TopologyError):
    pass


def link_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class LinkSpec:
    a: NodeId
    b: NodeId
    bandwidth: float
    propagation_delay: float
    up: bool = True

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError(f"link endpoints must differ (got {self.a}-{self.b})")
        if not self.bandwidth > 0:
            raise TopologyError(f"link {self.a}-{self.b}: bandwidth must be > 0")
        if self.propagation_delay < 0:
            raise TopologyError(f"link {self.a}-{self.b}: propagation delay must be >= 0")

    @property
    def key(self) -> tuple[NodeId, NodeId]:
        return link_key(self.a, self.b)

    def other(self, node: NodeId) -> NodeId:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Topology:
    """Immutable undirected graph. ``remove_node`` returns a new value."""

    nodes: frozenset[NodeId]
    links: Mapping[tuple[NodeId, NodeId], LinkSpec]
    _adj: Mapping[NodeId, frozenset[NodeId]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[NodeId, set[NodeId]] = {n: set() for n in self.nodes}
        for key, link in self.links.items():
            if key != link.key:
                raise TopologyError(f"link stored under wrong key {key}")
            for end in key:
                if end not in self.nodes:
                    raise TopologyError(f"link {link.a}-{link.b} references unknown node {end}")
            if link.up:
                adj[link.a].add(link.b)
                adj[link.b].add(link.a)
        object.__setattr__(self, "_adj", {n: frozenset(s) for n, s in adj.items()})

    @classmethod
    def build(cls, nodes: Iterable[NodeId], links: Iterable[LinkSpec]) -> "Topology":
        table: dict[tuple[NodeId, NodeId], LinkSpec] = {}
        for link in links:
            if link.key in table:
                raise TopologyError(f"duplicate link {link.a}-{link.b}")
            table[link.key] = link
        return cls(frozenset(nodes), table)

    def _check(self, node: NodeId) -> None:
        if node not in self.nodes:
            raise TopologyError(f"unknown node {node}")

    def neighbors(self, node: NodeId) -> frozenset[NodeId]:
        self._check(node)
        return self._adj[node]

    def link(self, a: NodeId, b: NodeId) -> LinkSpec | None:
        return self.links.get(link_key(a, b))

    def remove_node(self, node: NodeId) -> "Topology":
        self._check(node)
        links = {k: v for k, v in self.links.items() if node not in k}
        return Topology(self.nodes - {node}, links)

    def is_connected(self, src: NodeId, dst: NodeId) -> bool:
        self._check(src)
        self._check(dst)
        if src == dst:
            return True
        seen = {src}
        frontier = [src]
        while frontier:
            u = frontier.pop()
            for v in self._adj[u]:
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return False

    def dijkstra_path(
        self,
        src: NodeId,
        dst: NodeId,
        weight: Callable[[LinkSpec], float] | None = None,
    ) -> tuple[list[NodeId], float]:
        self._check(src)
        self._check(dst)
        weight = weight or propagation_weight
        dist = {src: 0.0}
        prev: dict[NodeId, NodeId] = {}
        heap = [(0.0, src)]
        done: set[NodeId] = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            if u == dst:
                break
            done.add(u)
            for v in sorted(self._adj[u]):
                w = weight(self.links[link_key(u, v)])
                if w < 0:
                    raise TopologyError(f"negative weight on link {u}-{v}")
                nd = d + w
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        if dst not in dist:
            raise NoPathError(f"no path from {src} to {dst}")
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        path.reverse()
        return path, dist[dst]


def propagation_weight(link: LinkSpec) -> float:
    return link.propagation_delay


def transmission_weight(packet_bits: float) -> Callable[[LinkSpec], float]:
    """Per-link cost of sending one packet over an idle link."""

    def weight(link: LinkSpec) -> float:
        return packet_bits / link.bandwidth + link.propagation_delay

    return weight


# Functional aliases mirroring the method API.
def neighbors(topo: Topology, node: NodeId) -> frozenset[NodeId]:
    return topo.neighbors(node)


def remove_node(topo: Topology, node: NodeId) -> Topology:
    return topo.remove_node(node)


def is_connected(topo: Topology, src: NodeId, dst: NodeId) -> bool:
    return topo.is_connected(src, dst)


def dijkstra_path(topo, src, dst, weight=None):
    return topo.dijkstra_path(src, dst, weight)


@dataclass(frozen=True)
class FailureSchedule:
    """Cumulative timed node removals, sorted by time."""

    events: tuple[tuple[float, NodeId], ...] = ()

    def __post_init__(self):
        seen: set[NodeId] = set()
        last = float("-inf")
        for t, node in self.events:
            if t < last:
                raise TopologyError("failure times must be non-decreasing")
            if t < 0:
                raise TopologyError(f"negative removal time {t}")
            if node in seen:
                raise TopologyError(f"node {node} scheduled for removal twice")
            seen.add(node)
            last = t

    @property
    def nodes(self) -> list[NodeId]:
        return [n for _, n in self.events]

    @property
    def last_time(self) -> float | None:
        return self.events[-1][0] if self.events else None

    def validate_against(self, topo: Topology) -> None:
        for _, node in self.events:
            if node not in topo.nodes:
                raise TopologyError(f"failure schedule names unknown node {node}")

    def removed_by(self, t: float) -> frozenset[NodeId]:
        return frozenset(n for when, n in self.events if when <= t)

    def apply(self, topo: Topology, until: float = float("inf")) -> Topology:
        for when, node in self.events:
            if when <= until:
                topo = topo.remove_node(node)
        return topo


def _parse_int(token: str, what: str, line: int, source: str | None) -> int:
    try:
        value = int(token)
    except ValueError:
        raise TopologyError(f"bad {what} {token!r}", line, source) from None
    if value < 0:
        raise TopologyError(f"{what} must be non-negative, got {value}", line, source)
    return value


def _parse_float(token: str, what: str, line: int, source: str | None) -> float:
    try:
        return float(token)
    except ValueError:
        raise TopologyError(f"bad {what} {token!r}", line, source) from None


def parse_topology(text: str, source: str | None = None) -> Topology:
    """Parse the line-oriented topology format.

    Grammar (one directive per line, ``#`` starts a comment)::

        node <id>
        link <id-a> <id-b> <bandwidth-bps> <prop-delay-s> [down]

    All ``node`` lines must precede the first ``link`` line.
    """
    nodes: set[NodeId] = set()
    links: dict[tuple[NodeId, NodeId], LinkSpec] = {}
    in_links = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "node":
            if in_links:
                raise TopologyError("node line after first link line", lineno, source)
            if len(tokens) != 2:
                raise TopologyError("expected 'node <id>'", lineno, source)
            nid = _parse_int(tokens[1], "node id", lineno, source)
            if nid in nodes:
                raise TopologyError(f"duplicate node {nid}", lineno, source)
            nodes.add(nid)
        elif kind == "link":
            in_links = True
            if len(tokens) not in (5, 6) or (len(tokens) == 6 and tokens[5] != "down"):
                raise TopologyError(
                    "expected 'link <a> <b> <bandwidth-bps> <prop-delay-s> [down]'", lineno, source
                )
            a = _parse_int(tokens[1], "node id", lineno, source)
            b = _parse_int(tokens[2], "node id", lineno, source)
            bw = _parse_float(tokens[3], "bandwidth", lineno, source)
            delay = _parse_float(tokens[4], "propagation delay", lineno, source)
            for end in (a, b):
                if end not in nodes:
                    raise TopologyError(f"dangling endpoint: node {end} not declared", lineno, source)
            if a == b:
                raise TopologyError(f"self-loop on node {a}", lineno, source)
            if not bw > 0:
                raise TopologyError(f"non-positive bandwidth {tokens[3]}", lineno, source)
            if not delay >= 0:
                raise TopologyError(f"negative propagation delay {tokens[4]}", lineno, source)
            key = link_key(a, b)
            if key in links:
                raise TopologyError(f"duplicate link {a}-{b}", lineno, source)
            links[key] = LinkSpec(a, b, bw, delay, up=len(tokens) == 5)
        else:
            raise TopologyError(f"unknown directive {kind!r}", lineno, source)
    return Topology(frozenset(nodes), links)


def load_topology(source: str | Path) -> Topology:
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read topology file {path}: {exc.strerror}") from exc
    return parse_topology(text, str(path))


def default_topology_path() -> Path:
    return Path(__file__).parent / "data" / "default.topo"
