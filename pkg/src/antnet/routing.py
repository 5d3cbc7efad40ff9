"""Per-node AntNet state: pheromone tables, traffic statistics and their update rules.

Rows are plain ``dict[neighbor, probability]`` values; the update functions
return new rows instead of mutating their input.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

NodeId = int
PheromoneRow = dict  # neighbor -> probability

_NORM_TOL = 1e-9


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class AntNetParams:
    eta: float = 0.1
    window: int = 50
    c1: float = 0.7
    c2: float = 0.3
    z: float = 2.0
    r_min: float = 0.05
    r_max: float = 0.5
    mode: str = "simple"
    subpath: bool = False
    launch_interval: float = 0.5
    explore: float = 0.2

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise RoutingError(f"eta must be in (0, 1], got {self.eta}")
        if self.window < 1:
            raise RoutingError(f"window must be a positive integer, got {self.window}")
        if self.c1 < 0 or self.c2 < 0 or self.c1 + self.c2 > 1 + 1e-12:
            raise RoutingError("c1, c2 must be >= 0 with c1 + c2 <= 1")
        if not 0 < self.r_min <= self.r_max <= 1:
            raise RoutingError("need 0 < r_min <= r_max <= 1")
        if self.mode not in ("simple", "full"):
            raise RoutingError(f"mode must be 'simple' or 'full', got {self.mode!r}")
        if self.z < 0:
            raise RoutingError("z must be >= 0")
        if not self.launch_interval > 0:
            raise RoutingError("launch_interval must be > 0")
        if not 0 <= self.explore < 1:
            raise RoutingError("explore must be in [0, 1)")


# -- pheromone rows ---------------------------------------------------------


@dataclass
class PheromoneTable:
    owner: NodeId
    rows: dict[NodeId, PheromoneRow] = field(default_factory=dict)

    def row(self, destination: NodeId) -> PheromoneRow | None:
        return self.rows.get(destination)

    def drop_node(self, node: NodeId) -> None:
        """Forget a removed node both as destination and as next hop."""
        self.rows.pop(node, None)
        for dest in list(self.rows):
            row = self.rows[dest]
            if node in row:
                shrunk = remove_neighbor(row, node)
                if shrunk:
                    self.rows[dest] = shrunk
                else:
                    del self.rows[dest]


def init_uniform(owner: NodeId, neighbors: Iterable[NodeId], destinations: Iterable[NodeId]) -> PheromoneTable:
    neighbors = sorted(neighbors)
    if not neighbors:
        raise RoutingError(f"node {owner} has no neighbors")
    destinations = set(destinations)
    if owner in destinations:
        raise RoutingError("a node holds no row for itself")
    p = 1.0 / len(neighbors)
    return PheromoneTable(owner, {d: {n: p for n in neighbors} for d in sorted(destinations)})


def select_next_hop(row: Mapping[NodeId, float], visited, rng: random.Random, explore: float = 0.0) -> NodeId:
    """Sample a next hop: pheromone-proportional over unvisited neighbors,
    uniform over all neighbors if every neighbor was already visited.

    With ``explore`` > 0 that share of picks ignores the pheromone and is
    uniform over the unvisited neighbors.
    """
    if not row:
        raise RoutingError("empty pheromone row (dead-end node)")
    keys = sorted(row)
    fresh = [k for k in keys if k not in visited]
    if not fresh:
        return keys[int(rng.random() * len(keys))]
    if explore > 0 and rng.random() < explore:
        return fresh[int(rng.random() * len(fresh))]
    total = math.fsum(row[k] for k in fresh)
    if total <= 0:
        # all unvisited entries carry zero mass; fall back to uniform among them
        return fresh[int(rng.random() * len(fresh))]
    u = rng.random() * total
    acc = 0.0
    for k in fresh:
        acc += row[k]
        if u < acc:
            return k
    # float round-off at the top end: pick the last nonzero entry
    return next(k for k in reversed(fresh) if row[k] > 0)


def update_pheromone(row: Mapping[NodeId, float], reinforced: NodeId, r: float) -> PheromoneRow:
    if reinforced not in row:
        raise RoutingError(f"{reinforced} is not a neighbor in this row")
    if not 0.0 <= r <= 1.0:
        raise RoutingError(f"reinforcement {r} outside [0, 1]")
    out = {}
    for k, p in row.items():
        if k == reinforced:
            out[k] = p + r * (1.0 - p)
        else:
            out[k] = p - r * p
    return out


def remove_neighbor(row: Mapping[NodeId, float], node: NodeId) -> PheromoneRow:
    """Drop ``node`` and rescale the rest to sum to 1 (uniform if they held no mass)."""
    rest = {k: p for k, p in row.items() if k != node}
    if not rest:
        return {}
    total = math.fsum(rest.values())
    if total <= 0:
        return {k: 1.0 / len(rest) for k in rest}
    return {k: p / total for k, p in rest.items()}


def row_is_normalized(row: Mapping[NodeId, float], tol: float = _NORM_TOL) -> bool:
    return abs(math.fsum(row.values()) - 1.0) <= tol and all(0.0 <= p <= 1.0 for p in row.values())


# -- traffic statistics -----------------------------------------------------


@dataclass(frozen=True)
class TrafficStats:
    mean: float = 0.0
    variance: float = 0.0
    best_time: float = math.inf
    window: tuple[float, ...] = ()
    observation_count: int = 0


def update_traffic_stats(stats: TrafficStats, observed: float, params: AntNetParams) -> TrafficStats:
    if not observed > 0:
        raise RoutingError(f"trip time must be positive, got {observed}")
    if stats.observation_count == 0:
        # first sample seeds the estimators
        mean, variance = observed, 0.0
    else:
        eta = params.eta
        delta = observed - stats.mean
        mean = stats.mean + eta * delta
        variance = stats.variance + eta * (delta * delta - stats.variance)
    window = (stats.window + (observed,))[-params.window:]
    return TrafficStats(
        mean=mean,
        variance=variance,
        best_time=min(window),
        window=window,
        observation_count=stats.observation_count + 1,
    )


@dataclass
class TrafficModel:
    owner: NodeId
    stats: dict[NodeId, TrafficStats] = field(default_factory=dict)

    @classmethod
    def for_destinations(cls, owner: NodeId, destinations: Iterable[NodeId]) -> "TrafficModel":
        return cls(owner, {d: TrafficStats() for d in sorted(destinations) if d != owner})

    def observe(self, destination: NodeId, trip_time: float, params: AntNetParams) -> TrafficStats:
        new = update_traffic_stats(self.stats.get(destination, TrafficStats()), trip_time, params)
        self.stats[destination] = new
        return new


def compute_reinforcement(trip_time: float, stats: TrafficStats, params: AntNetParams, out_degree: int = 1) -> float:
    """Map a trip time to a reinforcement in ``[r_min, r_max]``.

    ``out_degree`` is accepted for interface compatibility; neither mode uses it.
    """
    if not trip_time > 0:
        raise RoutingError(f"trip time must be positive, got {trip_time}")
    if out_degree < 1:
        raise RoutingError("out_degree must be positive")
    if stats.observation_count == 0 or not stats.window:
        return params.r_min
    best = stats.best_time
    ratio = best / trip_time
    if params.mode == "simple":
        r = ratio
    else:
        r = params.c1 * ratio
        i_inf = best
        i_sup = stats.mean + params.z * math.sqrt(max(stats.variance, 0.0) / params.window)
        spread = i_sup - i_inf
        denom = spread + (trip_time - i_inf)
        # a non-positive spread would make the term grow with T, so it is dropped too
        if spread > 0 and denom > 0:
            r += params.c2 * spread / denom
    return min(max(r, params.r_min), params.r_max)
