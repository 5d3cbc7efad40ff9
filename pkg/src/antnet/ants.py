"""Forward/backward ant lifecycle: trip-time stacks, loop removal, reverse-path updates."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple

from .routing import (
    AntNetParams,
    PheromoneTable,
    RoutingError,
    TrafficModel,
    compute_reinforcement,
    select_next_hop,
    update_pheromone,
)

NodeId = int


class AntError(RuntimeError):
    pass


class StackEntry(NamedTuple):
    node: NodeId
    elapsed: float


@dataclass
class ForwardAnt:
    ant_id: int
    source: NodeId
    destination: NodeId
    launch_time: float
    stack: list[StackEntry] = field(default_factory=list)
    visited: set[NodeId] = field(default_factory=set)
    hops: int = 0

    @property
    def current(self) -> NodeId:
        return self.stack[-1].node

    @property
    def elapsed(self) -> float:
        return self.stack[-1].elapsed

    @property
    def arrived(self) -> bool:
        return self.current == self.destination

    def path(self) -> list[NodeId]:
        return [e.node for e in self.stack]

    def on_stack(self, node: NodeId) -> bool:
        return any(e.node == node for e in self.stack)


@dataclass
class BackwardAnt:
    ant_id: int
    stack: tuple[StackEntry, ...]
    cursor: int
    updates: int = 0

    @property
    def source(self) -> NodeId:
        return self.stack[0].node

    @property
    def destination(self) -> NodeId:
        return self.stack[-1].node

    @property
    def at(self) -> NodeId:
        return self.stack[self.cursor].node

    def advance(self) -> NodeId | None:
        """Step the cursor toward the source; return the new node, or None at the source."""
        if self.cursor == 0:
            return None
        self.cursor -= 1
        return self.stack[self.cursor].node


def spawn_forward(ant_id: int, source: NodeId, live_destinations, launch_time: float, rng: random.Random) -> ForwardAnt:
    choices = sorted(d for d in live_destinations if d != source)
    if not choices:
        raise AntError(f"node {source} has no live destinations")
    dest = choices[int(rng.random() * len(choices))]
    return ForwardAnt(ant_id, source, dest, launch_time, [StackEntry(source, 0.0)], {source})


def record_visit(ant: ForwardAnt, node: NodeId, elapsed: float) -> ForwardAnt:
    if ant.stack and elapsed < ant.stack[-1].elapsed:
        raise AntError(f"ant {ant.ant_id}: elapsed time went backwards ({elapsed} < {ant.stack[-1].elapsed})")
    ant.stack.append(StackEntry(node, elapsed))
    ant.visited.add(node)
    return ant


def remove_loop(ant: ForwardAnt, revisited: NodeId) -> ForwardAnt:
    """Pop every entry above the earlier occurrence of ``revisited``; that entry keeps its time.

    Popped nodes stay in ``visited``: forgetting them sends the ant straight
    back into the same dead end, which it can then only leave by dying.
    """
    for i, entry in enumerate(ant.stack):
        if entry.node == revisited:
            break
    else:
        raise AntError(f"ant {ant.ant_id}: node {revisited} is not on the stack")
    del ant.stack[i + 1:]
    return ant


def to_backward(ant: ForwardAnt) -> BackwardAnt:
    if not ant.stack or ant.current != ant.destination:
        raise AntError(f"ant {ant.ant_id} has not reached its destination {ant.destination}")
    return BackwardAnt(ant.ant_id, tuple(ant.stack), len(ant.stack) - 1)


def backward_update_at(
    ant: BackwardAnt,
    node: NodeId,
    table: PheromoneTable,
    model: TrafficModel,
    params: AntNetParams,
) -> NodeId | None:
    """Apply the updates owed at ``node`` and move the cursor one step toward the source.

    Mutates ``table`` and ``model`` in place. Returns the next reverse hop, or
    None once the source has been updated.
    """
    if ant.cursor >= len(ant.stack) - 1 or ant.stack[ant.cursor].node != node:
        raise AntError(f"ant {ant.ant_id}: expected at {ant.at}, got {node}")
    here = ant.stack[ant.cursor]
    came_from = ant.stack[ant.cursor + 1].node
    targets = ant.stack[ant.cursor + 1:] if params.subpath else ant.stack[-1:]
    for target in targets:
        row = table.rows.get(target.node)
        if row is None:
            raise RoutingError(f"node {node} has no pheromone row for destination {target.node}")
        trip = target.elapsed - here.elapsed
        stats = model.observe(target.node, trip, params)
        r = compute_reinforcement(trip, stats, params, len(row))
        table.rows[target.node] = update_pheromone(row, came_from, r)
        ant.updates += 1
    return ant.advance()


def forward_walk(ant: ForwardAnt, tables, hop_time, rng: random.Random, hop_budget: int, explore: float = 0.0) -> bool:
    """Drive a forward ant to its destination outside the event loop.

    ``hop_time(u, v)`` supplies the trip-time increment of each hop. Returns
    False if the ant dies (dead end or hop budget exhausted).
    """
    while not ant.arrived:
        if ant.hops >= hop_budget:
            return False
        row = tables[ant.current].rows.get(ant.destination)
        if not row:
            return False
        here = ant.current
        nxt = select_next_hop(row, ant.visited, rng, explore)
        ant.hops += 1
        if ant.on_stack(nxt):
            remove_loop(ant, nxt)
        else:
            record_visit(ant, nxt, ant.elapsed + hop_time(here, nxt))
    return True


def backward_walk(ant: BackwardAnt, tables, models, params: AntNetParams) -> list[NodeId]:
    """Run a backward ant home; returns the nodes it visited, destination first."""
    visited = [ant.at]
    node = ant.advance()
    while node is not None:
        visited.append(node)
        node = backward_update_at(ant, node, tables[node], models[node], params)
    return visited
