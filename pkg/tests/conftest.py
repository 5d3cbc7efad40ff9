from __future__ import annotations

import itertools
import random

import pytest

from antnet.topology import LinkSpec, Topology


def line(*ids, bandwidth=1e6, delay=0.001) -> Topology:
    links = [LinkSpec(a, b, bandwidth, delay) for a, b in zip(ids, ids[1:])]
    return Topology.build(ids, links)


def random_graph(rng: random.Random, n: int, p: float = 0.4) -> Topology:
    links = []
    for a, b in itertools.combinations(range(n), 2):
        if rng.random() < p:
            links.append(LinkSpec(a, b, rng.choice([1e6, 2e6]), rng.uniform(0.0, 0.01)))
    return Topology.build(range(n), links)


@pytest.fixture
def rng():
    return random.Random(1234)
