import os
import random

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reladv.graph import ExplicitGraph

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def node_names(n):
    return [f"n{i:02d}" for i in range(n)]


def random_graph(rng: random.Random, n: int, p: float) -> ExplicitGraph:
    names = node_names(n)
    edges = [(a, b) for a in names for b in names if a != b and rng.random() < p]
    return ExplicitGraph(names, edges)


def random_reversible_graph(rng: random.Random, n: int, p: float, names=None) -> ExplicitGraph:
    """Symmetric edges plus a few directed cycles; every weak component is strong."""
    names = names or node_names(n)
    edges = set()
    for a in names:
        for b in names:
            if a < b and rng.random() < p:
                edges |= {(a, b), (b, a)}
    for _ in range(rng.randrange(3)):
        cyc = rng.sample(names, min(len(names), rng.randrange(2, 5)))
        edges |= set(zip(cyc, cyc[1:] + cyc[:1]))
    return ExplicitGraph(names, edges)


def bfs_reach(graph: ExplicitGraph, start) -> set:
    """Independent closure oracle working on edge lists only."""
    adj = {}
    for a, b in graph.edges():
        adj.setdefault(a, []).append(b)
    seen, todo = {start}, [start]
    while todo:
        v = todo.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
