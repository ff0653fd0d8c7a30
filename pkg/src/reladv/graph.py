"""Materialized relational graphs and their component structure."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DomainTooLarge, HueUnsupported, NodeNotInDomain, ReladvError
from .relation import RelationSpec, as_vector, atomic_moves, to_bits

DEFAULT_MAX_NODES = 1 << 20


class ExplicitGraph:
    """Directed graph over a finite, lexicographically sorted node set.

    Adjacency is stored in CSR form with each successor list sorted, so
    node index order and lexicographic key order coincide everywhere.
    """

    def __init__(self, nodes: Iterable[Hashable], edges: Iterable[tuple] = ()):
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes):
            raise ReladvError("graph domain contains duplicate nodes")
        self.nodes: tuple = tuple(sorted(nodes))
        self.index: dict = {v: i for i, v in enumerate(self.nodes)}
        n = len(self.nodes)
        pairs = set()
        for a, b in edges:
            try:
                pairs.add((self.index[a], self.index[b]))
            except KeyError as exc:
                raise NodeNotInDomain(f"edge endpoint {exc.args[0]!r} is not in the domain") from None
        src = np.fromiter((p[0] for p in sorted(pairs)), np.int64, len(pairs))
        dst = np.fromiter((p[1] for p in sorted(pairs)), np.int64, len(pairs))
        self.indptr = np.zeros(n + 1, np.int64)
        np.add.at(self.indptr, src + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.indices = dst

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, key) -> bool:
        return self._key(key) in self.index

    def __repr__(self) -> str:
        return f"ExplicitGraph(nodes={len(self)}, edges={self.num_edges})"

    @property
    def num_edges(self) -> int:
        return int(self.indices.size)

    def _key(self, x):
        if isinstance(x, np.ndarray):
            return to_bits(x)
        return x

    def node_id(self, x) -> int:
        try:
            return self.index[self._key(x)]
        except (KeyError, TypeError):
            raise NodeNotInDomain(f"{x!r} is not a node of this graph") from None

    def edges(self) -> list[tuple]:
        out = []
        for v in range(len(self)):
            for w in self.indices[self.indptr[v]:self.indptr[v + 1]]:
                out.append((self.nodes[v], self.nodes[w]))
        return out

    def successors(self, x) -> list:
        v = self.node_id(x)
        return [self.nodes[w] for w in self.indices[self.indptr[v]:self.indptr[v + 1]]]

    def with_edges(self, extra: Iterable[tuple]) -> "ExplicitGraph":
        return ExplicitGraph(self.nodes, self.edges() + list(extra))

    def reversed(self) -> "ExplicitGraph":
        return ExplicitGraph(self.nodes, [(b, a) for a, b in self.edges()])

    @cached_property
    def weak_labels(self) -> np.ndarray:
        return kernels.weak_labels(self.indptr, self.indices)

    @cached_property
    def strong_labels(self) -> np.ndarray:
        return kernels.strong_labels(self.indptr, self.indices)

    def reach_ids(self, v: int) -> np.ndarray:
        return np.flatnonzero(kernels.reach_mask(self.indptr, self.indices, v))


def build_graph(spec: RelationSpec, domain: Sequence, max_nodes: int = DEFAULT_MAX_NODES) -> ExplicitGraph:
    """Materialize the atomic-move edges of ``spec`` restricted to ``domain``.

    Domains of bit vectors (arrays or bit strings) support every relation
    kind. A spec made only of explicit edges may use arbitrary sortable
    labels as its domain.
    """
    if spec.hue_shift:
        raise HueUnsupported("hue shift cannot be materialized as an explicit graph")
    if len(domain) > max_nodes:
        raise DomainTooLarge(f"{len(domain)} nodes exceeds the cap of {max_nodes}")
    keys = [to_bits(x) if isinstance(x, np.ndarray) else x for x in domain]
    keyset = set(keys)
    for a, b in spec.explicit_edges:
        for end in (a, b):
            if end not in keyset:
                raise NodeNotInDomain(f"explicit-edge endpoint {end!r} is not in the domain")
    if not (spec.additive or spec.equivalence_groups):
        return ExplicitGraph(keys, spec.explicit_edges)
    edges = []
    for k in keys:
        for z in atomic_moves(spec, as_vector(k)):
            zk = to_bits(z)
            if zk in keyset:
                edges.append((k, zk))
    return ExplicitGraph(keys, edges)


def closure(graph: ExplicitGraph, x) -> set:
    """Every node reachable from ``x`` (including ``x`` itself)."""
    v = graph.node_id(x)
    return {graph.nodes[i] for i in graph.reach_ids(v)}


@dataclass(frozen=True)
class WccIndex:
    labels: np.ndarray
    members: tuple
    strongly_connected: tuple

    def component_of(self, graph: ExplicitGraph, x) -> int:
        return int(self.labels[graph.node_id(x)])

    def __len__(self) -> int:
        return len(self.members)


def wcc(graph: ExplicitGraph) -> WccIndex:
    """Weakly connected components, numbered by their smallest member."""
    labels = graph.weak_labels
    strong = graph.strong_labels
    k = int(labels.max()) + 1 if labels.size else 0
    members: list[list] = [[] for _ in range(k)]
    for v, c in enumerate(labels):
        members[c].append(graph.nodes[v])
    # a weak component is strong iff all its nodes share one strong label
    first_strong = np.full(k, -1, np.int64)
    flag = [True] * k
    for v, c in enumerate(labels):
        if first_strong[c] == -1:
            first_strong[c] = strong[v]
        elif strong[v] != first_strong[c]:
            flag[c] = False
    return WccIndex(labels=labels, members=tuple(tuple(m) for m in members), strongly_connected=tuple(flag))


def is_reversible(graph: ExplicitGraph) -> bool:
    """True iff every weak component is strongly connected."""
    # both labelings are canonical, and strong components refine weak ones
    return bool(np.array_equal(graph.weak_labels, graph.strong_labels))
