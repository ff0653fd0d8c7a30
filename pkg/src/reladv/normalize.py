"""Deterministic normal forms that are constant on each weak component."""
from __future__ import annotations

import numpy as np

from .errors import NotReversible
from .graph import ExplicitGraph, build_graph, is_reversible
from .relation import RelationSpec, as_vector, to_bits, vectors_to_matrix


def _condensation_sink_order(graph: ExplicitGraph) -> np.ndarray:
    """Normal-form node id for every node of ``graph``.

    Strong components are condensed to their smallest member. Within each
    weak component the condensed DAG is walked depth-first (roots and
    children in increasing order); the first condensed node to finish is
    last in the resulting topological order and becomes the normal form.
    """
    strong = graph.strong_labels
    weak = graph.weak_labels
    n = len(graph)
    k = int(strong.max()) + 1 if n else 0
    rep = np.full(k, -1, np.int64)
    for v in range(n):
        if rep[strong[v]] == -1:
            rep[strong[v]] = v
    succ: list[set] = [set() for _ in range(k)]
    for v in range(n):
        cv = strong[v]
        for w in graph.indices[graph.indptr[v]:graph.indptr[v + 1]]:
            if strong[w] != cv:
                succ[cv].add(int(strong[w]))
    children = [sorted(s) for s in succ]

    by_weak: dict[int, list[int]] = {}
    for c in range(k):
        by_weak.setdefault(int(weak[rep[c]]), []).append(c)

    target = np.empty(n, np.int64)
    sink_of_weak = {}
    for w, comps in by_weak.items():
        visited = set()
        finished: list[int] = []
        for root in comps:
            if root in visited:
                continue
            visited.add(root)
            stack = [(root, iter(children[root]))]
            while stack:
                node, it = stack[-1]
                for ch in it:
                    if ch not in visited:
                        visited.add(ch)
                        stack.append((ch, iter(children[ch])))
                        break
                else:
                    stack.pop()
                    finished.append(node)
        # reverse finishing order is a topological order; its last entry
        # finished first
        sink_of_weak[w] = rep[finished[0]]
    for v in range(n):
        target[v] = sink_of_weak[int(weak[v])]
    return target


class GraphNormalizer:
    """Generic normalizer over an explicit relational graph, precomputed per component."""

    def __init__(self, graph: ExplicitGraph, relation: RelationSpec | None = None):
        self.graph = graph
        self.relation = relation if relation is not None else RelationSpec()
        self._target = _condensation_sink_order(graph)

    def normal_id(self, x) -> int:
        return int(self._target[self.graph.node_id(x)])

    def __call__(self, x):
        key = self.graph.nodes[self.normal_id(x)]
        return as_vector(key) if isinstance(x, np.ndarray) else key

    def batch(self, X: np.ndarray) -> np.ndarray:
        return vectors_to_matrix([self.graph.nodes[self.normal_id(row)] for row in X])

    def pullback(self, X, G):
        return G


def generic_normalize(graph: ExplicitGraph, x):
    norm = graph.__dict__.get("_generic_normalizer")
    if norm is None:
        norm = graph.__dict__["_generic_normalizer"] = GraphNormalizer(graph)
    return norm(x)


class EquivalenceNormalizer:
    """Closed-form canonical form for equivalence groups.

    A group whose OR is 1 keeps only its lowest-indexed coordinate set.
    """

    def __init__(self, groups):
        self.relation = RelationSpec(equivalence_groups=tuple(tuple(g) for g in groups))
        self.groups = [np.asarray(g, dtype=np.int64) for g in self.relation.equivalence_groups]

    def batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.uint8)
        out = X.copy()
        for g in self.groups:
            any_on = X[:, g].max(axis=1) if X.shape[0] else np.zeros(0, np.uint8)
            out[:, g] = 0
            out[:, g[0]] = any_on
        return out

    def __call__(self, x):
        v = as_vector(x)
        z = self.batch(v[None, :])[0]
        return to_bits(z) if isinstance(x, str) else z

    def pullback(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        """Map a gradient taken at the normal form back onto raw coordinates.

        Setting any bit of an all-zero group switches its canonical bit on,
        so every member inherits the canonical gradient; once a group is on,
        single-bit edits leave the normal form unchanged and get gradient 0.
        """
        X = np.asarray(X)
        out = np.array(G, dtype=np.float64, copy=True)
        for g in self.groups:
            off = X[:, g].max(axis=1) == 0
            out[:, g] = np.where(off[:, None], G[:, g[0]][:, None], 0.0)
        return out


def equivalence_normalize(groups, x):
    return EquivalenceNormalizer(groups)(x)


class StrongestAdvNormalizer:
    """Normal form = the highest-loss member of the closure.

    The loss label is the model's own prediction at the closure's
    lexicographic minimum; loss ties go to the lexicographically smallest
    maximizer. Requires a reversible relation so that closures are exactly
    the (strongly connected) components.
    """

    def __init__(self, model, spec: RelationSpec, graph: ExplicitGraph | None = None, domain=None):
        if graph is None:
            graph = build_graph(spec, domain)
        if not is_reversible(graph):
            raise NotReversible("strongest-adversarial normalization needs a reversible relation")
        self.model = model
        self.relation = spec
        self.graph = graph
        labels = graph.weak_labels
        self._target = np.empty(len(graph), np.int64)
        for c in range(int(labels.max()) + 1 if len(graph) else 0):
            ids = np.flatnonzero(labels == c)
            Z = vectors_to_matrix([graph.nodes[i] for i in ids])
            y_star = int(model.predict(Z[:1])[0])
            losses = model.loss(Z, np.full(len(ids), y_star))
            self._target[ids] = ids[int(np.argmax(losses))]

    def __call__(self, x):
        key = self.graph.nodes[self._target[self.graph.node_id(x)]]
        return as_vector(key) if isinstance(x, np.ndarray) else key

    def batch(self, X: np.ndarray) -> np.ndarray:
        return vectors_to_matrix([self.graph.nodes[self._target[self.graph.node_id(r)]] for r in X])

    def pullback(self, X, G):
        return G


def strongest_adv_normalize(f, spec: RelationSpec, graph: ExplicitGraph, x):
    return StrongestAdvNormalizer(f, spec, graph)(x)
