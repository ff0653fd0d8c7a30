"""Exact, brute-force evaluation of robustness quantities on finite domains.

Masses may be floats or :class:`fractions.Fraction`; with fractions every
quantity below is computed exactly. Float sums use ``math.fsum``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DomainTooLarge,
    EdgeEndpointsMissing,
    NotReversible,
    ReladvError,
    TableIncomplete,
)
from .graph import ExplicitGraph, is_reversible
from .relation import as_vector

BRUTE_FORCE_MAX_NODES = 16
NORM_TOL = 1e-12


def _total(values):
    values = list(values)
    if any(isinstance(v, Fraction) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(values)


def _close(a, b, tol=NORM_TOL):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(a - b) <= tol


class FiniteDistribution:
    """Input masses ``mu`` and label conditionals ``eta`` over enumerated inputs."""

    def __init__(self, mu: dict, eta: dict, labels=(0, 1)):
        self.labels = tuple(labels)
        self.mu = dict(mu)
        self.eta = {x: {l: p for l, p in dict(e).items()} for x, e in eta.items()}
        if set(self.mu) != set(self.eta):
            raise ReladvError("mu and eta must cover the same inputs")
        if any(m < 0 for m in self.mu.values()) or not _close(_total(self.mu.values()), 1):
            raise ReladvError("input masses must be non-negative and sum to 1")
        for x, e in self.eta.items():
            if set(e) - set(self.labels):
                raise ReladvError(f"eta({x!r}) uses labels outside {self.labels}")
            if any(p < 0 for p in e.values()) or not _close(_total(e.values()), 1):
                raise ReladvError(f"eta({x!r}) must be a probability vector")

    @classmethod
    def deterministic(cls, mu: dict, label_of: dict, labels=(0, 1)):
        one = {x: (Fraction(1) if isinstance(m, Fraction) else 1.0) for x, m in mu.items()}
        return cls(mu, {x: {label_of[x]: one[x]} for x in mu}, labels)

    def joint(self, x, l):
        """Mass of the pair (x, l): mu(x) * eta(x, l); zero for unlisted inputs."""
        if x not in self.mu:
            return 0
        return self.mu[x] * self.eta[x].get(l, 0)

    def to_json(self) -> str:
        return json.dumps([
            {"x": x, "mu": float(self.mu[x]), "eta": {str(l): float(p) for l, p in self.eta[x].items()}}
            for x in sorted(self.mu)
        ], indent=1)

    @classmethod
    def from_json(cls, text: str, labels=None):
        rows = json.loads(text)
        mu = {r["x"]: r["mu"] for r in rows}
        eta = {r["x"]: {int(l): p for l, p in r["eta"].items()} for r in rows}
        if labels is None:
            labels = tuple(sorted({l for e in eta.values() for l in e} | {0, 1}))
        return cls(mu, eta, labels)

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def empirical_distribution(keys, labels, label_set=(0, 1)) -> FiniteDistribution:
    """Plug-in estimate of mu and eta from a sample, with exact fractions."""
    counts: dict = {}
    for k, l in zip(keys, labels):
        counts.setdefault(k, {}).setdefault(int(l), 0)
        counts[k][int(l)] += 1
    n = len(labels)
    mu = {k: Fraction(sum(c.values()), n) for k, c in counts.items()}
    eta = {k: {l: Fraction(v, sum(c.values())) for l, v in c.items()} for k, c in counts.items()}
    return FiniteDistribution(mu, eta, label_set)


def label_array(f, graph: ExplicitGraph) -> np.ndarray:
    """Labels of every graph node under ``f``.

    ``f`` may be a mapping from node key to label, a sequence aligned with
    ``graph.nodes``, a classifier with a batch ``predict`` over bit vectors,
    or any callable on node keys.
    """
    if isinstance(f, dict):
        return np.array([f[v] for v in graph.nodes], dtype=np.int64)
    if hasattr(f, "predict"):
        X = np.stack([as_vector(v) for v in graph.nodes])
        return np.asarray(f.predict(X), dtype=np.int64).reshape(-1)
    if callable(f):
        return np.array([f(v) for v in graph.nodes], dtype=np.int64)
    arr = np.asarray(f, dtype=np.int64)
    if arr.shape != (len(graph),):
        raise ReladvError("labeling must give one label per node")
    return arr


def robust_mask(f, graph: ExplicitGraph) -> np.ndarray:
    """Truth value of the robustness predicate at every node.

    A node is non-robust iff it reaches a node with an outgoing edge whose
    endpoints disagree, so one reverse search from those nodes decides all.
    """
    lab = label_array(f, graph)
    n = len(graph)
    src = np.repeat(np.arange(n), np.diff(graph.indptr))
    bad = np.unique(src[lab[src] != lab[graph.indices]])
    rev: list[list[int]] = [[] for _ in range(n)]
    for a, b in zip(src, graph.indices):
        rev[b].append(a)
    broken = np.zeros(n, bool)
    broken[bad] = True
    queue = deque(int(v) for v in bad)
    while queue:
        v = queue.popleft()
        for u in rev[v]:
            if not broken[u]:
                broken[u] = True
                queue.append(u)
    return ~broken


def is_robust(f, graph: ExplicitGraph, x) -> bool:
    lab = label_array(f, graph)
    v = graph.node_id(x)
    return bool((lab[graph.reach_ids(v)] == lab[v]).all())


def robustness(f, graph: ExplicitGraph, dist: FiniteDistribution):
    q = robust_mask(f, graph)
    return _total(dist.mu.get(v, 0) for v, ok in zip(graph.nodes, q) if ok)


def robust_accuracy(f, graph: ExplicitGraph, dist: FiniteDistribution):
    q = robust_mask(f, graph)
    lab = label_array(f, graph)
    return _total(dist.joint(v, int(l)) for v, ok, l in zip(graph.nodes, q, lab) if ok)


def _component_scores(graph, dist, members):
    return [_total(dist.joint(graph.nodes[v], l) for v in members) for l in dist.labels]


def _majority(scores, labels):
    best = max(scores)
    winners = [l for l, s in zip(labels, scores) if s == best]
    return best, winners


def optimal_robust_accuracy(graph: ExplicitGraph, dist: FiniteDistribution):
    """Best robust accuracy of labelings constant on weak components.

    Returns the value and the chosen label of every weak component (lowest
    label index on ties).
    """
    weak = graph.weak_labels
    k = int(weak.max()) + 1 if len(graph) else 0
    values, labels = [], []
    for c in range(k):
        best, winners = _majority(_component_scores(graph, dist, np.flatnonzero(weak == c)), dist.labels)
        values.append(best)
        labels.append(winners[0])
    return _total(values), labels


def majority_labels(graph: ExplicitGraph, dist: FiniteDistribution, x) -> list:
    """All most-likely labels of the weak component containing ``x``."""
    weak = graph.weak_labels
    members = np.flatnonzero(weak == weak[graph.node_id(x)])
    return _majority(_component_scores(graph, dist, members), dist.labels)[1]


def tradeoff_delta(graph: ExplicitGraph, edge, dist: FiniteDistribution):
    """Change of optimal robust accuracy when ``edge`` is added to the relation.

    Only the two weak components joined by the edge change, so the result is
    best(C_x U C_z) - best(C_x) - best(C_z), summed in one pass so
    an exact cancellation yields exactly zero.
    """
    x, z = edge
    if x not in graph or z not in graph:
        raise EdgeEndpointsMissing(f"edge {edge!r} has an endpoint outside the graph")
    weak = graph.weak_labels
    cx, cz = weak[graph.node_id(x)], weak[graph.node_id(z)]
    if cx == cz:
        return _total([0 * m for m in dist.mu.values()])
    mx, mz = np.flatnonzero(weak == cx), np.flatnonzero(weak == cz)
    sx = _component_scores(graph, dist, mx)
    sz = _component_scores(graph, dist, mz)
    lx = dist.labels[sx.index(max(sx))]
    lz = dist.labels[sz.index(max(sz))]
    merged = [a + b for a, b in zip(sx, sz)]
    lm = dist.labels[merged.index(max(merged))]
    terms = []
    for members, keep in ((mx, lx), (mz, lz)):
        for v in members:
            key = graph.nodes[v]
            terms.append(dist.joint(key, lm))
            terms.append(-dist.joint(key, keep))
    return _total(terms)


# brute force over labelings ---------------------------------------------------


def _reach_bits(graph: ExplicitGraph) -> np.ndarray:
    bits = np.zeros(len(graph), np.int64)
    for v in range(len(graph)):
        for w in graph.reach_ids(v):
            bits[v] |= 1 << int(w)
    return bits


def _gains(graph, dist):
    g0 = [dist.joint(v, 0) for v in graph.nodes]
    g1 = [dist.joint(v, 1) for v in graph.nodes]
    return g0, g1


def _exact_best(reach_bits, comp, k, g0, g1):
    best, best_mask = None, 0
    for mask in range(1 << k):
        node_bits = 0
        for x, c in enumerate(comp):
            node_bits |= ((mask >> int(c)) & 1) << x
        terms = []
        for x, r in enumerate(reach_bits):
            r = int(r)
            hit = node_bits & r
            if (node_bits >> x) & 1:
                if hit == r:
                    terms.append(g1[x])
            elif hit == 0:
                terms.append(g0[x])
        total = _total(terms) if terms else 0
        if best is None or total > best:
            best, best_mask = total, mask
    return best, best_mask


def _search_multi(graph, dist, comp, k):
    best, witness = None, None
    for assign in product(dist.labels, repeat=k):
        labeling = np.array([assign[c] for c in comp], dtype=np.int64)
        value = robust_accuracy(labeling, graph, dist)
        if best is None or value > best:
            best, witness = value, labeling
    return best, witness


def _search(graph, dist, comp, k):
    if len(graph) > BRUTE_FORCE_MAX_NODES:
        raise DomainTooLarge(f"brute force is limited to {BRUTE_FORCE_MAX_NODES} nodes")
    comp = np.asarray(comp, dtype=np.int64)
    if tuple(dist.labels) != (0, 1):
        # small multi-class instances are enumerated directly
        if len(dist.labels) ** k > 1 << BRUTE_FORCE_MAX_NODES:
            raise DomainTooLarge("too many labelings to enumerate")
        return _search_multi(graph, dist, comp, k)
    reach = _reach_bits(graph)
    g0, g1 = _gains(graph, dist)
    if any(isinstance(v, Fraction) for v in g0 + g1):
        _, mask = _exact_best(reach, comp, k, g0, g1)
    else:
        _, mask = kernels.best_labeling(reach, comp, k, np.array(g0, float), np.array(g1, float))
    labeling = np.array([(int(mask) >> int(c)) & 1 for c in comp], dtype=np.int64)
    return robust_accuracy(labeling, graph, dist), labeling


def best_robust_labeling(graph: ExplicitGraph, dist: FiniteDistribution):
    """Highest robust accuracy over all labelings, with a witness labeling."""
    return _search(graph, dist, np.arange(len(graph)), len(graph))


def best_constant_on(graph: ExplicitGraph, sub_graph: ExplicitGraph, dist: FiniteDistribution):
    """Highest robust accuracy (w.r.t. ``graph``) among labelings constant on ``sub_graph``'s weak components."""
    comp = sub_graph.weak_labels
    return _search(graph, dist, comp, int(comp.max()) + 1 if len(comp) else 0)


def majority_among_used(sub_graph: ExplicitGraph, dist: FiniteDistribution, f_adv) -> np.ndarray:
    """Per component, the most likely label among those ``f_adv`` uses there."""
    comp = sub_graph.weak_labels
    f_adv = np.asarray(f_adv)
    out = np.empty(len(sub_graph), np.int64)
    for c in range(int(comp.max()) + 1 if len(comp) else 0):
        members = np.flatnonzero(comp == c)
        used = sorted({int(l) for l in f_adv[members]})
        scores = [_total(dist.joint(sub_graph.nodes[v], l) for v in members) for l in used]
        out[members] = used[scores.index(max(scores))]
    return out


@dataclass
class UnificationReport:
    best_any: object
    best_normalized: object
    construction: object
    construction_labeling: np.ndarray
    witness: np.ndarray

    @property
    def holds(self) -> bool:
        return _close(self.best_any, self.best_normalized) and _close(self.best_any, self.construction)


def unification_report(graph: ExplicitGraph, sub_graph: ExplicitGraph, dist: FiniteDistribution) -> UnificationReport:
    if tuple(graph.nodes) != tuple(sub_graph.nodes):
        raise ReladvError("both relations must be over the same domain")
    if not set(sub_graph.edges()) <= set(graph.edges()):
        raise ReladvError("the normalized relation must be a subset of the full relation")
    if not is_reversible(sub_graph):
        raise NotReversible("the normalized relation must be reversible")
    best_any, witness = best_robust_labeling(graph, dist)
    best_norm, _ = best_constant_on(graph, sub_graph, dist)
    built = majority_among_used(sub_graph, dist, witness)
    return UnificationReport(best_any, best_norm, robust_accuracy(built, graph, dist), built, witness)


def verify_unification(graph: ExplicitGraph, sub_graph: ExplicitGraph, dist: FiniteDistribution) -> bool:
    """Check that normalizing over a reversible sub-relation loses no robust accuracy."""
    return unification_report(graph, sub_graph, dist).holds


# linear separability -----------------------------------------------------------


def _normalize_table(table):
    rows = table.items() if isinstance(table, dict) else table
    out = {}
    for x, y in rows:
        key = tuple(int(b) for b in (as_vector(x) if isinstance(x, str) else x))
        out[key] = int(y)
    if not out:
        raise TableIncomplete("empty truth table")
    k = len(next(iter(out)))
    if k > 16:
        raise DomainTooLarge("truth tables are limited to 16 inputs")
    if any(len(x) != k for x in out) or len(out) != 1 << k:
        raise TableIncomplete(f"table must list all {1 << k} inputs of width {k}")
    return k, out


def separating_hyperplane(table):
    """Exact strict separator ``(w, b)`` as Fractions, or None when none exists.

    By Gordan's alternative, ``s_j (w.x_j + b) > 0`` for all rows is solvable
    iff no convex combination of the signed rows ``s_j (x_j, 1)`` is zero.
    That dual system is solved by a phase-one simplex in exact rationals
    with Bland's rule; if it is infeasible the optimal simplex multipliers
    give the separator.
    """
    k, rows = _normalize_table(table)
    cols = []
    for x, y in sorted(rows.items()):
        s = 1 if y == 1 else -1
        cols.append([Fraction(s * v) for v in x] + [Fraction(s), Fraction(1)])
    m = len(cols)
    r = k + 2
    # tableau rows: [y_1..y_m | t_1..t_r | rhs]
    T = [[cols[j][i] for j in range(m)] + [Fraction(int(i == q)) for q in range(r)]
         + [Fraction(int(i == r - 1))] for i in range(r)]
    basis = [m + i for i in range(r)]
    cost = [Fraction(0)] * m + [Fraction(1)] * r
    while True:
        # reduced costs c_j - c_B B^-1 A_j, read off the current tableau
        red = [cost[j] - sum(cost[basis[i]] * T[i][j] for i in range(r)) for j in range(m + r)]
        enter = next((j for j in range(m + r) if red[j] < 0), None)
        if enter is None:
            break
        ratios = [(T[i][-1] / T[i][enter], basis[i], i) for i in range(r) if T[i][enter] > 0]
        _, _, leave = min(ratios)
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for i in range(r):
            if i != leave and T[i][enter] != 0:
                factor = T[i][enter]
                T[i] = [a - factor * b for a, b in zip(T[i], T[leave])]
        basis[leave] = enter
    objective = sum(cost[basis[i]] * T[i][-1] for i in range(r))
    if objective == 0:
        return None
    # simplex multipliers from the artificial columns: red(t_i) = 1 - pi_i
    pi = [1 - red[m + i] for i in range(r)]
    w = [-p for p in pi[:k]]
    b = -pi[k]
    for x, y in rows.items():
        score = sum(wi * xi for wi, xi in zip(w, x)) + b
        if (score > 0) != (y == 1) or score == 0:
            raise AssertionError("simplex multipliers failed to separate the table")
    return w, b


def linear_separability_check(table) -> bool:
    return separating_hyperplane(table) is not None


def truth_table(rule, k: int) -> dict:
    """Tabulate a boolean ``rule`` over all of {0,1}^k."""
    return {x: int(bool(rule(x))) for x in product((0, 1), repeat=k)}
