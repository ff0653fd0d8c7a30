"""Relational attacks: exhaustive search, GreedyByGroup, GreedyByGrad and an any-of suite.

Attacks only need a classifier exposing batch ``predict``, ``loss`` and
``grad_input`` (see :mod:`reladv.models`). All search is over the
reflexive-transitive closure of the input under the given relation, so the
returned vector is always a legal adversarial example.
"""
from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainTooLarge, InvalidConfig, OverlappingPartition
from .graph import DEFAULT_MAX_NODES, ExplicitGraph
from .relation import RelationSpec, as_vector, atomic_moves, move_delta, to_bits

log = logging.getLogger(__name__)

PART_STATE_CAP = 4096


@dataclass
class AttackResult:
    adversarial: np.ndarray
    loss: float
    success: bool
    moves: list = field(default_factory=list)
    name: str = ""
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "attack": self.name,
            "adversarial": [int(i) for i in np.flatnonzero(self.adversarial)],
            "loss": float(self.loss),
            "success": bool(self.success),
            "moves": [{"add": list(a), "remove": list(r)} for a, r in self.moves],
            "details": {k: bool(v) for k, v in self.details.items()},
        }


def _result(f, z, y, moves, name):
    z = np.asarray(z, dtype=np.uint8)
    return AttackResult(z, float(f.loss(z, y)), bool(f.predict(z) != y), moves, name)


def _losses(f, Z, y):
    return np.asarray(f.loss(np.asarray(Z, dtype=np.float64), np.full(len(Z), y)), dtype=np.float64)


# exhaustive -----------------------------------------------------------------


def _bfs(start, successors, max_states):
    """BFS from ``start``; returns visited keys in order plus parent links."""
    order = [start]
    parent = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in successors(v):
            if w not in parent:
                parent[w] = v
                if len(parent) > max_states:
                    raise DomainTooLarge(f"closure exceeds {max_states} states")
                order.append(w)
                queue.append(w)
    return order, parent


def _path_moves(parent, end):
    path = [end]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return [move_delta(as_vector(a), as_vector(b)) for a, b in zip(path, path[1:])]


def exhaustive_attack(f, spec: RelationSpec, graph: ExplicitGraph | None, x, y,
                      max_states: int = DEFAULT_MAX_NODES) -> AttackResult:
    """Highest-loss member of the closure; ties go to the first one found by BFS."""
    x = as_vector(x)
    start = to_bits(x)
    if graph is not None:
        graph.node_id(start)
        succ = graph.successors
    else:
        succ = lambda k: [to_bits(z) for z in atomic_moves(spec, as_vector(k))]  # noqa: E731
    order, parent = _bfs(start, succ, max_states)
    Z = np.stack([as_vector(k) for k in order])
    losses = _losses(f, Z, y)
    best = int(np.argmax(losses))
    return _result(f, Z[best], y, _path_moves(parent, order[best]), "exhaustive")


# GreedyByGroup --------------------------------------------------------------


class Partition:
    """Parts of a relation with pairwise-disjoint coordinate supports."""

    def __init__(self, parts):
        self.parts = [p for p in parts if not p.is_empty]
        supports = [p.support() for p in self.parts]
        for (i, a), (j, b) in itertools.combinations(enumerate(supports), 2):
            if a & b:
                raise OverlappingPartition(f"parts {i} and {j} share coordinates {sorted(a & b)}")
        if len(self.parts) > 1 and any(p.explicit_edges for p in self.parts):
            raise InvalidConfig("explicit-edge relations can only be attacked as a single part")
        self.supports = [np.array(sorted(s), dtype=np.int64) for s in supports]

    @classmethod
    def by_rule(cls, spec: RelationSpec) -> "Partition":
        """One part per equivalence group, plus one for additive flips outside groups."""
        if spec.explicit_edges:
            return cls([spec])
        grouped = spec.group_of()
        free = spec.additive - grouped.keys()
        parts = []
        for g in spec.equivalence_groups:
            parts.append(RelationSpec(additive=spec.additive & set(g), equivalence_groups=(g,)))
        parts.append(RelationSpec(additive=free))
        return cls(parts)

    def __len__(self):
        return len(self.parts)


def _structured_closure(part: RelationSpec, x: np.ndarray, cap: int):
    """Closure of ``x`` under additive/group rules without explicit edges, or None if too big.

    Groups that carry additive flips are handled as a whole block: every
    nonzero configuration is reachable when the block can be switched on.
    """
    blocks = []
    count = 1
    grouped = set()
    for g in part.equivalence_groups:
        grouped.update(g)
        g = np.array(g)
        addable = bool(part.additive & set(g.tolist()))
        if x[g].any() or addable:
            configs = [c for c in itertools.product((0, 1), repeat=g.size) if any(c)]
            if not x[g].any():
                configs.append((0,) * g.size)
            blocks.append((g, configs))
            count *= len(configs)
    free = np.array(sorted(i for i in part.additive - grouped if x[i] == 0), dtype=np.int64)
    if free.size:
        blocks.append((free, list(itertools.product((0, 1), repeat=free.size))))
        count *= 1 << free.size
    if count > cap:
        return None
    Z = np.repeat(x[None, :], count, axis=0)
    for row, combo in enumerate(itertools.product(*[cfgs for _, cfgs in blocks])):
        for (coords, _), c in zip(blocks, combo):
            Z[row, coords] = c
    return Z[np.lexsort(Z.T[::-1])] if count > 1 else Z


def _part_closure(part: RelationSpec, x: np.ndarray, cap: int):
    if not part.explicit_edges:
        return _structured_closure(part, x, cap)
    try:
        order, _ = _bfs(to_bits(x), lambda k: [to_bits(z) for z in atomic_moves(part, as_vector(k))], cap)
    except DomainTooLarge:
        return None
    return np.stack([as_vector(k) for k in sorted(order)])


def _hill_climb(f, part: RelationSpec, x: np.ndarray, y, max_steps: int = 1000):
    cur = x
    cur_loss = float(_losses(f, cur[None, :], y)[0])
    for _ in range(max_steps):
        moves = atomic_moves(part, cur)
        if not moves:
            break
        Z = np.stack(moves)
        losses = _losses(f, Z, y)
        best = int(np.argmax(losses))
        if losses[best] <= cur_loss:
            break
        cur, cur_loss = Z[best], float(losses[best])
    return cur


def greedy_by_group(f, partition: Partition, x, y, K: int, state_cap: int = PART_STATE_CAP) -> AttackResult:
    """Alternate exact per-part maximization and recombination for up to ``K`` rounds.

    Each round maximizes the loss over the closure of the current vector
    under every part separately (lexicographically smallest maximizer on
    ties) and writes each part's winning coordinates back. Parts whose
    closure exceeds ``state_cap`` states fall back to hill climbing. The
    best vector seen over all rounds is returned, so the loss never
    decreases as ``K`` grows.
    """
    if not isinstance(partition, Partition):
        partition = Partition(partition)
    x = as_vector(x)
    cur = x.copy()
    best, best_loss = cur, float(_losses(f, cur[None, :], y)[0])
    trail, best_len = [], 0
    for _ in range(K):
        new = cur.copy()
        for part, support in zip(partition.parts, partition.supports):
            Z = _part_closure(part, cur, state_cap)
            if Z is None:
                log.info("part closure above %d states; hill climbing instead", state_cap)
                z = _hill_climb(f, part, cur, y)
            else:
                z = Z[int(np.argmax(_losses(f, Z, y)))]
            if part.explicit_edges:
                new = z.copy()
            else:
                new[support] = z[support]
        if np.array_equal(new, cur):
            break
        trail.append(move_delta(cur, new))
        cur = new
        loss_now = float(_losses(f, cur[None, :], y)[0])
        if loss_now > best_loss:
            best, best_loss, best_len = cur, loss_now, len(trail)
    return _result(f, best, y, trail[:best_len], "group")


# GreedyByGrad ---------------------------------------------------------------


def _group_arrays(spec: RelationSpec, d: int):
    addmask = np.zeros(d, np.bool_)
    addmask[[i for i in spec.additive if i < d]] = True
    gid = np.full(d, -1, np.int64)
    gptr = [0]
    gmem = []
    for q, g in enumerate(spec.equivalence_groups):
        gid[list(g)] = q
        gmem += list(g)
        gptr.append(len(gmem))
    return addmask, gid, np.array(gptr, np.int64), np.array(gmem, np.int64)


def _generic_grad_step(f, spec, x, y, g, m, exact):
    base = float(f.loss(x, y)) if exact else 0.0
    cands = atomic_moves(spec, x)
    if not cands:
        return x, []
    Z = np.stack(cands)
    if exact:
        scores = _losses(f, Z, y) - base
    else:
        scores = (Z.astype(np.float64) - x) @ g
    # stable sort keeps lexicographic order among equal scores
    order = np.argsort(-scores, kind="stable")
    cur = x.copy()
    touched = np.zeros(x.size, bool)
    applied = []
    for idx in order:
        if len(applied) >= m or scores[idx] <= 0:
            break
        added, removed = move_delta(x, Z[idx])
        coords = list(added) + list(removed)
        if touched[coords].any():
            continue
        z = cur.copy()
        z[list(added)] = 1
        z[list(removed)] = 0
        if not any(np.array_equal(z, w) for w in atomic_moves(spec, cur)):
            continue
        cur = z
        touched[coords] = True
        applied.append((added, removed))
    return cur, applied


def greedy_by_grad(f, spec: RelationSpec, x, y, m: int, K: int, score: str = "first_order") -> AttackResult:
    """Apply up to ``m`` top-scoring atomic moves per iteration, for ``K`` iterations.

    A move ``x -> z`` is scored by ``g . (z - x)`` with ``g`` the input
    gradient of the loss at the current vector (``score="exact"`` uses the
    true loss change instead). Only strictly positive scores are applied,
    highest first, skipping a move when a coordinate it touches was already
    changed this iteration or it stopped being a legal move. Iteration stops
    early when nothing applies. The highest-loss iterate is returned, so the
    loss never decreases as ``K`` grows.
    """
    x = as_vector(x)
    cur = x.copy()
    best, best_loss = cur, float(f.loss(cur, y))
    trail, best_len = [], 0
    structured = not spec.explicit_edges and score == "first_order"
    arrays = _group_arrays(spec, x.size) if structured else None
    for _ in range(K):
        if m <= 0:
            break
        g = np.asarray(f.grad_input(cur.astype(np.float64), y), dtype=np.float64)
        if structured:
            new, applied = kernels.greedy_grad_step(cur, g, *arrays, m)
            applied = [(() if a < 0 else (int(a),), () if r < 0 else (int(r),)) for a, r in applied]
        else:
            new, applied = _generic_grad_step(f, spec, cur, y, g, m, score == "exact")
        if not applied:
            break
        trail += applied
        cur = np.asarray(new, dtype=np.uint8)
        loss_now = float(f.loss(cur, y))
        if loss_now > best_loss:
            best, best_loss, best_len = cur, loss_now, len(trail)
    return _result(f, best, y, trail[:best_len], "grad")


def greedy_by_grad_batch(f, spec: RelationSpec, X, y, m: int, K: int) -> np.ndarray:
    """Row-wise :func:`greedy_by_grad` with one gradient call per iteration."""
    X = np.asarray(X, dtype=np.uint8)
    y = np.broadcast_to(np.asarray(y, dtype=np.int64), (X.shape[0],))
    if spec.explicit_edges:
        return np.stack([greedy_by_grad(f, spec, x, t, m, K).adversarial for x, t in zip(X, y)])
    cur = X.copy()
    if m <= 0 or K <= 0 or not X.shape[0]:
        return cur
    arrays = _group_arrays(spec, X.shape[1])
    best = X.copy()
    best_loss = np.asarray(f.loss(X.astype(np.float64), y), dtype=np.float64)
    active = np.arange(X.shape[0])
    for _ in range(K):
        G = np.asarray(f.grad_input(cur[active].astype(np.float64), y[active]), dtype=np.float64)
        new, nmoves = kernels.greedy_grad_batch(cur[active], np.ascontiguousarray(G), *arrays, m)
        active = active[nmoves > 0]
        cur[active] = new[nmoves > 0]
        if not active.size:
            break
        now = np.asarray(f.loss(cur[active].astype(np.float64), y[active]), dtype=np.float64)
        up = now > best_loss[active]
        best[active[up]] = cur[active[up]]
        best_loss[active[up]] = now[up]
    return best


# suite ----------------------------------------------------------------------


@dataclass
class AttackConfig:
    algo: str
    k: int = 1
    m: int = 1
    partition: Partition | None = None
    max_states: int = 1 << 16

    def __post_init__(self):
        if self.algo not in ("exhaustive", "group", "grad"):
            raise InvalidConfig(f"unknown attack {self.algo!r}")

    @property
    def name(self) -> str:
        if self.algo == "exhaustive":
            return "exhaustive"
        if self.algo == "group":
            return f"group(K={self.k})"
        return f"grad(m={self.m},K={self.k})"


def run_attack(cfg: AttackConfig, f, spec, graph, x, y) -> AttackResult:
    if cfg.algo == "exhaustive":
        res = exhaustive_attack(f, spec, graph, x, y, cfg.max_states)
    elif cfg.algo == "group":
        res = greedy_by_group(f, cfg.partition or Partition.by_rule(spec), x, y, cfg.k)
    else:
        res = greedy_by_grad(f, spec, x, y, cfg.m, cfg.k)
    res.name = cfg.name
    return res


def attack_suite(f, spec: RelationSpec, graph: ExplicitGraph | None, x, y, configs) -> AttackResult:
    """Run every configured attack; keep the highest-loss result.

    The suite succeeds when any member attack flips the prediction.
    Exhaustive search is skipped when the closure is too large.
    """
    x = as_vector(x)
    best = _result(f, x, y, [], "none")
    details = {}
    for cfg in configs:
        try:
            res = run_attack(cfg, f, spec, graph, x, y)
        except DomainTooLarge:
            log.info("skipping %s: closure too large", cfg.name)
            continue
        details[cfg.name] = res.success
        if res.loss > best.loss:
            best = res
    best.details = details
    best.success = bool(best.success or any(details.values()))
    return best
