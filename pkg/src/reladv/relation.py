"""Relation specifications and their one-step moves over binary feature vectors.

A relation is described declaratively by a :class:`RelationSpec`. Several
kinds of rule can be present at once; the spec then denotes their union.

Feature vectors are ``uint8`` numpy arrays of 0/1. Wherever a vector needs a
hashable identity it is keyed by its bit string (``"0110"``), and the
lexicographic order on those strings is the global tie-breaking order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import HueUnsupported, OverlappingGroups, ReladvError


def as_vector(x) -> np.ndarray:
    """Coerce a bit string or 0/1 sequence into a uint8 vector."""
    if isinstance(x, str):
        if x.strip("01"):
            raise ReladvError(f"not a bit string: {x!r}")
        return np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ReladvError(f"feature vector must be 1-D, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ReladvError("feature vector entries must be 0 or 1")
    return arr.astype(np.uint8)


def to_bits(x) -> str:
    if isinstance(x, str):
        return x
    return (np.asarray(x, dtype=np.uint8) + ord("0")).tobytes().decode()


def all_vectors(d: int) -> list[str]:
    """Every bit string of length ``d`` in lexicographic order."""
    return [format(i, f"0{d}b") if d else "" for i in range(1 << d)]


def _check_groups(groups: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    seen: set[int] = set()
    out = []
    for g in groups:
        g = tuple(sorted(int(i) for i in g))
        if len(set(g)) != len(g):
            raise OverlappingGroups(f"group {g} repeats a feature")
        if len(g) < 2:
            raise ReladvError(f"equivalence group {g} needs at least two features")
        clash = seen.intersection(g)
        if clash:
            raise OverlappingGroups(f"feature(s) {sorted(clash)} appear in more than one group")
        seen.update(g)
        out.append(g)
    return tuple(sorted(out))


@dataclass(frozen=True)
class RelationSpec:
    """Union of explicit edges, additive 0->1 flips, equivalence groups and hue shift.

    ``explicit_edges`` holds ordered pairs of node keys (bit strings, or any
    sortable labels when the graph is built directly from edges).
    """

    explicit_edges: frozenset = frozenset()
    additive: frozenset = frozenset()
    equivalence_groups: tuple = ()
    hue_shift: bool = False

    def __post_init__(self):
        object.__setattr__(self, "explicit_edges", frozenset((a, b) for a, b in self.explicit_edges))
        object.__setattr__(self, "additive", frozenset(int(i) for i in self.additive))
        object.__setattr__(self, "equivalence_groups", _check_groups(self.equivalence_groups))

    @classmethod
    def explicit(cls, edges) -> "RelationSpec":
        return cls(explicit_edges=frozenset(tuple(e) for e in edges))

    @property
    def is_empty(self) -> bool:
        return not (self.explicit_edges or self.additive or self.equivalence_groups or self.hue_shift)

    def union(self, other: "RelationSpec") -> "RelationSpec":
        return RelationSpec(
            self.explicit_edges | other.explicit_edges,
            self.additive | other.additive,
            tuple({*self.equivalence_groups, *other.equivalence_groups}),
            self.hue_shift or other.hue_shift,
        )

    def without(self, other: "RelationSpec") -> "RelationSpec":
        """Residual relation: the rules of ``self`` not present in ``other``."""
        return RelationSpec(
            self.explicit_edges - other.explicit_edges,
            self.additive - other.additive,
            tuple(g for g in self.equivalence_groups if g not in other.equivalence_groups),
            self.hue_shift and not other.hue_shift,
        )

    def group_of(self) -> dict[int, tuple[int, ...]]:
        return {i: g for g in self.equivalence_groups for i in g}

    def support(self) -> set[int]:
        """Coordinates that some rule of this relation can change."""
        sup = set(self.additive)
        for g in self.equivalence_groups:
            sup.update(g)
        for a, b in self.explicit_edges:
            if isinstance(a, str) and isinstance(b, str) and len(a) == len(b):
                sup.update(i for i, (p, q) in enumerate(zip(a, b)) if p != q)
        return sup

    # serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        if self.hue_shift:
            raise HueUnsupported("hue-shift relations have no feature-vector JSON form")
        return {
            "explicit_edges": sorted([a, b] for a, b in self.explicit_edges),
            "additive": sorted(self.additive),
            "equivalence_groups": [list(g) for g in self.equivalence_groups],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "RelationSpec":
        return cls(
            explicit_edges=frozenset(tuple(e) for e in obj.get("explicit_edges", [])),
            additive=frozenset(obj.get("additive", [])),
            equivalence_groups=tuple(tuple(g) for g in obj.get("equivalence_groups", [])),
        )


def load_relation(path) -> tuple[RelationSpec, int | None]:
    """Read a relation JSON file; returns the spec and the optional ``dim`` entry."""
    obj = json.loads(Path(path).read_text())
    return RelationSpec.from_json_dict(obj), obj.get("dim")


def save_relation(spec: RelationSpec, path, dim: int | None = None) -> None:
    obj = spec.to_json_dict()
    if dim is not None:
        obj["dim"] = int(dim)
    Path(path).write_text(json.dumps(obj) + "\n")


def _explicit_successors(spec: RelationSpec) -> dict:
    # cached per spec instance; specs are frozen
    cache = spec.__dict__.get("_succ")
    if cache is None:
        cache = {}
        for a, b in spec.explicit_edges:
            cache.setdefault(a, set()).add(b)
        object.__setattr__(spec, "_succ", cache)
    return cache


def atomic_moves(spec: RelationSpec, x) -> list[np.ndarray]:
    """One-step successors of ``x`` under ``spec``, deduplicated, in lexicographic order.

    Additive rules flip one flippable 0-bit to 1. Inside an equivalence group
    whose OR is 1 the moves are: move a set bit onto an unset position, set an
    unset bit, or clear a set bit while another stays set. A group whose bits
    are all zero admits no equivalence move.
    """
    if spec.hue_shift:
        raise HueUnsupported("hue shift is continuous; use reladv.hue")
    x = as_vector(x)
    out: dict[str, np.ndarray] = {}

    def emit(z):
        out.setdefault(to_bits(z), z)

    for i in spec.additive:
        if i < x.size and x[i] == 0:
            z = x.copy()
            z[i] = 1
            emit(z)
    for g in spec.equivalence_groups:
        g = [i for i in g if i < x.size]
        on = [i for i in g if x[i]]
        if not on:
            continue
        off = [i for i in g if not x[i]]
        for j in off:
            z = x.copy()
            z[j] = 1
            emit(z)
            for i in on:
                z = x.copy()
                z[i], z[j] = 0, 1
                emit(z)
        if len(on) > 1:
            for i in on:
                z = x.copy()
                z[i] = 0
                emit(z)
    if spec.explicit_edges:
        for b in _explicit_successors(spec).get(to_bits(x), ()):
            if isinstance(b, str) and len(b) == x.size:
                emit(as_vector(b))
    return [out[k] for k in sorted(out)]


def move_delta(x: np.ndarray, z: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Coordinates set (0->1) and cleared (1->0) going from ``x`` to ``z``."""
    added = np.flatnonzero((z == 1) & (x == 0))
    removed = np.flatnonzero((z == 0) & (x == 1))
    return tuple(int(i) for i in added), tuple(int(i) for i in removed)


def vectors_to_matrix(vectors: Sequence) -> np.ndarray:
    if not len(vectors):
        return np.zeros((0, 0), dtype=np.uint8)
    return np.stack([as_vector(v) for v in vectors])
