"""Robust learning against relational adversaries.

Relations over binary feature vectors, normal forms that are constant on
weak components, discrete attacks, training schemes and exact oracles.
"""
from .errors import ReladvError
from .graph import ExplicitGraph, WccIndex, build_graph, closure, is_reversible, wcc
from .normalize import (
    EquivalenceNormalizer,
    GraphNormalizer,
    StrongestAdvNormalizer,
    equivalence_normalize,
    generic_normalize,
    strongest_adv_normalize,
)
from .relation import RelationSpec, atomic_moves, load_relation, save_relation

__version__ = "0.1.0"

__all__ = [
    "EquivalenceNormalizer",
    "ExplicitGraph",
    "GraphNormalizer",
    "RelationSpec",
    "ReladvError",
    "StrongestAdvNormalizer",
    "WccIndex",
    "atomic_moves",
    "build_graph",
    "closure",
    "equivalence_normalize",
    "generic_normalize",
    "is_reversible",
    "load_relation",
    "save_relation",
    "strongest_adv_normalize",
    "wcc",
]
