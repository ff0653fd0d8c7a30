"""Group functionally equivalent API names by syntactic naming patterns."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateFeatureId, ReladvError
from .relation import RelationSpec

# trailing markers whose removal links two names: extended variant,
# ANSI/wide variant, secure variant
SUFFIXES = ("Ex", "A", "W", "_s")


@dataclass(frozen=True)
class ApiEntry:
    library: str
    api: str
    feature_id: int

    def __post_init__(self):
        if not self.library or not self.api:
            raise ReladvError("library and api names must be non-empty")


class DisjointSet:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # the smaller id becomes the root so results do not depend on order
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo

    def groups(self) -> list[list]:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return [sorted(g) for g in out.values()]


def base_names(api: str) -> list[tuple[str, str]]:
    """``(suffix, base)`` for each trailing marker of ``api`` leaving a non-empty base."""
    return [(s, api[: -len(s)]) for s in SUFFIXES if api.endswith(s) and len(api) > len(s)]


def extract_groups(apis) -> list[list[int]]:
    """Feature-id groups of mutually equivalent APIs, sorted; singletons dropped.

    Entries are linked when they share a name (in any libraries), when one
    name is the other plus a trailing "Ex", "A", "W" or "_s", and when two
    names share a base and end in "A" and "W" respectively. Links are closed
    transitively.
    """
    apis = list(apis)
    ids = [a.feature_id for a in apis]
    if len(set(ids)) != len(ids):
        raise DuplicateFeatureId("feature ids must be unique")
    names = {a.api for a in apis}
    # a NUL-prefixed key stands for the A/W pair of a base and never clashes with an API name
    ds = DisjointSet(sorted(names | {"\0" + b for n in names for s, b in base_names(n) if s in ("A", "W")}))
    for name in names:
        for suffix, base in base_names(name):
            if base in names:
                ds.union(name, base)
            if suffix in ("A", "W"):
                ds.union(name, "\0" + base)
    by_root: dict[str, list[int]] = {}
    for a in apis:
        by_root.setdefault(ds.find(a.api), []).append(a.feature_id)
    return sorted(sorted(g) for g in by_root.values() if len(g) >= 2)


def groups_to_relation(groups) -> RelationSpec:
    return RelationSpec(equivalence_groups=tuple(tuple(sorted(g)) for g in groups))


def parse_api_csv(text: str) -> list[ApiEntry]:
    """Parse CSV text with columns library, api, feature_id."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"library", "api", "feature_id"} - set(reader.fieldnames or ())
    if missing:
        raise ReladvError(f"API inventory lacks columns {sorted(missing)}")
    return [ApiEntry(r["library"].strip(), r["api"].strip(), int(r["feature_id"])) for r in reader]


def read_api_csv(path) -> list[ApiEntry]:
    return parse_api_csv(Path(path).read_text())
