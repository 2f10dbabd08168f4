"""Top-down reduction of a hierarchy from its class embeddings.

Levels are processed from the top. At each level a within-level step
merges classes that descend from the same reduced parent (or from the same
collapsed set) and sit close together in embedding space. Then a
between-level step clusters every reduced class together with its children
and collapses the children that land in the parent's cluster, unless the
parent is the worst-fitting member of that cluster. Collapsed children are
carried forward as pseudoclusters, which keep their ancestor's embedding so
that their own children can still be processed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .clustering import ClusterSolution, select_k
from .embedding import EmbeddingTable
from .errors import MissingLeafError
from .hierarchy import Hierarchy, NodeId


class ReducedId(NamedTuple):
    level: int
    index: int

    def __str__(self) -> str:
        return f"{self.level}.{self.index}"


@dataclass
class ClusterNode:
    id: ReducedId
    members: tuple[NodeId, ...]
    embedding: np.ndarray
    descendants_all: tuple[NodeId, ...]
    descendants_active: tuple[NodeId, ...]
    parent: ReducedId | None


@dataclass
class PseudoCluster:
    id: tuple[int, int]
    members: tuple[NodeId, ...]
    inherited_embedding: np.ndarray
    descendants_all: tuple[NodeId, ...]
    descendants_active: tuple[NodeId, ...]
    target: ReducedId

    @property
    def embedding(self) -> np.ndarray:
        return self.inherited_embedding


@dataclass
class ReducedHierarchy:
    hierarchy: Hierarchy
    classes: dict[int, list[ClusterNode]]
    pseudoclusters: dict[int, list[PseudoCluster]]
    leaf_group: dict[NodeId, ReducedId]
    children: dict[ReducedId | None, list[ReducedId]] = field(default_factory=dict)

    @property
    def sizes(self) -> tuple[int, ...]:
        """``(n~_1, ..., n~_R~)``; trailing empty levels are dropped."""
        sizes = [len(self.classes.get(r, [])) for r in range(1, self.hierarchy.num_levels + 1)]
        while sizes and sizes[-1] == 0:
            sizes.pop()
        return tuple(sizes)

    @property
    def num_levels(self) -> int:
        return len(self.sizes)

    @property
    def n_groups(self) -> int:
        return len(set(self.leaf_group.values()))

    def node(self, rid: ReducedId) -> ClusterNode:
        return self.classes[rid.level][rid.index - 1]

    def member_sets(self) -> dict[int, list[tuple[NodeId, ...]]]:
        return {r: [c.members for c in cs] for r, cs in self.classes.items()}

    def key(self):
        return structure_key(self.hierarchy, self.member_sets())

    def same_structure(self, other) -> bool:
        """Equality up to relabelling of the reduced classes."""
        other_sets = other.member_sets() if isinstance(other, ReducedHierarchy) else other.classes
        return self.key() == structure_key(self.hierarchy, other_sets)

    def to_dict(self) -> dict:
        h = self.hierarchy
        return {
            "num_levels": self.num_levels,
            "sizes": list(self.sizes),
            "levels": {
                str(r): [
                    {
                        "id": str(c.id),
                        "members": [h.label(m) for m in c.members],
                        "parent": None if c.parent is None else str(c.parent),
                    }
                    for c in cs
                ]
                for r, cs in self.classes.items() if cs
            },
            "children": {
                ("root" if p is None else str(p)): [str(c) for c in kids]
                for p, kids in self.children.items()
            },
            "pseudoclusters": [
                {"level": f.id[0], "index": f.id[1], "members": [h.label(m) for m in f.members],
                 "target": str(f.target)}
                for r in sorted(self.pseudoclusters) for f in self.pseudoclusters[r]
            ],
            "leaf_group": {h.label(leaf): str(g) for leaf, g in self.leaf_group.items()},
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    def write_groups_csv(self, path: str | Path) -> None:
        """One row per original leaf with its reduced group."""
        h = self.hierarchy
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("leaf,group\n")
            for leaf, g in self.leaf_group.items():
                fh.write(f"{h.label(leaf)},{g}\n")


def structure_key(hierarchy: Hierarchy, classes: Mapping[int, Sequence[Sequence[NodeId]]]):
    """Label-free fingerprint of a reduced structure given by its member sets.

    Two structures share a key iff a level-preserving relabelling maps one
    onto the other, including their parent links and leaf groupings.
    """
    owner: dict[NodeId, tuple] = {}
    keys = set()
    for r, cls in classes.items():
        for members in cls:
            k = (r, frozenset(NodeId(*m) for m in members))
            keys.add(k)
            for m in k[1]:
                owner[m] = k
    links = set()
    for k in keys:
        r, members = k
        parent = None
        node = min(members)
        for _ in range(r - 1):
            node = hierarchy.parent(node)
            if node in owner:
                parent = owner[node]
                break
        links.add((parent, k))
    groups: dict[tuple, set] = {}
    for leaf in hierarchy.level(hierarchy.num_levels):
        g = None
        for node in hierarchy.leaf_path(leaf):
            g = owner.get(node, g)
        groups.setdefault(g, set()).add(leaf)
    return (
        frozenset(keys),
        frozenset(links),
        frozenset((g, frozenset(ls)) for g, ls in groups.items()),
    )


# algorithm -----------------------------------------------------------------

@dataclass
class _State:
    hierarchy: Hierarchy
    table: EmbeddingTable
    si_star: float
    seed: int
    max_k: int | None
    classes: dict[int, list[ClusterNode]] = field(default_factory=dict)
    pseudos: dict[int, list[PseudoCluster]] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)

    def vectors(self, nodes: Sequence[NodeId]) -> np.ndarray:
        return np.array([self.table.vector(n) for n in nodes]).reshape(len(nodes), self.table.q_e)

    def children_of(self, members: Sequence[NodeId]) -> tuple[NodeId, ...]:
        return tuple(sorted(c for m in members for c in self.hierarchy.children(m)))

    def label(self, n: NodeId) -> str:
        return self.hierarchy.label(n)


def _unit_record(unit) -> dict:
    if isinstance(unit, ClusterNode):
        return {"unit": "cluster", "unit_id": str(unit.id)}
    return {"unit": "pseudo", "unit_id": f"{unit.id[0]}.{unit.id[1]}"}


def _solution_record(sol: ClusterSolution) -> dict:
    return {
        "k_star": sol.k,
        "si_curve": {str(k): v for k, v in sol.si_curve.items()},
        "best_si": max(sol.si_curve.values()) if sol.si_curve else None,
        "assignment": [int(c) + 1 for c in sol.labels],
        "per_item_silhouette": None if sol.per_item_silhouette is None
        else [float(v) for v in sol.per_item_silhouette],
    }


def horizontal_step(state: _State, r: int) -> None:
    """Merge classes at level ``r`` within each parent unit from level ``r - 1``."""
    h = state.hierarchy
    created: list[ClusterNode] = []

    def emit(active: tuple[NodeId, ...], parent: ReducedId | None, record: dict) -> list[ReducedId]:
        record.update({"step": "horizontal", "level": r,
                       "items": [state.label(n) for n in active]})
        if not active:
            record["k_star"] = 0
            state.trace.append(record)
            return []
        sol = select_k(state.vectors(active), state.si_star, state.seed, ids=list(active),
                       max_k=state.max_k)
        record.update(_solution_record(sol))
        groups = sorted(sol.clusters(), key=min)
        ids = []
        for g in groups:
            members = tuple(active[j] for j in g)
            rid = ReducedId(r, len(created) + 1)
            kids = state.children_of(members) if r < h.num_levels else ()
            created.append(ClusterNode(rid, members, state.vectors(members).mean(axis=0),
                                       kids, kids, parent))
            ids.append(rid)
        record["created"] = [str(i) for i in ids]
        state.trace.append(record)
        return ids

    if r == 1:
        emit(tuple(h.level(1)), None, {"unit": "root", "unit_id": None})
    else:
        for unit in state.classes[r - 1]:
            emit(unit.descendants_active, unit.id, _unit_record(unit))
        for unit in state.pseudos.get(r - 1, []):
            emit(unit.descendants_active, unit.target, _unit_record(unit))
    state.classes[r] = created


def vertical_step(state: _State, r: int) -> None:
    """Collapse children at level ``r + 1`` that cluster with their parent unit."""
    made: list[PseudoCluster] = []
    units = list(state.classes[r]) + list(state.pseudos.get(r, []))
    for unit in units:
        kids = unit.descendants_all
        record = {"step": "vertical", "level": r, **_unit_record(unit),
                  "items": ["<parent>"] + [state.label(n) for n in kids]}
        items = np.vstack([unit.embedding[None, :], state.vectors(kids)])
        ids = [NodeId(r, 0), *kids]
        sol = select_k(items, state.si_star, state.seed, ids=ids, max_k=state.max_k)
        record.update(_solution_record(sol))
        if sol.k == 1:
            in_p = list(kids)
            veto = False
        else:
            p = sol.labels[0]
            pos = [j for j in range(1, len(ids)) if sol.labels[j] == p]
            in_p = [kids[j - 1] for j in pos]
            si = sol.per_item_silhouette
            # parent strictly worst in its own cluster keeps the children apart
            veto = bool(pos) and bool(si[0] < min(si[j] for j in pos))
        collapse = bool(in_p) and not veto
        record.update({"cluster_with_parent": [state.label(n) for n in in_p],
                       "veto": veto, "collapsed": [state.label(n) for n in in_p] if collapse else []})
        if collapse:
            members = tuple(in_p)
            target = unit.id if isinstance(unit, ClusterNode) else unit.target
            grand = state.children_of(members) if r + 1 < state.hierarchy.num_levels else ()
            f = PseudoCluster((r + 1, len(made) + 1), members, unit.embedding.copy(),
                              grand, grand, target)
            made.append(f)
            record["pseudocluster"] = f"{r + 1}.{len(made)}"
            gone = set(members)
            unit.descendants_active = tuple(c for c in kids if c not in gone)
        else:
            unit.descendants_active = tuple(kids)
        state.trace.append(record)
    state.pseudos[r + 1] = made


def reduce(hierarchy: Hierarchy, table: EmbeddingTable, si_star: float, seed: int = 0,
           max_k: int | None = None) -> tuple[ReducedHierarchy, list[dict]]:
    """Run the top-down algorithm; returns the reduced hierarchy and a step trace."""
    if not -1.0 <= si_star <= 1.0:
        raise ValueError("si_star must lie in [-1, 1]")
    for r in range(1, hierarchy.num_levels + 1):
        arr = table.levels.get(r)
        if arr is None or arr.shape[0] != hierarchy.sizes[r - 1]:
            raise MissingLeafError(f"embedding table does not cover level {r}")
    state = _State(hierarchy, table, si_star, seed, max_k)
    R = hierarchy.num_levels
    for r in range(1, R + 1):
        horizontal_step(state, r)
        if r < R:
            vertical_step(state, r)
    return _assemble(state), state.trace


def _assemble(state: _State) -> ReducedHierarchy:
    h = state.hierarchy
    owner: dict[NodeId, ReducedId] = {}
    children: dict[ReducedId | None, list[ReducedId]] = {}
    for r in sorted(state.classes):
        for c in state.classes[r]:
            for m in c.members:
                owner[m] = c.id
            children.setdefault(c.parent, []).append(c.id)
    leaf_group = {}
    for leaf in h.level(h.num_levels):
        g = None
        for node in h.leaf_path(leaf):
            g = owner.get(node, g)
        leaf_group[leaf] = g
    return ReducedHierarchy(h, dict(state.classes), dict(state.pseudos), leaf_group, children)


def write_trace(path: str | Path, trace: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
