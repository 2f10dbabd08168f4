"""Hierarchical categorical variable: a rooted forest of classes over R levels.

Classes are addressed by ``NodeId(level, index)`` with both coordinates
1-based, so ``NodeId(2, 7)`` is the seventh class at the second level.
Indices follow first-appearance order in the input.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DuplicateLeafError,
    EmptyInteriorError,
    HierarchyError,
    LevelGapError,
    MultiParentError,
    NotALeafError,
    OrphanNodeError,
)


class NodeId(NamedTuple):
    level: int
    index: int

    def __str__(self) -> str:
        return f"h_{self.level},{self.index}"


def _check_structure(
    sizes: Sequence[int], pairs: Iterable[tuple[NodeId, NodeId]]
) -> dict[NodeId, NodeId]:
    """Validate (child, parent) pairs against per-level sizes.

    Returns the child -> parent map.
    """
    num_levels = len(sizes)
    if num_levels < 1:
        raise HierarchyError("a hierarchy needs at least one level")
    if any(n < 1 for n in sizes):
        raise HierarchyError(f"every level needs at least one class, got sizes {list(sizes)}")

    def known(node: NodeId) -> bool:
        return 1 <= node.level <= num_levels and 1 <= node.index <= sizes[node.level - 1]

    parent_of: dict[NodeId, NodeId] = {}
    for child, parent in pairs:
        child, parent = NodeId(*child), NodeId(*parent)
        if not known(child) or not known(parent):
            raise HierarchyError(f"edge {child} -> {parent} references an unknown class")
        if parent.level != child.level - 1:
            raise LevelGapError(
                f"{child} has parent {parent}; parents must sit exactly one level up"
            )
        previous = parent_of.get(child)
        if previous is not None and previous != parent:
            raise MultiParentError(f"{child} has two parents: {previous} and {parent}")
        parent_of[child] = parent

    has_child = set(parent_of.values())
    for level in range(1, num_levels + 1):
        for index in range(1, sizes[level - 1] + 1):
            node = NodeId(level, index)
            if level > 1 and node not in parent_of:
                raise OrphanNodeError(f"{node} has no parent")
            if level < num_levels and node not in has_child:
                raise EmptyInteriorError(f"{node} has no children")
    return parent_of


class Hierarchy:
    """Immutable single-parent hierarchy.

    Parameters
    ----------
    labels : sequence of sequences of str
        ``labels[r - 1][s - 1]`` is the external label of ``NodeId(r, s)``.
    pairs : iterable of (NodeId, NodeId)
        ``(child, parent)`` edges. Every class below the top level needs
        exactly one parent one level up.
    """

    def __init__(
        self,
        labels: Sequence[Sequence[str]],
        pairs: Iterable[tuple[NodeId, NodeId]],
    ):
        self._labels = tuple(tuple(str(x) for x in level) for level in labels)
        sizes = [len(level) for level in self._labels]
        self._parent_of = _check_structure(sizes, pairs)
        children: dict[NodeId, list[NodeId]] = defaultdict(list)
        for child in sorted(self._parent_of):
            children[self._parent_of[child]].append(child)
        self._children_of = {k: tuple(v) for k, v in children.items()}
        self._lookup = {
            (r + 1, label): NodeId(r + 1, s + 1)
            for r, level in enumerate(self._labels)
            for s, label in enumerate(level)
        }
        if len(self._lookup) != sum(sizes):
            raise HierarchyError("labels must be unique within a level")

    # construction ---------------------------------------------------------

    @classmethod
    def from_paths(cls, paths: Iterable[Sequence[str]]) -> "Hierarchy":
        """Build from one top-down label path per leaf."""
        paths = [tuple(str(x) for x in p) for p in paths]
        if not paths:
            raise HierarchyError("no leaf paths given")
        num_levels = len(paths[0])
        if num_levels < 1 or any(len(p) != num_levels for p in paths):
            raise HierarchyError("all leaf paths must have the same positive length")

        labels: list[dict[str, int]] = [{} for _ in range(num_levels)]
        pairs: list[tuple[NodeId, NodeId]] = []
        seen_leaves: set[str] = set()
        for path in paths:
            if path[-1] in seen_leaves:
                raise DuplicateLeafError(f"leaf {path[-1]!r} appears in more than one row")
            seen_leaves.add(path[-1])
            ids = []
            for r, label in enumerate(path):
                index = labels[r].setdefault(label, len(labels[r]) + 1)
                ids.append(NodeId(r + 1, index))
            pairs.extend(zip(ids[1:], ids[:-1]))
        ordered = [sorted(level, key=level.__getitem__) for level in labels]
        return cls(ordered, pairs)

    @classmethod
    def from_children_counts(cls, counts: Sequence[Sequence[int]], n_top: int) -> "Hierarchy":
        """Build an unlabeled hierarchy from per-level child counts.

        ``counts[r - 1][s - 1]`` is the number of children of ``NodeId(r, s)``;
        children are numbered consecutively in parent order. Labels are
        ``"r.s"``.
        """
        sizes = [n_top]
        pairs = []
        for r, level_counts in enumerate(counts, start=1):
            if len(level_counts) != sizes[-1]:
                raise HierarchyError(
                    f"level {r} has {sizes[-1]} classes but {len(level_counts)} child counts"
                )
            child = 0
            for s, c in enumerate(level_counts, start=1):
                for _ in range(c):
                    child += 1
                    pairs.append((NodeId(r + 1, child), NodeId(r, s)))
            sizes.append(child)
        labels = [[f"{r}.{s}" for s in range(1, n + 1)] for r, n in enumerate(sizes, start=1)]
        return cls(labels, pairs)

    @classmethod
    def read_csv(cls, path: str | Path) -> "Hierarchy":
        """Read the leaf-per-row hierarchy file (header ``level_1..level_R``)."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise HierarchyError(f"{path}: empty hierarchy file")
            expected = [f"level_{r}" for r in range(1, len(header) + 1)]
            if [h.strip() for h in header] != expected:
                raise HierarchyError(f"{path}: header must be {','.join(expected)}")
            rows = [row for row in reader if row]
        return cls.from_paths(rows)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"level_{r}" for r in range(1, self.num_levels + 1)])
            for leaf in self.level(self.num_levels):
                writer.writerow([self.label(n) for n in self.leaf_path(leaf)])

    # queries --------------------------------------------------------------

    @property
    def num_levels(self) -> int:
        return len(self._labels)

    @property
    def sizes(self) -> tuple[int, ...]:
        """Class counts per level, ``(n_1, ..., n_R)``."""
        return tuple(len(level) for level in self._labels)

    @property
    def n_leaves(self) -> int:
        return self.sizes[-1]

    def level(self, r: int) -> list[NodeId]:
        return [NodeId(r, s) for s in range(1, len(self._labels[r - 1]) + 1)]

    def nodes(self) -> list[NodeId]:
        return [n for r in range(1, self.num_levels + 1) for n in self.level(r)]

    def label(self, node: NodeId) -> str:
        return self._labels[node.level - 1][node.index - 1]

    def labels(self, r: int) -> tuple[str, ...]:
        return self._labels[r - 1]

    def node(self, level: int, label: str) -> NodeId:
        try:
            return self._lookup[(level, str(label))]
        except KeyError:
            raise KeyError(f"no class labelled {label!r} at level {level}") from None

    def parent(self, node: NodeId) -> NodeId | None:
        return self._parent_of.get(NodeId(*node))

    def children(self, node: NodeId) -> tuple[NodeId, ...]:
        return self._children_of.get(NodeId(*node), ())

    @property
    def parent_pairs(self) -> list[tuple[NodeId, NodeId]]:
        return sorted(self._parent_of.items())

    def leaf_path(self, leaf: NodeId) -> list[NodeId]:
        """Ancestors of ``leaf`` from level 1 down to the leaf itself."""
        leaf = NodeId(*leaf)
        if leaf.level != self.num_levels or not 1 <= leaf.index <= self.n_leaves:
            raise NotALeafError(f"{leaf} is not a class at level {self.num_levels}")
        path = [leaf]
        while path[-1].level > 1:
            path.append(self._parent_of[path[-1]])
        return path[::-1]

    def ancestor(self, leaf: NodeId, r: int) -> NodeId:
        return self.leaf_path(leaf)[r - 1]

    def ancestor_index(self, r: int) -> np.ndarray:
        """0-based index at level ``r`` of every leaf's ancestor, in leaf order."""
        out = np.empty(self.n_leaves, dtype=np.int64)
        for s, leaf in enumerate(self.level(self.num_levels)):
            out[s] = self.ancestor(leaf, r).index - 1
        return out

    def leaves_under(self, node: NodeId) -> list[NodeId]:
        frontier = [NodeId(*node)]
        while frontier and frontier[0].level < self.num_levels:
            frontier = [c for n in frontier for c in self.children(n)]
        return frontier

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hierarchy):
            return NotImplemented
        return self._labels == other._labels and self._parent_of == other._parent_of

    def __hash__(self) -> int:
        return hash((self._labels, tuple(self.parent_pairs)))

    def __repr__(self) -> str:
        return f"Hierarchy(sizes={self.sizes})"


def validate(h: Hierarchy) -> None:
    """Re-check every structural invariant of ``h``; raises on violation."""
    _check_structure(h.sizes, h.parent_pairs)
    for r in range(1, h.num_levels):
        kids = [c for n in h.level(r) for c in h.children(n)]
        if sorted(kids) != h.level(r + 1):
            raise HierarchyError(f"children of level {r} do not partition level {r + 1}")


def leaf_path(h: Hierarchy, leaf: NodeId) -> list[NodeId]:
    return h.leaf_path(leaf)
