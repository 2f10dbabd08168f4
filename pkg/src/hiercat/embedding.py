"""Per-class embedding vectors and their bottom-up extension to every level."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimensionMismatchError, MissingLeafError
from .hierarchy import Hierarchy, NodeId


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Embedding vectors keyed by level.

    ``levels[r]`` is an ``(n_r, q_e)`` array whose row ``s - 1`` is the
    vector of ``NodeId(r, s)``. Levels that are absent are not covered.
    """

    q_e: int
    levels: Mapping[int, np.ndarray]

    def __post_init__(self):
        frozen = {}
        for r, arr in sorted(self.levels.items()):
            arr = np.array(arr, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != self.q_e:
                raise DimensionMismatchError(
                    f"level {r}: expected shape (n_r, {self.q_e}), got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"level {r} holds non-finite embedding entries")
            arr.setflags(write=False)
            frozen[int(r)] = arr
        object.__setattr__(self, "levels", frozen)

    @property
    def coverage(self) -> tuple[int, ...]:
        return tuple(self.levels)

    def vector(self, node: NodeId) -> np.ndarray:
        node = NodeId(*node)
        return self.levels[node.level][node.index - 1]

    def __getitem__(self, node: NodeId) -> np.ndarray:
        return self.vector(node)

    def equals(self, other: "EmbeddingTable") -> bool:
        """Bitwise equality of every stored vector."""
        return (
            self.q_e == other.q_e
            and self.coverage == other.coverage
            and all(np.array_equal(self.levels[r], other.levels[r]) for r in self.coverage)
        )

    def write_csv(self, path: str | Path, hierarchy: Hierarchy) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "index", "label", *(f"dim_{k + 1}" for k in range(self.q_e))])
            for r, arr in self.levels.items():
                for s, row in enumerate(arr, start=1):
                    label = hierarchy.label(NodeId(r, s))
                    writer.writerow([r, s, label, *(repr(float(v)) for v in row)])

    @classmethod
    def read_csv(cls, path: str | Path) -> "EmbeddingTable":
        rows: dict[int, dict[int, list[float]]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            q_e = len(header) - 3
            for rec in reader:
                if not rec:
                    continue
                rows.setdefault(int(rec[0]), {})[int(rec[1])] = [float(v) for v in rec[3:]]
        levels = {}
        for r, by_index in rows.items():
            n = max(by_index)
            if sorted(by_index) != list(range(1, n + 1)):
                raise ValueError(f"{path}: level {r} has gaps in its class indices")
            levels[r] = np.array([by_index[s] for s in range(1, n + 1)])
        return cls(q_e, levels)


def aggregate_up(leaf_table: EmbeddingTable, hierarchy: Hierarchy) -> EmbeddingTable:
    """Fill levels ``R - 1 .. 1`` with the mean of each class's children.

    The mean is unweighted and taken over direct children only, so an upper
    class is the mean of its children's means.
    """
    R = hierarchy.num_levels
    leaves = leaf_table.levels.get(R)
    if leaves is None or leaves.shape[0] != hierarchy.n_leaves:
        got = 0 if leaves is None else leaves.shape[0]
        raise MissingLeafError(
            f"leaf table must cover all {hierarchy.n_leaves} classes at level {R}, got {got}"
        )
    levels = {R: np.array(leaves)}
    for r in range(R - 1, 0, -1):
        below = levels[r + 1]
        rows = []
        for node in hierarchy.level(r):
            kids = [c.index - 1 for c in hierarchy.children(node)]
            rows.append(below[kids].mean(axis=0))
        levels[r] = np.array(rows).reshape(len(rows), leaf_table.q_e)
    return EmbeddingTable(leaf_table.q_e, dict(sorted(levels.items())))
