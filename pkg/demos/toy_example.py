"""Reduce a small two-level hierarchy from hand-placed embeddings.

Three top-level classes each have three children. The children of the
first two parents sit at two locations (A and B), shared across the two
parents, while the children of the third parent sit tightly around it,
far away from everything else. The reducer should

* merge the first two parents,
* keep their children apart from them (the merged parent is the odd one
  out in its own cluster) and regroup those children into {A} and {B},
* fold the third parent's children back into it.

Run with ``python demos/toy_example.py``.
"""
import numpy as np

from hiercat.embedding import EmbeddingTable, aggregate_up
from hiercat.hierarchy import Hierarchy
from hiercat.reducer import reduce

A, B, C = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([6.0, 4.0])


def main():
    h = Hierarchy.from_children_counts([[3, 3, 3]], 3)
    angles = np.array([0.0, 2.0, 4.0]) * np.pi / 3.0
    around_c = C + 0.3 * np.column_stack([np.cos(angles), np.sin(angles)])
    leaves = np.vstack([A, A, B, A, A, B, around_c])
    leaves += np.random.default_rng(0).normal(scale=0.005, size=leaves.shape)

    table = aggregate_up(EmbeddingTable(2, {2: leaves}), h)
    print("class embeddings")
    for node in h.nodes():
        print(f"  {h.label(node):>4}  {table.vector(node).round(3)}")

    # a level with three items and one singleton cluster has a silhouette of
    # at most 2/3, so the threshold must sit below that for level 1 to split
    reduced, trace = reduce(h, table, si_star=0.5)

    print("\ndecisions")
    for step in trace:
        what = step["step"]
        line = f"  {what:<10} level {step['level']} unit {step.get('unit_id')}: K*={step['k_star']}"
        if what == "vertical":
            line += f", with parent {step['cluster_with_parent']}, veto={step['veto']}"
        print(line)

    print("\nreduced structure, sizes", reduced.sizes)
    for r, classes in reduced.classes.items():
        for c in classes:
            print(f"  {c.id}: {[h.label(m) for m in c.members]}  (parent {c.parent})")
    print("leaf groups:", {h.label(leaf): str(g) for leaf, g in reduced.leaf_group.items()})


if __name__ == "__main__":
    main()
