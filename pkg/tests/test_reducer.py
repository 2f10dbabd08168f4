import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import toy_table
from hiercat.embedding import EmbeddingTable, aggregate_up
from hiercat.errors import MissingLeafError
from hiercat.hierarchy import Hierarchy, NodeId
from hiercat.reducer import ReducedId, reduce, structure_key, write_trace


def labels(h, nodes):
    return sorted(h.label(n) for n in nodes)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_toy_example(seed):
    h, table = toy_table(np.random.default_rng(seed))
    red, trace = reduce(h, table, si_star=0.5)
    assert red.sizes == (2, 2)
    top = red.classes[1]
    assert [labels(h, c.members) for c in top] == [["1.1", "1.2"], ["1.3"]]
    assert [labels(h, c.members) for c in red.classes[2]] == [["2.1", "2.2", "2.4", "2.5"],
                                                              ["2.3", "2.6"]]
    assert red.children[top[0].id] == [ReducedId(2, 1), ReducedId(2, 2)]
    assert top[1].id not in red.children
    # 1.3's children were folded into it
    assert [labels(h, f.members) for f in red.pseudoclusters[2]] == [["2.7", "2.8", "2.9"]]
    np.testing.assert_array_equal(red.pseudoclusters[2][0].embedding, top[1].embedding)
    assert {str(red.leaf_group[h.node(2, f"2.{s}")]) for s in (7, 8, 9)} == {"1.2"}
    vertical = [t for t in trace if t["step"] == "vertical"]
    assert [t["veto"] for t in vertical] == [True, False]
    assert vertical[1]["collapsed"] == ["2.7", "2.8", "2.9"]


def test_identical_embeddings_collapse_fully(fig2):
    table = aggregate_up(EmbeddingTable(2, {2: np.ones((9, 2))}), fig2)
    red, _ = reduce(fig2, table, 0.7)
    assert red.sizes == (1,)
    assert red.n_groups == 1


def test_threshold_one_collapses_generic_embeddings(fig2, rng):
    table = aggregate_up(EmbeddingTable(2, {2: rng.normal(size=(9, 2))}), fig2)
    red, _ = reduce(fig2, table, 1.0)
    assert red.sizes == (1,) and red.n_groups == 1


def _single_parent_table(parent):
    h = Hierarchy.from_children_counts([[4]], 1)
    kids = np.array([[0.0], [0.1], [10.0], [10.1]])
    return h, EmbeddingTable(1, {1: [[parent]], 2: kids})


def test_parent_least_similar_vetoes_collapse():
    h, table = _single_parent_table(2.0)
    red, trace = reduce(h, table, 0.7)
    vertical = trace[1]
    # the parent joins {0, 0.1} but is the worst-fitting member of that cluster
    assert vertical["cluster_with_parent"] == ["2.1", "2.2"]
    assert vertical["veto"] is True and vertical["collapsed"] == []
    assert red.sizes == (1, 2)
    assert [labels(h, c.members) for c in red.classes[2]] == [["2.1", "2.2"], ["2.3", "2.4"]]


def test_parent_alone_does_not_collapse():
    h, table = _single_parent_table(100.0)
    red, trace = reduce(h, table, 0.7)
    assert trace[1]["cluster_with_parent"] == [] and trace[1]["collapsed"] == []
    assert red.sizes == (1, 2)


def test_parent_collapses_the_children_it_clusters_with():
    h, table = _single_parent_table(0.05)
    red, trace = reduce(h, table, 0.7)
    assert trace[1]["collapsed"] == ["2.1", "2.2"]
    assert [labels(h, c.members) for c in red.classes[2]] == [["2.3", "2.4"]]
    assert red.n_groups == 2


def test_missing_level_rejected(fig2):
    with pytest.raises(MissingLeafError):
        reduce(fig2, EmbeddingTable(2, {2: np.zeros((9, 2))}), 0.5)
    table = aggregate_up(EmbeddingTable(2, {2: np.zeros((9, 2))}), fig2)
    with pytest.raises(ValueError):
        reduce(fig2, table, 1.5)


def test_trace_is_json_lines(tmp_path):
    h, table = toy_table(np.random.default_rng(0))
    _, trace = reduce(h, table, 0.5)
    path = tmp_path / "steps.jsonl"
    write_trace(path, trace)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["step"] for r in rows] == ["horizontal", "vertical", "vertical",
                                         "horizontal", "horizontal"]
    assert rows[0]["k_star"] == 2


def three_level():
    return Hierarchy.from_children_counts([[2, 3], [2, 1, 3, 2, 2]], 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
def test_structural_invariants(seed, si_star):
    h = three_level()
    rng = np.random.default_rng(seed)
    # a few well-separated locations so that merges actually happen
    centres = rng.normal(scale=5.0, size=(3, 2))
    leaves = centres[rng.integers(0, 3, size=h.n_leaves)] + rng.normal(scale=0.2, size=(h.n_leaves, 2))
    table = aggregate_up(EmbeddingTable(2, {3: leaves}), h)
    red, trace = reduce(h, table, si_star, seed=seed % 7)

    # conservation: each original class is in exactly one cluster or pseudocluster
    for r in range(1, h.num_levels + 1):
        seen = [m for c in red.classes.get(r, []) for m in c.members]
        seen += [m for f in red.pseudoclusters.get(r, []) for m in f.members]
        assert sorted(seen) == h.level(r)
    assert all(c.members for cs in red.classes.values() for c in cs)
    for cs in red.classes.values():
        for c in cs:
            np.testing.assert_allclose(c.embedding,
                                       np.mean([table.vector(m) for m in c.members], axis=0))

    # sizes never grow and the grouping covers every leaf
    assert len(red.sizes) <= h.num_levels
    assert all(a <= b for a, b in zip(red.sizes, h.sizes))
    assert set(red.leaf_group) == set(h.level(3))

    # leaves in the same group share their reduced path
    def reduced_path(leaf):
        owner = {m: c.id for cs in red.classes.values() for c in cs for m in c.members}
        return [owner[n] for n in h.leaf_path(leaf) if n in owner]

    by_group = {}
    for leaf, g in red.leaf_group.items():
        by_group.setdefault(g, set()).add(tuple(reduced_path(leaf)))
    assert all(len(paths) == 1 for paths in by_group.values())

    # determinism and a label-free fingerprint
    again, trace2 = reduce(h, table, si_star, seed=seed % 7)
    assert again.key() == red.key() and trace2 == trace
    assert red.same_structure(again)
    assert structure_key(h, red.member_sets()) == red.key()


def test_json_outputs(tmp_path):
    h, table = toy_table(np.random.default_rng(1))
    red, _ = reduce(h, table, 0.5)
    red.write_json(tmp_path / "r.json")
    red.write_groups_csv(tmp_path / "g.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["sizes"] == [2, 2]
    assert doc["leaf_group"]["2.9"] == "1.2"
    assert len((tmp_path / "g.csv").read_text().splitlines()) == 10
