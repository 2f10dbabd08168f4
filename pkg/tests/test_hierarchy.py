import pytest
from hypothesis import given, strategies as st

from hiercat.errors import (DuplicateLeafError, EmptyInteriorError, HierarchyError, LevelGapError,
                            MultiParentError, NotALeafError, OrphanNodeError)
from hiercat.hierarchy import Hierarchy, NodeId, leaf_path, validate


def test_fig2_shape(fig2):
    assert fig2.sizes == (3, 9)
    assert fig2.num_levels == 2
    assert fig2.labels(2)[0] == "2.1"
    assert fig2.children(NodeId(1, 2)) == (NodeId(2, 4), NodeId(2, 5), NodeId(2, 6))
    assert fig2.parent(NodeId(2, 7)) == NodeId(1, 3)
    assert fig2.parent(NodeId(1, 1)) is None
    validate(fig2)


def test_leaf_path(fig2):
    assert leaf_path(fig2, NodeId(2, 5)) == [NodeId(1, 2), NodeId(2, 5)]
    with pytest.raises(NotALeafError):
        leaf_path(fig2, NodeId(1, 1))
    with pytest.raises(NotALeafError):
        leaf_path(fig2, NodeId(2, 10))


def test_three_level_paths():
    h = Hierarchy.from_paths([("a", "a1", "x"), ("a", "a1", "y"), ("a", "a2", "z"), ("b", "b1", "w")])
    assert h.sizes == (2, 3, 4)
    assert [h.label(n) for n in h.leaf_path(h.node(3, "z"))] == ["a", "a2", "z"]
    assert h.ancestor(h.node(3, "w"), 1) == h.node(1, "b")
    assert list(h.ancestor_index(1)) == [0, 0, 0, 1]
    assert h.leaves_under(h.node(1, "a")) == [NodeId(3, 1), NodeId(3, 2), NodeId(3, 3)]


def test_structural_errors():
    with pytest.raises(MultiParentError):
        Hierarchy([["a", "b"], ["c"]], [(NodeId(2, 1), NodeId(1, 1)), (NodeId(2, 1), NodeId(1, 2))])
    with pytest.raises(OrphanNodeError):
        Hierarchy([["a"], ["b", "c"]], [(NodeId(2, 1), NodeId(1, 1))])
    with pytest.raises(EmptyInteriorError):
        Hierarchy([["a", "b"], ["c"]], [(NodeId(2, 1), NodeId(1, 1))])
    with pytest.raises(LevelGapError):
        Hierarchy([["a"], ["b"], ["c"]], [(NodeId(2, 1), NodeId(1, 1)), (NodeId(3, 1), NodeId(1, 1))])
    with pytest.raises(DuplicateLeafError):
        Hierarchy.from_paths([("a", "x"), ("b", "x")])
    with pytest.raises(MultiParentError):
        Hierarchy.from_paths([("a", "m", "x"), ("b", "m", "y")])
    with pytest.raises(HierarchyError):
        Hierarchy.from_paths([("a", "x"), ("a",)])


def test_csv_roundtrip(tmp_path, fig2):
    path = tmp_path / "h.csv"
    fig2.write_csv(path)
    assert path.read_text().splitlines()[0] == "level_1,level_2"
    assert Hierarchy.read_csv(path) == fig2


def test_bad_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("top,leaf\na,b\n")
    with pytest.raises(HierarchyError):
        Hierarchy.read_csv(path)


@st.composite
def child_counts(draw):
    n_top = draw(st.integers(1, 4))
    counts, width = [], n_top
    for _ in range(draw(st.integers(0, 3))):
        level = draw(st.lists(st.integers(1, 3), min_size=width, max_size=width))
        counts.append(level)
        width = sum(level)
    return counts, n_top


@given(child_counts())
def test_children_partition_next_level(spec):
    counts, n_top = spec
    h = Hierarchy.from_children_counts(counts, n_top)
    validate(h)
    for r in range(1, h.num_levels):
        assert sum(len(h.children(n)) for n in h.level(r)) == h.sizes[r]
    for leaf in h.level(h.num_levels):
        path = h.leaf_path(leaf)
        assert [n.level for n in path] == list(range(1, h.num_levels + 1))
        assert all(h.parent(c) == p for p, c in zip(path, path[1:]))
