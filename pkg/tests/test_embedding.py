import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hiercat.embedding import EmbeddingTable, aggregate_up
from hiercat.errors import DimensionMismatchError, MissingLeafError
from hiercat.hierarchy import Hierarchy, NodeId


def test_two_leaf_mean():
    h = Hierarchy.from_children_counts([[2]], 1)
    t = aggregate_up(EmbeddingTable(2, {2: [[1.0, 2.0], [3.0, 4.0]]}), h)
    np.testing.assert_array_equal(t.vector(NodeId(1, 1)), [2.0, 3.0])
    assert t.coverage == (1, 2)


def test_mean_of_means_not_weighted():
    h = Hierarchy.from_children_counts([[2], [1, 3]], 1)
    t = aggregate_up(EmbeddingTable(1, {3: [[0.0], [4.0], [4.0], [4.0]]}), h)
    assert t[NodeId(2, 1)][0] == 0.0
    assert t[NodeId(2, 2)][0] == 4.0
    assert t[NodeId(1, 1)][0] == 2.0


def test_errors(fig2):
    with pytest.raises(MissingLeafError):
        aggregate_up(EmbeddingTable(2, {2: np.zeros((3, 2))}), fig2)
    with pytest.raises(DimensionMismatchError):
        EmbeddingTable(2, {2: np.zeros((9, 3))})


leaf_arrays = arrays(np.float64, (9, 2), elements=st.floats(-100, 100))


@settings(max_examples=50, deadline=None)
@given(leaf_arrays, arrays(np.float64, 2, elements=st.floats(-100, 100)))
def test_translation_equivariant(leaves, shift):
    h = Hierarchy.from_children_counts([[3, 3, 3]], 3)
    a = aggregate_up(EmbeddingTable(2, {2: leaves}), h)
    b = aggregate_up(EmbeddingTable(2, {2: leaves + shift}), h)
    np.testing.assert_allclose(b.levels[1], a.levels[1] + shift, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(leaf_arrays)
def test_idempotent(leaves):
    h = Hierarchy.from_children_counts([[3, 3, 3]], 3)
    once = aggregate_up(EmbeddingTable(2, {2: leaves}), h)
    assert aggregate_up(once, h).equals(once)


def test_csv_roundtrip(tmp_path, fig2, rng):
    t = aggregate_up(EmbeddingTable(3, {2: rng.normal(size=(9, 3))}), fig2)
    path = tmp_path / "e.csv"
    t.write_csv(path, fig2)
    assert EmbeddingTable.read_csv(path).equals(t)
