import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiercat.dataset import Dataset, one_hot, standardize, stratified_split
from hiercat.errors import DataFormatError, NotALeafError, ZeroVarianceError
from hiercat.hierarchy import Hierarchy, NodeId


def test_one_hot_rows_form_identity(fig2):
    rows = np.array([one_hot(leaf, fig2) for leaf in fig2.level(2)])
    np.testing.assert_array_equal(rows, np.eye(9))
    with pytest.raises(NotALeafError):
        one_hot(NodeId(1, 1), fig2)


def test_standardize_small_example(fig2):
    d = Dataset([0.0, 0.0, 0.0], [0, 1, 2], [[1.0], [2.0], [3.0]], fig2)
    out, scaler = standardize(d)
    np.testing.assert_allclose(out.x[:, 0], [-1.0, 0.0, 1.0])
    d4 = Dataset([0.0] * 3, [0] * 3, [[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]], fig2)
    with pytest.raises(ZeroVarianceError):
        standardize(d4)
    out4, _ = standardize(d4, columns=[0])
    assert out4.x[0, 1] == 5.0
    np.testing.assert_allclose(scaler.apply(d).x, out.x)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30))
def test_standardize_moments_and_idempotence(values):
    h = Hierarchy.from_children_counts([[1]], 1)
    x = np.array(values)
    if np.std(x) < 1e-3:
        return
    d = Dataset(np.zeros(len(x)), np.zeros(len(x), dtype=int), x[:, None], h)
    once, _ = standardize(d)
    assert abs(once.x.mean()) < 1e-9
    assert once.x[:, 0].std(ddof=1) == pytest.approx(1.0, abs=1e-9)
    twice, _ = standardize(once)
    np.testing.assert_allclose(twice.x, once.x, atol=1e-12)


def test_validation(fig2):
    with pytest.raises(DataFormatError):
        Dataset([1.0, np.nan], [0, 1], np.zeros((2, 0)), fig2)
    with pytest.raises(DataFormatError):
        Dataset([1.5], [0], np.zeros((1, 0)), fig2, "poisson")
    with pytest.raises(NotALeafError):
        Dataset([1.0], [9], np.zeros((1, 0)), fig2)
    with pytest.raises(DataFormatError):
        Dataset([1.0, 2.0], [0], np.zeros((2, 0)), fig2)


def test_csv_roundtrip_and_missing(tmp_path, fig2):
    d = Dataset([1.25, -3.0], [0, 8], [[0.1, 2.0], [0.3, -1.0]], fig2, covariate_names=("a", "b"))
    path = tmp_path / "d.csv"
    d.write_csv(path)
    back = Dataset.read_csv(path, fig2)
    np.testing.assert_array_equal(back.y, d.y)
    np.testing.assert_array_equal(back.x, d.x)
    np.testing.assert_array_equal(back.leaf, d.leaf)
    assert back.covariate_names == ("a", "b")

    path.write_text("y,h_leaf,a,b\n1.0,2.1,NA,3\n")
    with pytest.raises(DataFormatError):
        Dataset.read_csv(path, fig2)
    assert Dataset.read_csv(path, fig2, drop_cols=["a"]).covariate_names == ("b",)
    path.write_text("y,h_leaf\n1.0,nowhere\n")
    with pytest.raises(NotALeafError):
        Dataset.read_csv(path, fig2)


def _split_sizes(h, leaves, frac=0.8, stratum=1):
    d = Dataset(np.zeros(len(leaves)), leaves, np.zeros((len(leaves), 0)), h)
    tr, te = stratified_split(d, frac, stratum, seed=3)
    return tr.n, te.n


def test_split_counts():
    h = Hierarchy.from_children_counts([[1, 1]], 2)
    assert _split_sizes(h, [0] * 10) == (8, 2)
    assert _split_sizes(h, [0] * 5 + [1] * 5) == (8, 2)
    # a class with one observation goes entirely to training
    assert _split_sizes(h, [0] * 10 + [1]) == (9, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=60), st.floats(0.05, 0.95),
       st.integers(1, 2), st.integers(0, 1000))
def test_split_is_partition(leaves, frac, stratum, seed):
    h = Hierarchy.from_children_counts([[3, 3, 3]], 3)
    y = np.arange(len(leaves), dtype=float)
    d = Dataset(y, leaves, np.zeros((len(leaves), 0)), h)
    tr, te = stratified_split(d, frac, stratum, seed)
    assert sorted(np.concatenate([tr.y, te.y])) == list(y)
    groups = h.ancestor_index(stratum)[np.asarray(leaves)]
    assert set(groups) == set(h.ancestor_index(stratum)[tr.leaf])
