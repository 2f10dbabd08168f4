import csv

import pytest

from hiercat.dataset import Dataset
from hiercat.errors import DataFormatError
from hiercat.geography import COVARIATES, WITH_GAPS, synthetic_cancer_reg, us_geography, \
    write_synthetic_cancer_reg
from hiercat.hierarchy import validate


def test_census_hierarchy():
    h = us_geography()
    validate(h)
    assert h.sizes == (4, 9, 51)
    assert h.label(h.ancestor(h.node(3, "Kentucky"), 2)) == "East South Central"
    assert h.label(h.ancestor(h.node(3, "District of Columbia"), 1)) == "South"


def test_synthetic_rows():
    rows, h = synthetic_cancer_reg(seed=1, n_counties=500)
    assert len(rows) == 500
    assert {r["h_leaf"] for r in rows} == set(h.labels(3))
    assert all(r[c] is not None for r in rows for c in COVARIATES)
    assert any(r[c] is None for r in rows for c in WITH_GAPS)
    again, _ = synthetic_cancer_reg(seed=1, n_counties=500)
    assert again == rows


def test_written_file_needs_gap_columns_dropped(tmp_path):
    data, hier = write_synthetic_cancer_reg(tmp_path, seed=0, n_counties=400)
    h = us_geography()
    with open(data, newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:2] == ["y", "h_leaf"]
    with pytest.raises(DataFormatError):
        Dataset.read_csv(data, h)
    d = Dataset.read_csv(data, h, drop_cols=WITH_GAPS)
    assert d.n == 400 and d.covariate_names == COVARIATES
