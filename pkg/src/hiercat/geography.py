"""US census geography and a synthetic county-level dataset shaped like ``cancer_reg``.

The real county data is an external input. This module provides a
stand-in with the same layout (one row per county, a region / division /
state hierarchy, numeric socio-economic covariates, three of them with
missing entries) so the evaluation workflow can be run and tested without
it. Effects are planted at the region level, with a few states departing
from their region, so the reduction has something to find.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .hierarchy import Hierarchy

# region -> division -> states (census definitions, District of Columbia included)
CENSUS = {
    "Northeast": {
        "New England": ("Connecticut", "Maine", "Massachusetts", "New Hampshire",
                        "Rhode Island", "Vermont"),
        "Middle Atlantic": ("New Jersey", "New York", "Pennsylvania"),
    },
    "Midwest": {
        "East North Central": ("Illinois", "Indiana", "Michigan", "Ohio", "Wisconsin"),
        "West North Central": ("Iowa", "Kansas", "Minnesota", "Missouri", "Nebraska",
                               "North Dakota", "South Dakota"),
    },
    "South": {
        "South Atlantic": ("Delaware", "District of Columbia", "Florida", "Georgia", "Maryland",
                           "North Carolina", "South Carolina", "Virginia", "West Virginia"),
        "East South Central": ("Alabama", "Kentucky", "Mississippi", "Tennessee"),
        "West South Central": ("Arkansas", "Louisiana", "Oklahoma", "Texas"),
    },
    "West": {
        "Mountain": ("Arizona", "Colorado", "Idaho", "Montana", "Nevada", "New Mexico",
                     "Utah", "Wyoming"),
        "Pacific": ("Alaska", "California", "Hawaii", "Oregon", "Washington"),
    },
}

COVARIATES = ("medincome", "povertypercent", "studypercap", "medianage", "pctbachdeg25_over",
              "pcths25_over", "pctunemployed16_over", "pctpubliccoverage", "pctwhite",
              "birthrate")
# present in the real data with gaps; the workflow drops them
WITH_GAPS = ("pctsomecol18_24", "pctemployed16_over", "pctprivatecoveragealone")

REGION_EFFECT = {"Northeast": -8.0, "Midwest": 6.0, "South": 10.0, "West": -10.0}
STATE_EFFECT = {"Kentucky": 14.0, "Utah": -14.0, "Hawaii": -10.0, "Mississippi": 9.0}


def us_geography() -> Hierarchy:
    """Region (4), division (9) and state (51) as a three-level hierarchy."""
    paths = [(region, division, state)
             for region, divisions in CENSUS.items()
             for division, states in divisions.items()
             for state in states]
    return Hierarchy.from_paths(paths)


def synthetic_cancer_reg(seed: int = 0, n_counties: int = 3047, noise_sd: float = 18.0):
    """County rows as a list of dicts plus the hierarchy.

    Each row has ``y`` (deaths per 100 000), ``h_leaf`` (state) and the
    covariates; ``WITH_GAPS`` columns hold ``None`` for about 5% of rows.
    """
    rng = np.random.default_rng(seed)
    h = us_geography()
    states = list(h.labels(3))
    region_of = {s: h.label(h.ancestor(h.node(3, s), 1)) for s in states}
    weights = rng.gamma(2.0, 1.0, size=len(states))
    counts = 3 + rng.multinomial(n_counties - 3 * len(states), weights / weights.sum())
    leaf = np.repeat(np.arange(len(states)), counts)
    n = len(leaf)

    x = rng.standard_normal((n, len(COVARIATES)))
    beta = np.array([-6.0, 5.0, 0.0, 1.0, -7.0, 3.0, 2.0, 4.0, 0.5, 0.0])
    effect = np.array([REGION_EFFECT[region_of[s]] + STATE_EFFECT.get(s, 0.0) for s in states])
    y = 178.0 + effect[leaf] + x @ beta + rng.normal(0.0, noise_sd, size=n)

    scale = {"medincome": (47000, 12000), "povertypercent": (16.9, 6.4),
             "studypercap": (155, 530), "medianage": (40.8, 5.3),
             "pctbachdeg25_over": (13.3, 5.4), "pcths25_over": (34.8, 7.0),
             "pctunemployed16_over": (7.9, 3.5), "pctpubliccoverage": (36.3, 7.8),
             "pctwhite": (83.6, 16.4), "birthrate": (5.6, 1.99)}
    gaps = rng.normal(size=(n, len(WITH_GAPS))) * 5.0 + 40.0
    missing = rng.random((n, len(WITH_GAPS))) < 0.05
    rows = []
    for i in range(n):
        row = {"y": float(y[i]), "h_leaf": states[leaf[i]]}
        for j, name in enumerate(COVARIATES):
            mu, sd = scale[name]
            row[name] = float(mu + sd * x[i, j])
        for j, name in enumerate(WITH_GAPS):
            row[name] = None if missing[i, j] else float(gaps[i, j])
        rows.append(row)
    return rows, h


def write_synthetic_cancer_reg(directory: str | Path, seed: int = 0, **kwargs) -> tuple[Path, Path]:
    """Write ``cancer_reg.csv`` and ``geography.csv``; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows, h = synthetic_cancer_reg(seed, **kwargs)
    data_path = directory / "cancer_reg.csv"
    fields = ["y", "h_leaf", *COVARIATES, *WITH_GAPS]
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for row in rows:
            w.writerow(["NA" if row[f] is None else (row[f] if f == "h_leaf" else repr(row[f]))
                        for f in fields])
    hier_path = directory / "geography.csv"
    h.write_csv(hier_path)
    return data_path, hier_path
