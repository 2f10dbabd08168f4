"""Observations bound to a hierarchy: loading, encoding, scaling, splitting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, NotALeafError, ZeroVarianceError
from .hierarchy import Hierarchy, NodeId

RESPONSE_KINDS = ("gaussian", "poisson")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response, leaf class and numeric covariates per observation.

    ``leaf`` holds 0-based positions within the leaf level of ``hierarchy``.
    """

    y: np.ndarray
    leaf: np.ndarray
    x: np.ndarray
    hierarchy: Hierarchy
    response_kind: str = "gaussian"
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        leaf = np.asarray(self.leaf, dtype=np.int64).ravel()
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(len(y), -1) if len(y) else x.reshape(0, 0)
        if not (len(y) == len(leaf) == x.shape[0]):
            raise DataFormatError(
                f"length mismatch: y={len(y)}, leaf={len(leaf)}, x rows={x.shape[0]}"
            )
        if len(leaf) and (leaf.min() < 0 or leaf.max() >= self.hierarchy.n_leaves):
            raise NotALeafError("leaf index outside the hierarchy's leaf level")
        if self.response_kind not in RESPONSE_KINDS:
            raise DataFormatError(f"response_kind must be one of {RESPONSE_KINDS}")
        if not np.all(np.isfinite(y)):
            raise DataFormatError("response contains missing or non-finite values")
        if self.response_kind == "poisson" and (
            np.any(y < 0) or np.any(y != np.round(y))
        ):
            raise DataFormatError("poisson responses must be nonnegative integers")
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataFormatError("covariate_names does not match the covariate width")
        for arr in (y, leaf, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "leaf", leaf)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, y=self.y[rows], leaf=self.leaf[rows], x=self.x[rows])

    def leaf_nodes(self) -> list[NodeId]:
        R = self.hierarchy.num_levels
        return [NodeId(R, int(s) + 1) for s in self.leaf]

    # io -------------------------------------------------------------------

    @classmethod
    def read_csv(
        cls,
        path: str | Path,
        hierarchy: Hierarchy,
        response_kind: str = "gaussian",
        drop_cols: Iterable[str] = (),
    ) -> "Dataset":
        """Load a data file with columns ``y``, ``h_leaf`` and numeric covariates.

        Covariate columns with missing entries must be listed in ``drop_cols``.
        """
        drop = {c.strip() for c in drop_cols if c.strip()}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for required in ("y", "h_leaf"):
                if required not in header:
                    raise DataFormatError(f"{path}: missing required column {required!r}")
            unknown = drop - set(header)
            if unknown:
                raise DataFormatError(f"{path}: cannot drop unknown columns {sorted(unknown)}")
            cov_names = [c for c in header if c not in ("y", "h_leaf") and c not in drop]
            ys, leaves, xs = [], [], []
            R = hierarchy.num_levels
            for lineno, row in enumerate(reader, start=2):
                if row["y"] is None or row["y"].strip() == "":
                    raise DataFormatError(f"{path}:{lineno}: missing response")
                ys.append(float(row["y"]))
                try:
                    leaves.append(hierarchy.node(R, row["h_leaf"]).index - 1)
                except KeyError:
                    raise NotALeafError(
                        f"{path}:{lineno}: leaf {row['h_leaf']!r} not in hierarchy"
                    ) from None
                vals = []
                for c in cov_names:
                    v = row[c]
                    if v is None or v.strip() == "" or v.strip().lower() == "na":
                        raise DataFormatError(
                            f"{path}:{lineno}: missing value in {c!r}; drop it with --drop-cols"
                        )
                    vals.append(float(v))
                xs.append(vals)
        x = np.array(xs, dtype=float).reshape(len(ys), len(cov_names))
        return cls(np.array(ys), np.array(leaves, dtype=np.int64), x, hierarchy,
                   response_kind, tuple(cov_names))

    def write_csv(self, path: str | Path) -> None:
        labels = self.hierarchy.labels(self.hierarchy.num_levels)
        integer_y = self.response_kind == "poisson"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "h_leaf", *self.covariate_names])
            for i in range(self.n):
                y = int(self.y[i]) if integer_y else repr(float(self.y[i]))
                writer.writerow([y, labels[self.leaf[i]], *(repr(float(v)) for v in self.x[i])])


def one_hot(leaf: NodeId, hierarchy: Hierarchy) -> np.ndarray:
    """Indicator vector of length ``n_R`` with a single one at the leaf's position."""
    leaf = NodeId(*leaf)
    if leaf.level != hierarchy.num_levels or not 1 <= leaf.index <= hierarchy.n_leaves:
        raise NotALeafError(f"{leaf} is not a leaf of {hierarchy!r}")
    out = np.zeros(hierarchy.n_leaves)
    out[leaf.index - 1] = 1.0
    return out


@dataclass(frozen=True)
class Standardizer:
    columns: tuple[int, ...]
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, d: Dataset) -> Dataset:
        x = d.x.copy()
        cols = list(self.columns)
        x[:, cols] = (x[:, cols] - self.mean) / self.sd
        return replace(d, x=x)


def standardize(d: Dataset, columns: Sequence[int] | None = None) -> tuple[Dataset, Standardizer]:
    """Center and scale covariate columns to mean 0, sd 1 (n - 1 denominator).

    Returns the transformed dataset and the fitted ``Standardizer`` so the
    same transform can be applied to held-out data.
    """
    cols = tuple(range(d.p)) if columns is None else tuple(sorted(set(columns)))
    sub = d.x[:, list(cols)]
    mean = sub.mean(axis=0)
    sd = sub.std(axis=0, ddof=1) if d.n > 1 else np.zeros(len(cols))
    bad = [d.covariate_names[c] for c, s in zip(cols, sd) if not s > 0]
    if bad:
        raise ZeroVarianceError(f"columns with zero variance: {bad}")
    scaler = Standardizer(cols, mean, sd)
    return scaler.apply(d), scaler


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def stratified_split(
    d: Dataset, frac_train: float, stratum: int, seed: int
) -> tuple[Dataset, Dataset]:
    """Split within each class of level ``stratum``.

    Each class sends ``round(frac_train * count)`` observations to the
    training set, and at least one.
    """
    if not 0 < frac_train < 1:
        raise ValueError("frac_train must lie strictly between 0 and 1")
    h = d.hierarchy
    if not 1 <= stratum <= h.num_levels:
        raise ValueError(f"stratum must be a level in 1..{h.num_levels}")
    group = h.ancestor_index(stratum)[d.leaf]
    rng = np.random.default_rng(seed)
    train_rows = []
    for g in np.unique(group):
        rows = np.flatnonzero(group == g)
        k = min(len(rows), max(1, _round_half_up(frac_train * len(rows))))
        train_rows.append(rng.permutation(rows)[:k])
    train = np.sort(np.concatenate(train_rows)) if train_rows else np.array([], dtype=int)
    mask = np.zeros(d.n, dtype=bool)
    mask[train] = True
    return d.subset(np.flatnonzero(mask)), d.subset(np.flatnonzero(~mask))
