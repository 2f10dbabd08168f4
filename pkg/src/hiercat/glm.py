"""Gaussian and Poisson GLMs on grouped leaf classes, with AIC / BIC / RMSE."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .dataset import Dataset
from .errors import (
    DegenerateFitError,
    IrlsDivergedError,
    NotASiblingError,
    RankDeficientError,
    UnmappedLeafError,
)
from .hierarchy import Hierarchy, NodeId

FAMILIES = {"gaussian": "identity", "poisson": "log"}


# coding --------------------------------------------------------------------

def effect_code(hierarchy: Hierarchy | None, sibling_set: Sequence[NodeId], value: NodeId) -> np.ndarray:
    """Sum-to-zero coding of ``value`` within an ordered sibling set.

    Entry ``k`` is 1 when ``value`` is the k-th sibling; every entry is -1
    when it is the last sibling. The row has ``len(sibling_set) - 1`` entries.
    """
    sibs = [NodeId(*s) for s in sibling_set]
    value = NodeId(*value)
    if value not in sibs:
        raise NotASiblingError(f"{value} is not in the sibling set {[str(s) for s in sibs]}")
    if hierarchy is not None and len(sibs) > 1:
        parents = {hierarchy.parent(s) for s in sibs}
        if len(parents) != 1:
            raise NotASiblingError("sibling_set mixes children of different parents")
    row = np.zeros(len(sibs) - 1)
    pos = sibs.index(value)
    if pos == len(sibs) - 1:
        row[:] = -1.0
    else:
        row[pos] = 1.0
    return row


def sibling_sets(hierarchy: Hierarchy, r: int) -> list[tuple[NodeId, ...]]:
    """Ordered sibling sets at level ``r``; level 1 forms a single set."""
    if r == 1:
        return [tuple(hierarchy.level(1))]
    return [hierarchy.children(p) for p in hierarchy.level(r - 1)]


def effect_design(hierarchy: Hierarchy) -> tuple[np.ndarray, list[NodeId]]:
    """Effect-coded indicators of every level, one row per leaf.

    Returns the ``(n_R, sum(dim - 1))`` matrix and the class owning each
    column (every sibling except the last one of its set).
    """
    leaves = hierarchy.level(hierarchy.num_levels)
    paths = [hierarchy.leaf_path(leaf) for leaf in leaves]
    blocks, columns = [], []
    for r in range(1, hierarchy.num_levels + 1):
        for sibs in sibling_sets(hierarchy, r):
            if len(sibs) < 2:
                continue
            block = np.zeros((len(leaves), len(sibs) - 1))
            for i, path in enumerate(paths):
                if path[r - 1] in sibs:
                    block[i] = effect_code(None, sibs, path[r - 1])
            blocks.append(block)
            columns.extend(sibs[:-1])
    X = np.hstack(blocks) if blocks else np.zeros((len(leaves), 0))
    return X, columns


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    matrix: np.ndarray
    columns: tuple[str, ...]
    coding: str = "dummy"
    reference_info: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.matrix, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError("one column label per design column required")
        object.__setattr__(self, "matrix", X)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def check_rank(self) -> None:
        X = self.matrix
        if X.shape[1] == 0:
            return
        _, R, piv = linalg.qr(X, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(X.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
        rank = int(np.sum(diag > tol))
        if rank < X.shape[1]:
            bad = [self.columns[j] for j in sorted(piv[rank:])]
            raise RankDeficientError(f"design is rank deficient; aliased columns: {bad}")


class GroupedDesign:
    """Builds dummy-coded designs for a fixed leaf -> group map.

    Groups are ordered by sorting their keys; the first is the reference.
    The same builder must be used for training and test data so that the
    columns line up.
    """

    def __init__(self, grouping: Mapping[NodeId, Hashable], hierarchy: Hierarchy,
                 covariates: bool = True):
        self.hierarchy = hierarchy
        self.covariates = covariates
        R = hierarchy.num_levels
        self._group_of: dict[int, Hashable] = {}
        for leaf, g in grouping.items():
            leaf = NodeId(*leaf) if isinstance(leaf, tuple) else NodeId(R, int(leaf) + 1)
            self._group_of[leaf.index - 1] = g
        self.groups = sorted(set(self._group_of.values()))
        self._code = {g: i for i, g in enumerate(self.groups)}

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def codes(self, d: Dataset) -> np.ndarray:
        try:
            return np.array([self._code[self._group_of[int(s)]] for s in d.leaf], dtype=np.int64)
        except KeyError as exc:
            label = d.hierarchy.label(NodeId(d.hierarchy.num_levels, int(exc.args[0]) + 1)) \
                if isinstance(exc.args[0], (int, np.integer)) else exc.args[0]
            raise UnmappedLeafError(f"leaf {label!r} has no group") from None

    def __call__(self, d: Dataset) -> DesignMatrix:
        codes = self.codes(d)
        cols = [np.ones(d.n)]
        names = ["(intercept)"]
        if self.covariates:
            cols.extend(d.x.T)
            names.extend(d.covariate_names)
        for g in self.groups[1:]:
            cols.append((codes == self._code[g]).astype(float))
            names.append(f"group[{_group_name(g)}]")
        X = np.column_stack(cols) if cols else np.zeros((d.n, 0))
        return DesignMatrix(X, tuple(names), "dummy",
                            {"reference": _group_name(self.groups[0]), "groups": len(self.groups)})


def _group_name(g) -> str:
    if isinstance(g, NodeId):
        return f"{g.level}.{g.index}"
    if isinstance(g, tuple):
        return ".".join(str(v) for v in g)
    return str(g)


def grouped_design(d: Dataset, grouping: Mapping[NodeId, Hashable], coding: str = "dummy",
                   covariates: bool = True) -> DesignMatrix:
    """Intercept, covariates and one dummy per group except the reference."""
    if coding != "dummy":
        raise ValueError("evaluation designs use dummy coding")
    return GroupedDesign(grouping, d.hierarchy, covariates)(d)


def identity_grouping(hierarchy: Hierarchy) -> dict[NodeId, NodeId]:
    return {leaf: leaf for leaf in hierarchy.level(hierarchy.num_levels)}


# fitting -------------------------------------------------------------------

@dataclass
class GlmFit:
    family: str
    coefficients: np.ndarray
    columns: tuple[str, ...]
    log_likelihood: float
    n: int
    dispersion: float | None = None
    iterations: int = 0
    converged: bool = True

    @property
    def link(self) -> str:
        return FAMILIES[self.family]

    @property
    def k_params(self) -> int:
        return len(self.coefficients) + (1 if self.family == "gaussian" else 0)

    @property
    def aic(self) -> float:
        return 2.0 * self.k_params - 2.0 * self.log_likelihood

    @property
    def bic(self) -> float:
        return self.k_params * math.log(self.n) - 2.0 * self.log_likelihood

    def predict(self, design: DesignMatrix | np.ndarray) -> np.ndarray:
        X = design.matrix if isinstance(design, DesignMatrix) else np.asarray(design, float)
        eta = X @ self.coefficients
        return np.exp(eta) if self.family == "poisson" else eta

    def to_dict(self, rmse_test: float | None = None) -> dict:
        return {
            "family": self.family,
            "link": self.link,
            "n": self.n,
            "k_params": self.k_params,
            "logL": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
            "rmse_test": rmse_test,
            "dispersion": self.dispersion,
            "coefficients": [
                {"term": name, "estimate": float(b)}
                for name, b in zip(self.columns, self.coefficients)
            ],
        }


def _solve_ls(X: np.ndarray, z: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    if w is not None:
        sw = np.sqrt(w)
        X, z = X * sw[:, None], z * sw
    Q, R = linalg.qr(X, mode="economic")
    return linalg.solve_triangular(R, Q.T @ z)


def poisson_loglik(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def fit(family: str, y, design: DesignMatrix, tol: float = 1e-10, max_iter: int = 50) -> GlmFit:
    """Maximum likelihood fit.

    Gaussian uses least squares with dispersion ``RSS / n``; Poisson uses
    IRLS with the log link until the largest coefficient change is below
    ``tol`` or ``max_iter`` iterations have run.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {sorted(FAMILIES)}")
    y = np.asarray(y, dtype=float).ravel()
    X = design.matrix
    n, p = X.shape
    if len(y) != n:
        raise ValueError("response and design have different lengths")
    if n < p:
        raise RankDeficientError(f"{n} observations cannot identify {p} coefficients")
    design.check_rank()

    if family == "gaussian":
        beta = _solve_ls(X, y)
        resid = y - X @ beta
        sigma2 = float(resid @ resid) / n
        if not sigma2 > 1e-14 * max(1.0, float(np.mean(y * y))):
            raise DegenerateFitError("residual variance is zero; the model interpolates the data")
        loglik = -0.5 * n * math.log(2.0 * math.pi * sigma2) - 0.5 * n
        return GlmFit(family, beta, design.columns, loglik, n, dispersion=sigma2)

    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("Poisson responses must be nonnegative integers")
    mu = y + 0.1
    eta = np.log(mu)
    beta = _solve_ls(X, eta)
    eta = X @ beta
    loglik = poisson_loglik(y, eta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        new = _solve_ls(X, z, mu)
        # step halving guards against an overshooting Newton step
        step = new - beta
        for _ in range(30):
            cand = beta + step
            cand_eta = X @ cand
            cand_ll = poisson_loglik(y, cand_eta) if np.all(cand_eta < 700) else -np.inf
            if np.isfinite(cand_ll) and cand_ll >= loglik - 1e-9 * abs(loglik):
                break
            step = step / 2.0
        else:
            raise IrlsDivergedError("IRLS could not find an improving step")
        change = float(np.max(np.abs(cand - beta))) if p else 0.0
        beta, eta, loglik = cand, cand_eta, cand_ll
        if change < tol:
            converged = True
            break
    if not np.all(np.isfinite(beta)):
        raise IrlsDivergedError("IRLS produced non-finite coefficients")
    if not converged:
        warnings.warn(f"IRLS stopped after {max_iter} iterations without converging",
                      RuntimeWarning, stacklevel=2)
    return GlmFit(family, beta, design.columns, loglik, n, iterations=it, converged=converged)


def rmse(fit_: GlmFit, test: Dataset, design_builder: Callable[[Dataset], DesignMatrix]) -> float:
    """Root mean squared error of ``g^-1(X beta)`` on held-out data."""
    y_hat = fit_.predict(design_builder(test))
    return float(np.sqrt(np.mean((test.y - y_hat) ** 2)))


# reports -------------------------------------------------------------------

def write_fit_report(path: str | Path, fit_: GlmFit, rmse_test: float | None = None) -> None:
    Path(path).write_text(json.dumps(fit_.to_dict(rmse_test), indent=2), encoding="utf-8")


def write_comparison_csv(path: str | Path, rows: Iterable[dict], with_rmse: bool = True) -> None:
    """Rows of ``{"model", "aic", "bic", "rmse"}`` plus a ``best`` marker column."""
    rows = list(rows)
    best_aic = min(r["aic"] for r in rows) if rows else None
    best_bic = min(r["bic"] for r in rows) if rows else None
    fields = ["model", "si_star", "n_groups", "aic", "bic"] + (["rmse"] if with_rmse else []) + ["best"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in rows:
            marks = [m for m, hit in (("aic", r["aic"] == best_aic), ("bic", r["bic"] == best_bic)) if hit]
            out = [r["model"], "" if r.get("si_star") is None else repr(r["si_star"]),
                   r.get("n_groups", ""), repr(r["aic"]), repr(r["bic"])]
            if with_rmse:
                out.append("" if r.get("rmse") is None else repr(r["rmse"]))
            out.append("+".join(marks))
            writer.writerow(out)
