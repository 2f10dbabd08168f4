"""k-medoids (PAM / CLARA) on embedding vectors and silhouette-based K selection."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, KOutOfRangeError, SingleClusterError

CLARA_THRESHOLD = 200
CLARA_SAMPLES = 5
# medoid sets are enumerated outright when there are at most this many
EXACT_LIMIT = 5000


def distance(e1, e2) -> float:
    """Euclidean distance between two embedding vectors."""
    a = np.asarray(e1, dtype=float).ravel()
    b = np.asarray(e2, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vectors of length {a.size} and {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def distance_matrix(items: np.ndarray) -> np.ndarray:
    items = np.asarray(items, dtype=float)
    return cdist(items, items, metric="euclidean")


@dataclass
class ClusterSolution:
    """A hard partition of ``items``.

    ``labels[j]`` is the 0-based cluster of item ``j``; clusters are
    numbered by the position of their medoid, so cluster 0 holds the medoid
    that appears first in ``items``. Silhouettes are ``None`` for ``k == 1``.
    """

    items: np.ndarray
    labels: np.ndarray
    medoids: np.ndarray
    cost: float
    ids: list = field(default_factory=list)
    per_item_silhouette: np.ndarray | None = None
    overall_silhouette: float | None = None
    si_curve: dict[int, float] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.medoids)

    @property
    def n_items(self) -> int:
        return len(self.labels)

    def clusters(self) -> list[list[int]]:
        """Item positions per cluster, in cluster order."""
        return [np.flatnonzero(self.labels == c).tolist() for c in range(self.k)]

    def to_dict(self) -> dict:
        ids = self.ids or list(range(self.n_items))
        return {
            "k": self.k,
            "ids": [_jsonable(i) for i in ids],
            "assignment": [int(c) + 1 for c in self.labels],
            "medoids": [_jsonable(ids[m]) for m in self.medoids],
            "cost": self.cost,
            "per_item_silhouette": None if self.per_item_silhouette is None
            else [float(v) for v in self.per_item_silhouette],
            "overall_silhouette": self.overall_silhouette,
            "si_curve": {str(k): v for k, v in self.si_curve.items()},
        }


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    return v


# PAM ---------------------------------------------------------------------

def _build(D: np.ndarray, k: int) -> list[int]:
    """Greedy BUILD: each new medoid gives the largest drop in total cost."""
    first = int(np.argmin(D.sum(axis=1)))
    medoids = [first]
    nearest = D[first].copy()
    for _ in range(1, k):
        gain = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        c = int(np.argmax(gain))
        medoids.append(c)
        nearest = np.minimum(nearest, D[c])
    return medoids


def _swap(D: np.ndarray, medoids: list[int], max_iter: int = 1000) -> list[int]:
    """Steepest-descent SWAP until no medoid/non-medoid exchange lowers the cost."""
    J = D.shape[0]
    k = len(medoids)
    medoids = list(medoids)
    for _ in range(max_iter):
        Dm = D[:, medoids]
        order = np.argsort(Dm, axis=1, kind="stable")
        near = order[:, 0]
        dn = Dm[np.arange(J), near]
        ds = Dm[np.arange(J), order[:, 1]]
        cost = dn.sum()
        # change in cost of swapping medoid i for candidate c, all (i, c) at once
        acc = np.minimum(D - dn[:, None], 0.0).sum(axis=0)
        contrib = np.minimum(np.maximum(D, dn[:, None]), ds[:, None]) - ds[:, None]
        delta = np.empty((k, J))
        for i in range(k):
            mine = near == i
            delta[i] = (ds[mine] - dn[mine]).sum() + contrib[mine].sum(axis=0)
        delta += acc[None, :]
        delta[:, medoids] = np.inf
        best = int(np.argmin(delta))
        i, c = divmod(best, J)
        if not delta[i, c] < -1e-12 * (1.0 + cost):
            break
        medoids[i] = c
    return medoids


def _exhaustive(D: np.ndarray, k: int) -> list[int]:
    combos = np.array(list(itertools.combinations(range(D.shape[0]), k)), dtype=np.int64)
    costs = D[:, combos].min(axis=2).sum(axis=0)
    return combos[int(np.argmin(costs))].tolist()


def _pam(D: np.ndarray, k: int) -> list[int]:
    J = D.shape[0]
    if k == J:
        return list(range(J))
    if 1 < k and math.comb(J, k) <= EXACT_LIMIT:
        return _exhaustive(D, k)
    medoids = _build(D, k)
    if k == 1:
        return medoids
    return _swap(D, medoids)


def _finalize(items: np.ndarray, medoids: Sequence[int], D_to_medoids: np.ndarray,
              ids: list) -> ClusterSolution:
    """Assign items to sorted ``medoids``; ``D_to_medoids`` columns follow that order."""
    medoids = np.asarray(medoids, dtype=np.int64)
    labels = np.argmin(D_to_medoids, axis=1)
    labels[medoids] = np.arange(len(medoids))
    cost = float(D_to_medoids[np.arange(len(labels)), labels].sum())
    return ClusterSolution(items, labels.astype(np.int64), medoids, cost, list(ids))


def kmedoids(items, k: int, seed: int = 0, ids: Sequence[Hashable] | None = None,
             clara_threshold: int = CLARA_THRESHOLD,
             num_samples: int = CLARA_SAMPLES) -> ClusterSolution:
    """Partition ``items`` (``J x q`` array) into ``k`` clusters around medoids.

    Exact PAM (BUILD + SWAP) is used up to ``clara_threshold`` items, CLARA
    above it. Items go to their nearest medoid; ties go to the lower cluster.
    """
    items = np.atleast_2d(np.asarray(items, dtype=float))
    if items.ndim != 2:
        raise DimensionMismatchError("items must be a 2-d array of vectors")
    J = items.shape[0]
    if not 1 <= k <= J:
        raise KOutOfRangeError(f"k={k} outside 1..{J}")
    ids = list(ids) if ids is not None else []
    if J <= clara_threshold:
        D = distance_matrix(items)
        medoids = sorted(_pam(D, k))
        return _finalize(items, medoids, D[:, medoids], ids)

    rng = np.random.default_rng(seed)
    sample_size = min(J, 40 + 2 * k)
    best_cost, best = np.inf, None
    for _ in range(num_samples):
        sample = np.sort(rng.choice(J, size=sample_size, replace=False))
        sub = distance_matrix(items[sample])
        medoids = sorted(int(sample[m]) for m in _pam(sub, k))
        Dm = cdist(items, items[medoids])
        cost = Dm.min(axis=1).sum()
        if cost < best_cost:
            best_cost, best = cost, (medoids, Dm)
    medoids, Dm = best
    return _finalize(items, medoids, Dm, ids)


# silhouette --------------------------------------------------------------

def silhouette_values(D: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-item silhouettes from a distance matrix; singletons score 0."""
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if len(labels) else 0
    if k < 2:
        raise SingleClusterError("the silhouette is undefined for a single cluster")
    J = len(labels)
    member = np.zeros((J, k))
    member[np.arange(J), labels] = 1.0
    sizes = member.sum(axis=0)
    sums = D @ member  # sum of distances from each item to each cluster
    own = sizes[labels]
    a = np.where(own > 1, sums[np.arange(J), labels] / np.maximum(own - 1, 1), 0.0)
    mean_to = sums / np.where(sizes > 0, sizes, 1.0)
    mean_to[np.arange(J), labels] = np.inf
    mean_to[:, sizes == 0] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return s


def silhouette(sol: ClusterSolution) -> tuple[np.ndarray, float]:
    """Per-item and mean silhouette of a solution with at least two clusters."""
    if sol.k < 2:
        raise SingleClusterError("the silhouette is undefined for a single cluster")
    values = silhouette_values(distance_matrix(sol.items), sol.labels)
    return values, float(values.mean())


def single_cluster(items, ids: Sequence[Hashable] | None = None) -> ClusterSolution:
    items = np.atleast_2d(np.asarray(items, dtype=float))
    D = distance_matrix(items)
    medoid = int(np.argmin(D.sum(axis=1)))
    labels = np.zeros(items.shape[0], dtype=np.int64)
    return ClusterSolution(items, labels, np.array([medoid]), float(D[:, medoid].sum()),
                           list(ids) if ids is not None else [])


def select_k(items, si_star: float, seed: int = 0,
             ids: Sequence[Hashable] | None = None,
             max_k: int | None = None) -> ClusterSolution:
    """Cluster ``items`` with the silhouette-maximizing K, or one cluster.

    K ranges over ``2 .. J - 1`` (capped by ``max_k``); ties go to the smaller
    K. When ``J <= 2`` or the best mean silhouette is below ``si_star`` the
    single-cluster solution is returned. Items are processed in ``ids`` order
    so the result does not depend on input order.
    """
    if not -1.0 <= si_star <= 1.0:
        raise ValueError("si_star must lie in [-1, 1]")
    items = np.atleast_2d(np.asarray(items, dtype=float))
    J = items.shape[0]
    ids = list(ids) if ids is not None else list(range(J))
    if len(ids) != J:
        raise ValueError("one id per item required")
    perm = sorted(range(J), key=lambda j: ids[j])
    inv = np.empty(J, dtype=np.int64)
    inv[perm] = np.arange(J)
    canon = items[perm]
    canon_ids = [ids[j] for j in perm]

    top = J - 1 if max_k is None else min(J - 1, max_k)
    best, best_si, curve = None, -np.inf, {}
    D = distance_matrix(canon) if J <= CLARA_THRESHOLD else None
    for K in range(2, top + 1):
        sol = kmedoids(canon, K, seed=seed + K, ids=canon_ids)
        values = silhouette_values(D if D is not None else distance_matrix(canon), sol.labels)
        si = float(values.mean())
        curve[K] = si
        if si > best_si:
            best, best_si = sol, si
            best.per_item_silhouette, best.overall_silhouette = values, si
    if best is None or best_si < si_star:
        best = single_cluster(canon, canon_ids)
    best.si_curve = curve

    # back to caller order
    labels = best.labels[inv]
    per_item = None if best.per_item_silhouette is None else best.per_item_silhouette[inv]
    medoids = np.sort(inv[best.medoids])
    relabel = {int(old): new for new, old in enumerate(np.argsort(inv[best.medoids], kind="stable"))}
    labels = np.array([relabel[int(c)] for c in labels], dtype=np.int64)
    return ClusterSolution(items, labels, medoids, best.cost, ids, per_item,
                           best.overall_silhouette, curve)
