"""Reference implementations used as independent oracles.

Each one is written for clarity rather than speed and shares no code with
the library it checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def silhouette_bruteforce(points: np.ndarray, labels) -> list[float]:
    """Per-item silhouette with explicit double loops; singletons score 0."""
    pts = [np.asarray(p, dtype=float) for p in points]
    labels = list(labels)
    out = []
    for i, p in enumerate(pts):
        own = [j for j in range(len(pts)) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(math.dist(p, pts[j]) for j in own) / len(own)
        b = math.inf
        for c in set(labels) - {labels[i]}:
            members = [j for j in range(len(pts)) if labels[j] == c]
            b = min(b, sum(math.dist(p, pts[j]) for j in members) / len(members))
        denom = max(a, b)
        out.append(0.0 if denom == 0 else (b - a) / denom)
    return out


def kmedoids_optimal_cost(points: np.ndarray, k: int) -> float:
    """Smallest total distance to the nearest medoid over all medoid sets."""
    pts = [np.asarray(p, dtype=float) for p in points]
    best = math.inf
    for medoids in itertools.combinations(range(len(pts)), k):
        cost = sum(min(math.dist(p, pts[m]) for m in medoids) for p in pts)
        best = min(best, cost)
    return best


def normal_equations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.solve(X.T @ X, X.T @ y)


def poisson_newton(X: np.ndarray, y: np.ndarray, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Newton's method on the Poisson log-likelihood with a backtracking line search."""
    def loglik(b):
        eta = X @ b
        return float(np.sum(y * eta - np.exp(eta)))

    beta = np.zeros(X.shape[1])
    beta[0] = math.log(max(y.mean(), 1e-8))
    ll = loglik(beta)
    for _ in range(max_iter):
        mu = np.exp(X @ beta)
        grad = X.T @ (y - mu)
        hess = X.T @ (X * mu[:, None])
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while t > 1e-12:
            cand = beta + t * step
            cand_ll = loglik(cand)
            if cand_ll >= ll - 1e-14 * abs(ll):
                break
            t /= 2.0
        beta, ll = cand, cand_ll
        if np.max(np.abs(t * step)) < tol:
            break
    return beta


def forward_oracle(embedding, weights, biases, out_w, out_b, x, leaf, hidden="identity",
                   output="identity") -> float:
    """One prediction written out with plain loops over neurons."""
    z = list(np.asarray(x, dtype=float)) + [embedding[k][leaf] for k in range(len(embedding))]
    for W, b in zip(weights, biases):
        nxt = []
        for u in range(len(b)):
            s = b[u] + sum(W[u][j] * z[j] for j in range(len(z)))
            if hidden == "relu":
                s = max(s, 0.0)
            elif hidden == "tanh":
                s = math.tanh(s)
            nxt.append(s)
        z = nxt
    eta = out_b + sum(out_w[j] * z[j] for j in range(len(z)))
    return math.exp(eta) if output == "exponential" else eta


def central_difference(f, params: list[np.ndarray], step: float = 1e-5) -> list[np.ndarray]:
    """Numerical gradient of ``f()`` with respect to every entry of ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = f()
            p[idx] = old - step
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads
