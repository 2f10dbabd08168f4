"""Feedforward network with an entity-embedding input layer.

The leaf class enters through a ``q_e x n_R`` embedding matrix whose column
``s`` is the embedding of leaf ``s``; that vector is concatenated with the
covariates and passed through dense hidden layers to a scalar output.
Training is mini-batch Adam on mean squared error or mean Poisson deviance.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .embedding import EmbeddingTable
from .errors import NonFiniteLossError, NonPositivePredictionError, ShapeMismatchError
from .hierarchy import Hierarchy

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
HIDDEN_ACTIVATIONS = ("relu", "tanh", "identity")
OUTPUT_ACTIVATIONS = ("identity", "exponential")
LOSSES = ("mse", "poisson_deviance")

# exp() argument cap; keeps a diverging run finite long enough to be reported
_MAX_ETA = 700.0


@dataclass(frozen=True)
class NetConfig:
    q_e: int = 2
    hidden_sizes: tuple[int, ...] = (2,)
    hidden_activation: str = "identity"
    output_activation: str = "identity"
    loss: str = "mse"
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    patience: int = 10
    min_delta: float = 1e-6
    # "mean" starts the output bias at link(mean(y)); "zero" leaves it at 0
    output_bias_init: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(q) for q in self.hidden_sizes))
        if self.q_e < 1:
            raise ValueError("q_e must be positive")
        if any(q < 1 for q in self.hidden_sizes):
            raise ValueError("hidden layer widths must be positive")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.output_bias_init not in ("mean", "zero"):
            raise ValueError("output_bias_init must be 'mean' or 'zero'")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")

    @classmethod
    def for_family(cls, family: str, **kwargs) -> "NetConfig":
        """Identity output + MSE for gaussian, exponential output + deviance for poisson."""
        if family == "poisson":
            return cls(output_activation="exponential", loss="poisson_deviance", **kwargs)
        if family == "gaussian":
            return cls(output_activation="identity", loss="mse", **kwargs)
        raise ValueError(f"unknown family {family!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(**d)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _out(name: str, eta: np.ndarray) -> np.ndarray:
    if name == "exponential":
        return np.exp(np.minimum(eta, _MAX_ETA))
    return eta


def poisson_deviance(y, y_hat) -> float:
    """Total Poisson deviance ``2 * sum(y log(y / y_hat) - (y - y_hat))``."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if np.any(y_hat <= 0):
        raise NonPositivePredictionError("Poisson deviance needs strictly positive predictions")
    return float(np.sum(_unit_deviance(y, y_hat)))


def _unit_deviance(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    safe = np.where(y > 0, y, 1.0)
    ylog = np.where(y > 0, y * np.log(safe / y_hat), 0.0)
    return 2.0 * (ylog - (y - y_hat))


def _loss_and_dloss(loss: str, y: np.ndarray, y_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and its derivative w.r.t. each prediction."""
    n = len(y)
    if loss == "mse":
        r = y_hat - y
        return float(np.mean(r * r)), 2.0 * r / n
    if np.any(y_hat <= 0):
        raise NonPositivePredictionError("Poisson deviance needs strictly positive predictions")
    return float(np.mean(_unit_deviance(y, y_hat))), 2.0 * (1.0 - y / y_hat) / n


@dataclass
class Network:
    """Weights of the embedding network.

    ``embedding`` has shape ``(q_e, n_R)``; ``weights[m]`` maps the previous
    layer (width ``p + q_e`` for the first) to ``hidden_sizes[m]``;
    ``out_weights`` has shape ``(q_M,)`` and ``out_bias`` is a scalar.
    """

    config: NetConfig
    n_covariates: int
    embedding: np.ndarray
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    out_weights: np.ndarray
    out_bias: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.out_bias = np.asarray(self.out_bias, dtype=float).reshape(1)
        self.check_shapes()

    @property
    def n_leaves(self) -> int:
        return self.embedding.shape[1]

    def check_shapes(self) -> None:
        cfg = self.config
        if self.embedding.shape[0] != cfg.q_e:
            raise ShapeMismatchError(f"embedding has {self.embedding.shape[0]} rows, q_e={cfg.q_e}")
        if cfg.q_e >= self.n_leaves:
            raise ValueError(
                f"q_e={cfg.q_e} must be smaller than the number of leaf classes ({self.n_leaves})"
            )
        width = self.n_covariates + cfg.q_e
        if len(self.weights) != len(cfg.hidden_sizes) or len(self.biases) != len(cfg.hidden_sizes):
            raise ShapeMismatchError("one weight matrix and bias per hidden layer expected")
        for m, (w, b, q) in enumerate(zip(self.weights, self.biases, cfg.hidden_sizes)):
            if w.shape != (q, width) or b.shape != (q,):
                raise ShapeMismatchError(
                    f"hidden layer {m + 1}: expected W {(q, width)}, b {(q,)}, got {w.shape}, {b.shape}"
                )
            width = q
        if self.out_weights.shape != (width,):
            raise ShapeMismatchError(f"output weights: expected {(width,)}, got {self.out_weights.shape}")

    @classmethod
    def initialize(cls, config: NetConfig, n_covariates: int, n_leaves: int,
                   rng: np.random.Generator) -> "Network":
        emb = rng.uniform(-0.05, 0.05, size=(config.q_e, n_leaves))
        weights, biases = [], []
        width = n_covariates + config.q_e
        for q in config.hidden_sizes:
            a = np.sqrt(6.0 / (width + q))
            weights.append(rng.uniform(-a, a, size=(q, width)))
            biases.append(np.zeros(q))
            width = q
        a = np.sqrt(6.0 / (width + 1))
        out_w = rng.uniform(-a, a, size=width)
        return cls(config, n_covariates, emb, weights, biases, out_w, np.zeros(1))

    @classmethod
    def zeros(cls, config: NetConfig, n_covariates: int, n_leaves: int) -> "Network":
        width = n_covariates + config.q_e
        weights, biases = [], []
        for q in config.hidden_sizes:
            weights.append(np.zeros((q, width)))
            biases.append(np.zeros(q))
            width = q
        return cls(config, n_covariates, np.zeros((config.q_e, n_leaves)),
                   weights, biases, np.zeros(width), np.zeros(1))

    # parameters as a flat list, fixed order -------------------------------

    def params(self) -> list[np.ndarray]:
        return [self.embedding, *self.weights, *self.biases, self.out_weights, self.out_bias]

    def copy(self) -> "Network":
        return Network(self.config, self.n_covariates, self.embedding.copy(),
                       [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                       self.out_weights.copy(), self.out_bias.copy())

    # forward / backward ---------------------------------------------------

    def _forward(self, x: np.ndarray, leaf: np.ndarray):
        z0 = np.concatenate([x, self.embedding[:, leaf].T], axis=1)
        acts, pre = [z0], []
        a = z0
        for w, b in zip(self.weights, self.biases):
            z = a @ w.T + b
            a = _act(self.config.hidden_activation, z)
            pre.append(z)
            acts.append(a)
        eta = a @ self.out_weights + self.out_bias[0]
        return eta, _out(self.config.output_activation, eta), pre, acts

    def predict(self, x: np.ndarray, leaf: np.ndarray) -> np.ndarray:
        """Predictions for covariate rows ``x`` and 0-based leaf indices."""
        x = np.asarray(x, dtype=float).reshape(len(leaf), self.n_covariates)
        return self._forward(x, np.asarray(leaf, dtype=np.int64))[1]

    def loss(self, x: np.ndarray, leaf: np.ndarray, y: np.ndarray) -> float:
        return _loss_and_dloss(self.config.loss, np.asarray(y, float), self.predict(x, leaf))[0]

    def loss_and_grad(self, x: np.ndarray, leaf: np.ndarray,
                      y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """Mean loss over the rows and its gradient, ordered like ``params()``."""
        cfg = self.config
        eta, y_hat, pre, acts = self._forward(x, leaf)
        value, d_yhat = _loss_and_dloss(cfg.loss, y, y_hat)
        d_eta = d_yhat * y_hat if cfg.output_activation == "exponential" else d_yhat

        g_out_w = acts[-1].T @ d_eta
        g_out_b = np.array([d_eta.sum()])
        delta = np.outer(d_eta, self.out_weights)
        g_w = [None] * len(self.weights)
        g_b = [None] * len(self.weights)
        for m in range(len(self.weights) - 1, -1, -1):
            delta = delta * _act_grad(cfg.hidden_activation, pre[m], acts[m + 1])
            g_w[m] = delta.T @ acts[m]
            g_b[m] = delta.sum(axis=0)
            delta = delta @ self.weights[m]
        d_emb = delta[:, self.n_covariates:]
        g_emb = np.empty_like(self.embedding)
        for k in range(cfg.q_e):
            g_emb[k] = np.bincount(leaf, weights=d_emb[:, k], minlength=self.n_leaves)
        return value, [g_emb, *g_w, *g_b, g_out_w, g_out_b]

    # persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "hiercat-network",
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "n_covariates": self.n_covariates,
            "embedding": self.embedding.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "out_weights": self.out_weights.tolist(),
            "out_bias": float(self.out_bias[0]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        if d.get("format") != "hiercat-network" or d.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a hiercat network checkpoint of a supported version")
        cfg = NetConfig.from_dict(d["config"])
        return cls(cfg, int(d["n_covariates"]), np.array(d["embedding"], dtype=float),
                   [np.array(w, dtype=float).reshape(q, -1) for w, q in zip(d["weights"], cfg.hidden_sizes)],
                   [np.array(b, dtype=float) for b in d["biases"]],
                   np.array(d["out_weights"], dtype=float), np.array([d["out_bias"]]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Network":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def forward(net: Network, x, leaf_onehot) -> float:
    """Single-observation prediction from covariates and a leaf indicator vector."""
    x = np.asarray(x, dtype=float).ravel()
    onehot = np.asarray(leaf_onehot, dtype=float).ravel()
    if x.shape != (net.n_covariates,) or onehot.shape != (net.n_leaves,):
        raise ShapeMismatchError(
            f"expected x of length {net.n_covariates} and a one-hot of length {net.n_leaves}"
        )
    a = np.concatenate([x, net.embedding @ onehot])
    for w, b in zip(net.weights, net.biases):
        a = _act(net.config.hidden_activation, w @ a + b)
    return float(_out(net.config.output_activation, np.array(a @ net.out_weights + net.out_bias[0])))


@dataclass
class TrainResult:
    network: Network
    loss_trace: list[float]
    epochs_run: int


def train(config: NetConfig, d: Dataset, hierarchy: Hierarchy | None = None) -> TrainResult:
    """Fit the network by mini-batch Adam; deterministic for a fixed ``config.seed``."""
    hierarchy = hierarchy or d.hierarchy
    if hierarchy is not d.hierarchy and hierarchy != d.hierarchy:
        raise ValueError("dataset is bound to a different hierarchy")
    if config.q_e >= hierarchy.n_leaves:
        raise ValueError(
            f"q_e={config.q_e} must be smaller than the number of leaf classes ({hierarchy.n_leaves})"
        )
    if config.loss == "poisson_deviance" and np.any(d.y < 0):
        raise ValueError("Poisson deviance needs nonnegative responses")
    rng = np.random.default_rng(config.seed)
    net = Network.initialize(config, d.p, hierarchy.n_leaves, rng)
    if config.output_bias_init == "mean":
        ybar = float(np.mean(d.y))
        if config.output_activation == "exponential":
            net.out_bias[0] = np.log(max(ybar, 1e-8))
        else:
            net.out_bias[0] = ybar

    params = net.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.learning_rate
    x, leaf, y = d.x, d.leaf, d.y
    n = d.n
    trace: list[float] = []
    best = np.inf
    stale = 0
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            rows = order[start:start + config.batch_size]
            value, grads = net.loss_and_grad(x[rows], leaf[rows], y[rows])
            if not np.isfinite(value):
                raise NonFiniteLossError(
                    f"loss became non-finite in epoch {epoch + 1}; lower learning_rate"
                )
            total += value * len(rows)
            step += 1
            c1 = 1.0 - b1 ** step
            c2 = 1.0 - b2 ** step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * (g * g)
                p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(f"loss became non-finite in epoch {epoch + 1}; lower learning_rate")
        trace.append(epoch_loss)
        if best - epoch_loss < config.min_delta:
            stale += 1
            if stale >= config.patience:
                break
        else:
            stale = 0
        best = min(best, epoch_loss)
    log.debug("trained %d epochs, final loss %.6g", len(trace), trace[-1])
    return TrainResult(net, trace, len(trace))


def leaf_embeddings(net: Network, hierarchy: Hierarchy) -> EmbeddingTable:
    """Leaf-level table: row ``s - 1`` is column ``s - 1`` of the embedding matrix."""
    if net.n_leaves != hierarchy.n_leaves:
        raise ShapeMismatchError(
            f"network embeds {net.n_leaves} leaves, hierarchy has {hierarchy.n_leaves}"
        )
    return EmbeddingTable(net.config.q_e, {hierarchy.num_levels: net.embedding.T.copy()})
