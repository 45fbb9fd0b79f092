"""Two-layer graph convolutional classifier in plain numpy.

Layer rule ``H1 = relu(Ahat X W1)``, output ``Ahat H1 W2`` with
``Ahat = D^-1/2 (A + I) D^-1/2``.  The graph head mean-pools the output rows,
the node head reads the target row; both finish with a softmax.  Node
features default to a one-hot encoding of the degree, capped at ``d_max``.

Batches are padded to a common node count.  Padding nodes carry zero
features and are excluded from pooling, so they never influence real nodes.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bitgraph import GraphRecord, bits_to_adjacency
from .errors import ConfigError, InvalidInput, TrainingFailure

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = 32
DEFAULT_D_MAX = 16


@dataclass
class GcnModel:
    W1: np.ndarray
    W2: np.ndarray
    d_max: int = DEFAULT_D_MAX
    history: list = field(default_factory=list, compare=False, repr=False)

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.W2.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    def to_json(self) -> dict:
        return {"hidden": self.hidden, "d_max": self.d_max, "K": self.num_classes,
                "W1": self.W1.tolist(), "W2": self.W2.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GcnModel":
        W1 = np.asarray(obj["W1"], dtype=np.float64)
        W2 = np.asarray(obj["W2"], dtype=np.float64)
        if W1.ndim != 2 or W2.ndim != 2 or W1.shape[1] != obj["hidden"] \
                or W2.shape != (obj["hidden"], obj["K"]):
            raise InvalidInput("weight shapes disagree with hidden/K")
        if not (np.isfinite(W1).all() and np.isfinite(W2).all()):
            raise InvalidInput("non-finite weights")
        return cls(W1, W2, int(obj["d_max"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "GcnModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def init_model(input_dim: int, num_classes: int, hidden: int = DEFAULT_HIDDEN,
               d_max: int = DEFAULT_D_MAX, seed: int = 0) -> GcnModel:
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (input_dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + num_classes))
    return GcnModel(rng.uniform(-lim1, lim1, (input_dim, hidden)),
                    rng.uniform(-lim2, lim2, (hidden, num_classes)), d_max)


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` for a single matrix or a batch."""
    a = adj + np.eye(adj.shape[-1])
    dinv = 1.0 / np.sqrt(a.sum(axis=-1))
    return a * dinv[..., :, None] * dinv[..., None, :]


def degree_features(adj: np.ndarray, d_max: int, mask: np.ndarray | None = None) -> np.ndarray:
    deg = np.minimum(adj.sum(axis=-1).astype(np.int64), d_max)
    x = np.zeros(deg.shape + (d_max + 1,))
    np.put_along_axis(x, deg[..., None], 1.0, axis=-1)
    if mask is not None:
        x *= mask[..., None]
    return x


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model: GcnModel, ahat, x, readout):
    """Batched forward pass; ``readout`` is a ``(B, P)`` weighting of output rows."""
    ax = ahat @ x
    pre1 = ax @ model.W1
    h1 = np.maximum(pre1, 0.0)
    r = np.einsum("bp,bpq->bq", readout, ahat)
    pooled = np.einsum("bq,bqh->bh", r, h1)
    logits = pooled @ model.W2
    return logits, (ax, pre1, r, pooled)


def _backward(model: GcnModel, dlogits, cache):
    ax, pre1, r, pooled = cache
    dW2 = pooled.T @ dlogits
    dpooled = dlogits @ model.W2.T
    dpre1 = r[:, :, None] * dpooled[:, None, :] * (pre1 > 0)
    dW1 = np.einsum("bpf,bph->fh", ax, dpre1)
    return dW1, dW2


def _cross_entropy(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(len(labels)), labels].mean()
    g = np.exp(logp)
    g[np.arange(len(labels)), labels] -= 1.0
    return loss, g / len(labels)


@dataclass
class GraphBatch:
    """Padded adjacency batch with node masks; ``readout`` selects pooled rows."""

    adj: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_graphs(cls, graphs: Sequence[GraphRecord]) -> "GraphBatch":
        if not graphs:
            raise InvalidInput("empty graph batch")
        p = max(g.n for g in graphs)
        adj = np.zeros((len(graphs), p, p))
        mask = np.zeros((len(graphs), p))
        for b, g in enumerate(graphs):
            adj[b, :g.n, :g.n] = g.adjacency()
            mask[b, :g.n] = 1.0
        return cls(adj, mask, np.array([g.label for g in graphs], dtype=np.int64))

    def mean_readout(self) -> np.ndarray:
        return self.mask / self.mask.sum(axis=1, keepdims=True)


def graph_logits(model: GcnModel, adj: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Graph-head logits for a ``(B, P, P)`` adjacency batch."""
    if mask is None:
        mask = np.ones(adj.shape[:2])
    readout = mask / mask.sum(axis=1, keepdims=True)
    logits, _ = _forward(model, normalized_adjacency(adj), degree_features(adj, model.d_max, mask),
                         readout)
    return logits


def forward_graph(model: GcnModel, g: GraphRecord) -> np.ndarray:
    """Class probabilities for a whole graph."""
    return softmax(graph_logits(model, g.adjacency()[None]))[0]


def node_logits(model: GcnModel, adj: np.ndarray, features: np.ndarray, target: int) -> np.ndarray:
    """Node-head logits at ``target`` for a ``(B, n, n)`` adjacency batch sharing ``features``."""
    n = adj.shape[-1]
    if not 0 <= target < n:
        raise InvalidInput(f"target {target} out of range for n={n}")
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (n, model.input_dim):
        raise InvalidInput(f"features must have shape {(n, model.input_dim)}")
    readout = np.zeros(adj.shape[:2])
    readout[:, target] = 1.0
    x = np.broadcast_to(features, adj.shape[:1] + features.shape)
    logits, _ = _forward(model, normalized_adjacency(adj), x, readout)
    return logits


def forward_node(model: GcnModel, g: GraphRecord, features, target: int) -> np.ndarray:
    return softmax(node_logits(model, g.adjacency()[None], features, target))[0]


def graph_loss_and_grad(model: GcnModel, batch: GraphBatch):
    x = degree_features(batch.adj, model.d_max, batch.mask)
    logits, cache = _forward(model, normalized_adjacency(batch.adj), x, batch.mean_readout())
    loss, g = _cross_entropy(logits, batch.labels)
    return loss, _backward(model, g, cache)


def node_loss_and_grad(model: GcnModel, adj: np.ndarray, features: np.ndarray,
                       targets: np.ndarray, labels: np.ndarray):
    """Cross-entropy over ``targets`` of a single graph ``adj`` (shape ``(n, n)``)."""
    n = adj.shape[-1]
    ahat = normalized_adjacency(adj)[None]
    readout = np.zeros((len(targets), n))
    readout[np.arange(len(targets)), targets] = 1.0
    ahat_b = np.broadcast_to(ahat, (len(targets), n, n))
    x = np.broadcast_to(features, (len(targets),) + features.shape)
    logits, cache = _forward(model, ahat_b, x, readout)
    loss, g = _cross_entropy(logits, np.asarray(labels, dtype=np.int64))
    return loss, _backward(model, g, cache)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 0.5
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN
    d_max: int = DEFAULT_D_MAX
    noise_beta: float | None = None

    def __post_init__(self):
        if self.epochs < 0 or not self.lr > 0 or self.hidden < 1 or self.d_max < 1:
            raise ConfigError(f"invalid training config {self}")
        if self.noise_beta is not None and not 0.5 < self.noise_beta < 1.0:
            raise ConfigError("noise_beta must lie in (0.5, 1)")


def _flip_edges(adj, mask, flip_prob, rng):
    """XOR every real upper-triangle edge slot with Bernoulli(flip_prob) noise."""
    p = adj.shape[-1]
    valid = mask[:, :, None] * mask[:, None, :] * np.triu(np.ones((p, p)), k=1)
    flips = (rng.random(adj.shape) < flip_prob) * valid
    flips = flips + np.swapaxes(flips, 1, 2)
    return np.abs(adj - flips)


def _check_step(loss, epoch):
    if not np.isfinite(loss):
        raise TrainingFailure(f"loss became {loss} at epoch {epoch}; lower the learning rate",
                              epoch=epoch, loss=float(loss))


def train(graphs: Sequence[GraphRecord], config: TrainConfig = TrainConfig(),
          num_classes: int | None = None) -> GcnModel:
    """Full-batch gradient descent on the graph head.

    With ``noise_beta`` set every epoch sees freshly flipped topologies, the
    same channel the smoothed classifier uses at test time.
    """
    if not graphs:
        raise InvalidInput("cannot train on an empty dataset")
    batch = GraphBatch.from_graphs(graphs)
    k = num_classes if num_classes is not None else int(batch.labels.max()) + 1
    if batch.labels.max() >= k:
        raise InvalidInput("labels exceed num_classes")
    model = init_model(config.d_max + 1, k, config.hidden, config.d_max, config.seed)
    noise_rng = np.random.default_rng([config.seed, 1])
    for epoch in range(config.epochs):
        step = batch
        if config.noise_beta is not None:
            step = GraphBatch(_flip_edges(batch.adj, batch.mask, 1.0 - config.noise_beta, noise_rng),
                              batch.mask, batch.labels)
        loss, (dW1, dW2) = graph_loss_and_grad(model, step)
        _check_step(loss, epoch)
        model.history.append(float(loss))
        model.W1 -= config.lr * dW1
        model.W2 -= config.lr * dW2
    if config.epochs:
        log.info("trained %d epochs, final loss %.4f", config.epochs, model.history[-1])
    return model


def train_node(g: GraphRecord, features: np.ndarray, labels, train_nodes,
               config: TrainConfig = TrainConfig(), num_classes: int | None = None) -> GcnModel:
    """Transductive node classification on one graph; ``d_max`` is unused here."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    if features.shape[0] != g.n or len(labels) != g.n:
        raise InvalidInput("features and labels need one row per node")
    if len(train_nodes) == 0:
        raise InvalidInput("no training nodes")
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    model = init_model(features.shape[1], k, config.hidden, config.d_max, config.seed)
    adj = g.adjacency()
    noise_rng = np.random.default_rng([config.seed, 1])
    for epoch in range(config.epochs):
        a = adj
        if config.noise_beta is not None:
            a = _flip_edges(adj[None], np.ones((1, g.n)), 1.0 - config.noise_beta, noise_rng)[0]
        loss, (dW1, dW2) = node_loss_and_grad(model, a, features, train_nodes, labels[train_nodes])
        _check_step(loss, epoch)
        model.history.append(float(loss))
        model.W1 -= config.lr * dW1
        model.W2 -= config.lr * dW2
    return model


def predict_graphs(model: GcnModel, graphs: Sequence[GraphRecord]) -> np.ndarray:
    batch = GraphBatch.from_graphs(graphs)
    return graph_logits(model, batch.adj, batch.mask).argmax(axis=1)


class GraphClassifier:
    """Base classifier over edge-bit vectors of ``n``-node graphs (picklable)."""

    def __init__(self, model: GcnModel, n: int, chunk: int = 2048):
        self.model, self.n, self.chunk = model, n, chunk

    def __call__(self, bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(bits)
        out = np.empty(len(bits), dtype=np.int64)
        for s in range(0, len(bits), self.chunk):
            adj = bits_to_adjacency(bits[s:s + self.chunk], self.n)
            out[s:s + self.chunk] = graph_logits(self.model, adj).argmax(axis=1)
        return out


class NodeClassifier:
    """Base classifier for one target node; features stay fixed, edges vary."""

    def __init__(self, model: GcnModel, n: int, features: np.ndarray, target: int,
                 chunk: int = 1024):
        self.model, self.n, self.target, self.chunk = model, n, target, chunk
        self.features = np.asarray(features, dtype=np.float64)

    def __call__(self, bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(bits)
        out = np.empty(len(bits), dtype=np.int64)
        for s in range(0, len(bits), self.chunk):
            adj = bits_to_adjacency(bits[s:s + self.chunk], self.n)
            out[s:s + self.chunk] = node_logits(self.model, adj, self.features,
                                                self.target).argmax(axis=1)
        return out
