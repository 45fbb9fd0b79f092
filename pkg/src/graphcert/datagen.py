"""Synthetic datasets: eight topology families for graph classification and
a stochastic block model for the node-level task."""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .bitgraph import GraphRecord
from .errors import ConfigError, InvalidParameter

FAMILIES = ("cycle", "star", "wheel", "lollipop", "hypercube", "grid", "complete",
            "circular_ladder")


@dataclass(frozen=True)
class DatasetSpec:
    """Sizes are inclusive ranges.  ``circular_ladder`` counts total nodes
    (two per rung) and only even counts are drawn."""

    per_family: int = 60
    train_per_family: int = 40
    seed: int = 0
    n_range: tuple = (8, 20)
    hypercube_dims: tuple = (3, 4)
    grid_range: tuple = (3, 5)
    lollipop_clique: tuple = (4, 8)
    lollipop_path: tuple = (3, 8)
    families: tuple = field(default=FAMILIES)

    def __post_init__(self):
        if not 0 < self.train_per_family < self.per_family:
            raise ConfigError("need 0 < train_per_family < per_family")
        lo, hi = self.n_range
        if lo < 3 or hi < lo:
            raise ConfigError(f"infeasible node range {self.n_range}")
        if not any(n % 2 == 0 and n >= 6 for n in range(lo, hi + 1)):
            raise ConfigError("node range admits no circular ladder")
        if min(self.hypercube_dims) < 1 or min(self.grid_range) < 2 \
                or self.grid_range[0] > self.grid_range[1]:
            raise ConfigError("infeasible hypercube/grid sizes")
        if self.lollipop_clique[0] < 3 or self.lollipop_path[0] < 1:
            raise ConfigError("infeasible lollipop sizes")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown families {sorted(unknown)}")

    @property
    def total(self) -> int:
        return self.per_family * len(self.families)


def _family_graph(family: str, spec: DatasetSpec, rng: np.random.Generator) -> nx.Graph:
    lo, hi = spec.n_range
    if family == "cycle":
        return nx.cycle_graph(int(rng.integers(lo, hi + 1)))
    if family == "star":
        # networkx's star_graph(k) has k + 1 nodes
        return nx.star_graph(int(rng.integers(lo, hi + 1)) - 1)
    if family == "wheel":
        return nx.wheel_graph(int(rng.integers(lo, hi + 1)))
    if family == "complete":
        return nx.complete_graph(int(rng.integers(lo, hi + 1)))
    if family == "circular_ladder":
        evens = [n for n in range(max(lo, 6), hi + 1) if n % 2 == 0]
        return nx.circular_ladder_graph(int(rng.choice(evens)) // 2)
    if family == "hypercube":
        return nx.hypercube_graph(int(rng.choice(spec.hypercube_dims)))
    if family == "grid":
        r, c = rng.integers(spec.grid_range[0], spec.grid_range[1] + 1, size=2)
        return nx.grid_2d_graph(int(r), int(c))
    if family == "lollipop":
        m = int(rng.integers(spec.lollipop_clique[0], spec.lollipop_clique[1] + 1))
        k = int(rng.integers(spec.lollipop_path[0], spec.lollipop_path[1] + 1))
        return nx.lollipop_graph(m, k)
    raise ConfigError(f"unknown family {family!r}")


def _to_record(g: nx.Graph, label: int, family: str, rng: np.random.Generator) -> GraphRecord:
    g = nx.convert_node_labels_to_integers(g, ordering="sorted")
    perm = rng.permutation(g.number_of_nodes())
    edges = frozenset((int(perm[u]), int(perm[v])) for u, v in g.edges())
    return GraphRecord(g.number_of_nodes(), edges, label, family)


def generate_topology_dataset(spec: DatasetSpec = DatasetSpec()):
    """Return ``(train, test)`` lists, stratified per family.

    Labels follow the order of ``spec.families``.  Node ids are randomly
    permuted so that bit positions carry no family information.
    """
    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for label, family in enumerate(spec.families):
        graphs = [_to_record(_family_graph(family, spec, rng), label, family, rng)
                  for _ in range(spec.per_family)]
        order = rng.permutation(spec.per_family)
        train.extend(graphs[i] for i in order[:spec.train_per_family])
        test.extend(graphs[i] for i in order[spec.train_per_family:])
    return train, test


@dataclass(frozen=True)
class SbmGraph:
    graph: GraphRecord
    node_labels: np.ndarray


def generate_sbm(n_per_block: int, k_blocks: int, p_in: float, p_out: float,
                 seed: int = 0) -> SbmGraph:
    """Stochastic block model; node ``v`` belongs to block ``v // n_per_block``."""
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise InvalidParameter(f"edge probability {p} outside [0, 1]")
    n = n_per_block * k_blocks
    labels = np.repeat(np.arange(k_blocks), n_per_block)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = frozenset(zip(iu[keep].tolist(), ju[keep].tolist()))
    return SbmGraph(GraphRecord(n, edges, 0, "sbm"), labels)


def sbm_features(labels: np.ndarray, num_classes: int, noise: float = 0.4,
                 seed: int = 0) -> np.ndarray:
    """One-hot block features, each row replaced by a random class with probability ``noise``.

    The graph convolution has to aggregate neighbours to undo the corruption.
    """
    rng = np.random.default_rng([seed, 2])
    shown = np.where(rng.random(len(labels)) < noise,
                     rng.integers(num_classes, size=len(labels)), labels)
    return np.eye(num_classes)[shown]
