from collections import Counter

import networkx as nx
import numpy as np
import pytest

from graphcert.bitgraph import GraphRecord
from graphcert.datagen import FAMILIES, DatasetSpec, generate_sbm, generate_topology_dataset, sbm_features
from graphcert.errors import ConfigError, InvalidParameter


def _nx(g: GraphRecord) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return h


def test_split_sizes_and_stratification(topology_data):
    train, test = topology_data
    assert len(train) == 320 and len(test) == 160
    assert Counter(g.label for g in train) == {k: 40 for k in range(8)}
    assert Counter(g.label for g in test) == {k: 20 for k in range(8)}
    for g in train + test:
        assert FAMILIES[g.label] == g.family


def test_family_structure(topology_data):
    for g in topology_data[0] + topology_data[1]:
        h = _nx(g)
        deg = sorted(d for _, d in h.degree())
        assert nx.is_connected(h)
        if g.family == "cycle":
            assert deg == [2] * g.n and 8 <= g.n <= 20
        elif g.family == "star":
            assert deg == [1] * (g.n - 1) + [g.n - 1]
        elif g.family == "wheel":
            assert deg == [3] * (g.n - 1) + [g.n - 1]
        elif g.family == "complete":
            assert len(g.edges) == g.n * (g.n - 1) // 2
        elif g.family == "hypercube":
            assert g.n in (8, 16) and deg == [g.n.bit_length() - 1] * g.n
        elif g.family == "circular_ladder":
            assert g.n % 2 == 0 and deg == [3] * g.n
        elif g.family == "grid":
            assert 9 <= g.n <= 25 and max(deg) <= 4
        elif g.family == "lollipop":
            assert deg.count(1) == 1


def test_deterministic_and_seed_sensitive():
    spec = DatasetSpec(per_family=6, train_per_family=4, seed=9)
    assert generate_topology_dataset(spec) == generate_topology_dataset(spec)
    other = generate_topology_dataset(DatasetSpec(per_family=6, train_per_family=4, seed=10))
    assert other != generate_topology_dataset(spec)


def test_node_ids_are_shuffled(topology_data):
    # a star centre always at node 0 would leak the family through bit positions
    centres = {max(range(g.n), key=lambda v: _nx(g).degree(v))
               for g in topology_data[0] if g.family == "star"}
    assert len(centres) > 3


@pytest.mark.parametrize("kwargs", [
    {"train_per_family": 60}, {"n_range": (2, 5)}, {"n_range": (9, 9)},
    {"families": ("cycle", "tree")}, {"grid_range": (5, 3)},
])
def test_infeasible_dataset_options(kwargs):
    with pytest.raises(ConfigError):
        DatasetSpec(**kwargs)


def test_sbm_extremes():
    full = generate_sbm(5, 3, 1.0, 0.0, seed=0)
    lab = full.node_labels
    assert all(lab[u] == lab[v] for u, v in full.graph.edges)
    assert len(full.graph.edges) == 3 * 10
    empty = generate_sbm(5, 2, 0.0, 0.0)
    assert not empty.graph.edges
    with pytest.raises(InvalidParameter):
        generate_sbm(5, 2, 1.2, 0.0)


def test_sbm_features():
    labels = np.repeat(np.arange(3), 50)
    clean = sbm_features(labels, 3, noise=0.0)
    assert np.array_equal(clean.argmax(axis=1), labels)
    noisy = sbm_features(labels, 3, noise=0.5, seed=4)
    assert np.allclose(noisy.sum(axis=1), 1)
    assert 0.5 < np.mean(noisy.argmax(axis=1) == labels) < 0.95
