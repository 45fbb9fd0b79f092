import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphcert.datagen import DatasetSpec, generate_topology_dataset  # noqa: E402
from graphcert.gcn import TrainConfig, train  # noqa: E402

FIXTURE_SEED = 0

# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def topology_data():
    return generate_topology_dataset(DatasetSpec(seed=FIXTURE_SEED))


@pytest.fixture(scope="session")
def clean_model(topology_data):
    train_set, _ = topology_data
    return train(train_set, TrainConfig(seed=FIXTURE_SEED))


@pytest.fixture(scope="session")
def noisy_models(topology_data):
    """Noise-augmented classifiers, trained lazily per beta and shared across tests."""
    train_set, _ = topology_data
    cache = {}

    def get(beta):
        if beta not in cache:
            cache[beta] = train(train_set, TrainConfig(seed=FIXTURE_SEED, noise_beta=beta))
        return cache[beta]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
