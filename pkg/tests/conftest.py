import numpy as np
import pytest

from procqx.neural_net import Network, NetworkConfig, init_network

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record a one-line pass/fail verdict for the terminal summary."""
    def record(criterion, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_config():
    return NetworkConfig(hidden_sizes=[5, 4], hidden_dropout=[0.5, 0.5], n_inputs=3, seed=11)


def random_network(sizes, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0, scale, size=(o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
    biases = [rng.normal(0, scale, size=o) for o in sizes[1:]]
    return Network(weights, biases)


@pytest.fixture
def default_net():
    return init_network(NetworkConfig(seed=3))
