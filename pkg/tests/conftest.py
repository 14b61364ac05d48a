import numpy as np
import pytest

from ndda.graph import Topology, erdos_renyi


def small_graphs():
    """Connected graphs with n <= 8 used by the spectral oracle suites."""
    graphs = [Topology.path(n) for n in range(2, 9)]
    graphs += [Topology.complete(n) for n in range(2, 9)]
    graphs += [Topology(n, frozenset({(0, j) for j in range(1, n)})) for n in range(3, 9)]
    graphs += [Topology(n, frozenset({(i, (i + 1) % n) for i in range(n)})) for n in range(3, 9)]
    for n in range(3, 9):
        for seed in range(6):
            graphs.append(erdos_renyi(n, 0.5, 100 * n + seed))
    return graphs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
