import numpy as np
import pytest

from eigenspot import CountTensor, ModeLabel, NeighborMatrix


def make_tensor(values, kinds=("space", "time", "attribute")):
    """Wrap an array as a CountTensor with generated category names."""
    values = np.asarray(values, dtype=float)
    modes = tuple(
        ModeLabel(kind, tuple(f"{kind[0]}{i}" for i in range(dim)))
        for kind, dim in zip(kinds, values.shape)
    )
    return CountTensor(modes, values)


def ring_adjacency(n):
    """Cycle graph over n regions (path for n == 2)."""
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    if n > 2:
        adj[0, n - 1] = adj[n - 1, 0] = True
    return NeighborMatrix(adj)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
