import numpy as np
import pytest

from dgae.graphs import Graph


def random_graph(n: int, num_edges: int, feature_dim: int, seed: int,
                 ensure_isolated: int | None = None) -> Graph:
    """Random simple graph with standard-normal features.

    ``ensure_isolated`` keeps one node out of every edge, for testing the
    empty-neighborhood path.
    """
    rng = np.random.default_rng(seed)
    edges: set[tuple[int, int]] = set()
    limit = n * (n - 1) // 2
    if ensure_isolated is not None:
        limit = (n - 1) * (n - 2) // 2
    num_edges = min(num_edges, limit)
    while len(edges) < num_edges:
        i, j = (int(v) for v in rng.integers(0, n, 2))
        if i == j or ensure_isolated in (i, j):
            continue
        edges.add((min(i, j), max(i, j)))
    return Graph(num_nodes=n, edges=edges,
                 features=rng.standard_normal((n, feature_dim)))


@pytest.fixture
def toy_graph() -> Graph:
    """The 12-node fixture used by the gradient-fidelity checks."""
    return random_graph(12, 20, 5, seed=7)
