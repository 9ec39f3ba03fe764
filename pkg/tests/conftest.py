import numpy as np
import pytest

from graphcf.graph import WeightedGraph

ACCEPTANCE_LINES = []


def random_graph(rng, n, p=0.3, low=0.1, high=2.0, connected=False):
    """Erdos-Renyi graph with uniform weights; optionally threaded by a path."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    if connected:
        keep |= ju == iu + 1
    i, j = iu[keep], ju[keep]
    return WeightedGraph(n, i, j, rng.uniform(low, high, size=len(i)))


def two_clusters(rng, n_per, dim=2, spread=0.05, gap=5.0):
    a = rng.normal(0.0, spread, size=(n_per, dim))
    b = rng.normal(0.0, spread, size=(n_per, dim))
    b[:, 0] += gap
    return np.vstack([a, b])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def movielens_path():
    from graphcf.datasets import fetch_movielens_100k

    try:
        return fetch_movielens_100k()
    except RuntimeError as exc:
        pytest.fail(f"MovieLens 100K unavailable: {exc}")


@pytest.fixture(scope="session")
def movielens_split(movielens_path):
    from graphcf.ingest import parse_movielens, split_train_test

    ds = parse_movielens(movielens_path)
    train, test = split_train_test(ds, 0.2, 42)
    return ds, train, test


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
