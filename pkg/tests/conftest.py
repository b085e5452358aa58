import itertools
import math

import numpy as np
import pytest

from normembed.graphs import Graph


def floyd_warshall(g: Graph) -> np.ndarray:
    n = g.num_nodes
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in g.edges():
        d[u, v] = d[v, u] = min(d[u, v], w)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def random_graph(rng, n, p, weighted=False) -> Graph:
    edges = []
    for u, v in itertools.combinations(range(n), 2):
        if rng.random() < p:
            w = float(rng.integers(1, 10)) / 4.0 if weighted else 1.0
            edges.append((u, v, w))
    return Graph.from_edges(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# (criterion number, description, passed, detail) appended by test_acceptance
RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name} -- {detail}")
