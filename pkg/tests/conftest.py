"""Shared instance generators for the test suite.

Random suites are always seeded so every run exercises identical
instances.
"""

import numpy as np
import pytest

from roadprivacy import MechanismMatrix, PriorDistribution, RoadGraph, all_pairs


def random_connected_graph(rng, n=None, n_min=2, n_max=30, extra_edge_frac=0.5):
    """Random planar-embedded connected graph with road-legal weights.

    Vertices are uniform in a square; a random spanning tree guarantees
    connectivity and extra edges add cycles. Every weight is the endpoint
    Euclidean distance inflated by up to 60 percent, so the road is never
    shorter than the straight line.
    """
    if n is None:
        n = int(rng.integers(n_min, n_max + 1))
    coords = rng.uniform(0.0, 1000.0, size=(n, 2))
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        w = float(np.hypot(*(coords[u] - coords[v]))) * (1.0 + rng.uniform(0.0, 0.6))
        edges.append((u, v, max(w, 1e-3)))
    for _ in range(int(extra_edge_frac * n)):
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        w = float(np.hypot(*(coords[u] - coords[v]))) * (1.0 + rng.uniform(0.0, 0.6))
        edges.append((int(u), int(v), max(w, 1e-3)))
    return RoadGraph(coords=coords, edges=tuple(edges))


def random_range(rng, n, size=None):
    if size is None:
        size = int(rng.integers(1, n + 1))
    return np.sort(rng.choice(n, size=size, replace=False))


def random_mechanism(rng, n, w=None, epsilon=None):
    """Row-stochastic matrix with strictly positive Dirichlet rows."""
    if w is None:
        w = random_range(rng, n)
    probs = rng.dirichlet(np.ones(len(w)) * rng.uniform(0.3, 3.0), size=n)
    return MechanismMatrix(output_range=w, probs=probs, epsilon=epsilon)


def random_prior(rng, n, strictly_positive=False):
    p = rng.dirichlet(np.ones(n))
    if strictly_positive:
        p = (p + 1e-3) / (1.0 + n * 1e-3)
    return PriorDistribution(p)


@pytest.fixture(scope="session")
def line3():
    """3 vertices 1 m apart; the workhorse tiny fixture."""
    from roadprivacy import make_line

    g = make_line(3, 2.0)
    return g, all_pairs(g)


@pytest.fixture(scope="session")
def two_vertex_100():
    from roadprivacy import make_two_vertex

    g = make_two_vertex(100.0, 100.0)
    return g, all_pairs(g)
