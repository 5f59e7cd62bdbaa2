import numpy as np
import pytest

from roadprivacy import (
    GraphError,
    PlanarPoint,
    RoadGraph,
    all_pairs,
    dump_graph,
    load_graph,
    make_cross_map,
    make_lattice,
    make_line,
    make_two_vertex,
    nearest_vertex,
)

from conftest import random_connected_graph


def bellman_ford(g, source):
    """O(VE) relaxation oracle, independent of the production path."""
    n = g.n_vertices
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    for _ in range(n - 1):
        changed = False
        for u, v, w in g.edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
            if dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    return dist


# ---------------------------------------------------------------------------
# Loading


def test_load_minimal_graph():
    g = load_graph("ggraph v1\nv 0 0 0\nv 1 100 0\ne 0 1 100\n")
    assert g.n_vertices == 2
    assert g.n_edges == 1
    assert g.edges[0] == (0, 1, 100.0)


def test_load_remaps_ids_preserving_order():
    g = load_graph("ggraph v1\nv 7 0 0\nv 3 100 0\ne 7 3 100\n")
    assert g.n_vertices == 2
    assert np.allclose(g.coords[0], [0, 0])  # id 7 came first
    assert g.edges[0][:2] == (0, 1)


def test_load_rejects_edge_shorter_than_euclidean():
    with pytest.raises(GraphError, match="shorter than the Euclidean"):
        load_graph("ggraph v1\nv 0 0 0\nv 1 100 0\ne 0 1 50\n")


def test_load_rejects_duplicate_vertex_with_line_number():
    with pytest.raises(GraphError, match="line 3"):
        load_graph("ggraph v1\nv 0 0 0\nv 0 1 1\n")


@pytest.mark.parametrize(
    "text,msg",
    [
        ("", "header"),
        ("ggraph v2\n", "header"),
        ("ggraph v1\n", "no vertices"),
        ("ggraph v1\nv 0 0 0\nv 1 100 0\ne 0 1 0\n", "positive"),
        ("ggraph v1\nv 0 0 0\nv 1 100 0\ne 0 1 -5\n", "positive"),
        ("ggraph v1\nv 0 0 0\ne 0 0 5\n", "self-loop"),
        ("ggraph v1\nv 0 0 0\nv 1 100 0\ne 0 2 100\n", "undeclared"),
        ("ggraph v1\nv 0 0 0\nv 1 100 0\n", "disconnected"),
        ("ggraph v1\nq 1 2 3\n", "unknown record"),
        ("ggraph v1\nv 0 0\n", "v <id> <x> <y>"),
    ],
)
def test_load_rejects_malformed(text, msg):
    with pytest.raises(GraphError, match=msg):
        load_graph(text)


def test_comments_and_blank_lines_are_ignored():
    g = load_graph("ggraph v1\n\n# hi\nv 0 0 0  # inline\nv 1 100 0\ne 0 1 100\n")
    assert g.n_vertices == 2


def test_dump_load_round_trip():
    rng = np.random.default_rng(3)
    g = random_connected_graph(rng, n=12)
    g2 = load_graph(dump_graph(g))
    assert np.array_equal(g.coords, g2.coords)
    assert g.edges == g2.edges


# ---------------------------------------------------------------------------
# Generators


def test_make_line_spacing_and_counts():
    g = make_line(11, 1000.0)
    assert g.n_vertices == 11
    assert g.n_edges == 10
    assert np.allclose(np.diff(g.coords[:, 0]), 100.0)

    g2 = make_line(2, 100.0)
    d2 = all_pairs(g2)
    assert d2.shortest[0, 1] == 100.0


def test_make_line_shortest_equals_euclidean_exactly():
    # Spacings here are exactly representable, so path sums stay exact.
    for n, length in [(11, 1000.0), (26, 1000.0), (51, 1000.0), (101, 1000.0), (2, 100.0)]:
        d = all_pairs(make_line(n, length))
        assert np.array_equal(d.shortest, d.euclidean)


def test_make_line_rejects_small_n():
    with pytest.raises(GraphError):
        make_line(1, 100.0)


def test_make_two_vertex():
    g = make_two_vertex(100.0, 1000.0)
    d = all_pairs(g)
    assert d.euclidean[0, 1] == 100.0
    assert d.shortest[0, 1] == 1000.0

    straight = make_two_vertex(100.0, 100.0)
    ds = all_pairs(straight)
    assert ds.shortest[0, 1] == ds.euclidean[0, 1] == 100.0

    with pytest.raises(GraphError):
        make_two_vertex(100.0, 50.0)


def test_make_lattice_counts_and_corner_distance():
    g = make_lattice(2, 2, 100.0)
    assert (g.n_vertices, g.n_edges) == (4, 4)

    g = make_lattice(4, 4, 500.0)
    d = all_pairs(g)
    assert (g.n_vertices, g.n_edges) == (16, 24)
    assert d.shortest[0, 15] == 3000.0  # Manhattan corner to corner

    with pytest.raises(GraphError):
        make_lattice(1, 1, 100.0)


def test_single_row_lattice_matches_line():
    lat = all_pairs(make_lattice(1, 5, 100.0))
    lin = all_pairs(make_line(5, 400.0))
    assert np.allclose(lat.shortest, lin.shortest)


def test_make_cross_map_counts_and_center_degree():
    g = make_cross_map(2000.0, 100.0)
    assert g.n_vertices == 81  # 41 per axis, center shared
    small = make_cross_map(100.0, 100.0)
    assert small.n_vertices == 5
    center = nearest_vertex(small, (0.0, 0.0))
    degree = np.asarray((small.adjacency != 0).sum(axis=1)).ravel()
    assert degree[center] == 4
    with pytest.raises(GraphError):
        make_cross_map(250.0, 100.0)


# ---------------------------------------------------------------------------
# Distances


def test_all_pairs_line_and_cycle():
    d = all_pairs(make_line(3, 1000.0))
    assert d.shortest[0, 2] == 1000.0
    assert np.all(np.diag(d.shortest) == 0.0)

    # 4-cycle with one heavy edge: brute-force enumeration of the two
    # simple paths between the heavy edge's endpoints gives min(10, 3).
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    g = RoadGraph(coords=coords, edges=((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 10.0)))
    d = all_pairs(g)
    assert d.shortest[3, 0] == 3.0


def test_all_pairs_invariants_on_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(5):
        g = random_connected_graph(rng, n_max=40)
        d = all_pairs(g)
        s, e = d.shortest, d.euclidean
        assert np.array_equal(s, s.T)
        assert np.array_equal(e, e.T)
        assert np.all(np.diag(s) == 0.0)
        assert np.all(np.isfinite(s))
        assert np.all(e <= s + 1e-6)
        # Triangle inequality over all ordered triples.
        assert np.all(s[:, None, :] + s[None, :, :] >= s[:, :, None].transpose(0, 2, 1) - 1e-9)


def test_all_pairs_invariants_on_200_vertex_graph():
    rng = np.random.default_rng(11)
    g = random_connected_graph(rng, n=200)
    d = all_pairs(g)
    s = d.shortest
    assert np.array_equal(s, s.T)
    assert np.all(d.euclidean <= s + 1e-6)
    via = np.min(s[:, :, None] + s[None, :, :], axis=1)
    assert np.all(s <= via + 1e-9)


def test_dijkstra_equals_bellman_ford():
    rng = np.random.default_rng(13)
    for _ in range(8):
        g = random_connected_graph(rng, n_max=50)
        d = all_pairs(g)
        for source in rng.choice(g.n_vertices, size=3, replace=False):
            assert np.array_equal(d.shortest[source], bellman_ford(g, int(source)))


def test_distance_matrix_by_metric():
    d = all_pairs(make_line(3, 2.0))
    assert d.by_metric("shortest") is d.shortest
    assert d.by_metric("euclidean") is d.euclidean
    with pytest.raises(ValueError):
        d.by_metric("manhattan")


# ---------------------------------------------------------------------------
# Nearest vertex


def test_nearest_vertex_exact_and_ties():
    g = make_line(5, 400.0)
    assert nearest_vertex(g, PlanarPoint(200.0, 0.0)) == 2
    # Exactly between vertices 1 (x=100) and 2 (x=200): lowest id wins.
    assert nearest_vertex(g, (150.0, 33.0)) == 1


def test_nearest_vertex_matches_exhaustive_scan():
    rng = np.random.default_rng(17)
    g = random_connected_graph(rng, n=25)
    for _ in range(50):
        p = rng.uniform(-100.0, 1100.0, size=2)
        d = np.hypot(g.coords[:, 0] - p[0], g.coords[:, 1] - p[1])
        best = min(range(25), key=lambda i: (d[i], i))
        assert nearest_vertex(g, tuple(p)) == best


# ---------------------------------------------------------------------------
# Validation


def test_graph_rejects_bad_structure():
    with pytest.raises(GraphError):
        RoadGraph(coords=np.zeros((0, 2)), edges=())
    with pytest.raises(GraphError):
        RoadGraph(coords=np.array([[0.0, np.nan]]), edges=())
    ok = RoadGraph(coords=np.array([[0.0, 0.0]]), edges=())  # singleton is fine
    assert ok.n_vertices == 1


def test_graph_arrays_are_frozen():
    g = make_line(3, 2.0)
    with pytest.raises(ValueError):
        g.coords[0, 0] = 5.0
    d = all_pairs(g)
    with pytest.raises(ValueError):
        d.shortest[0, 1] = 9.0
