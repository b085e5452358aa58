import itertools
import math

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from conftest import floyd_warshall, random_graph
from normembed import graphs
from normembed.graphs import Graph, GraphError


def edge_set(g):
    return {(u, v) for u, v, _ in g.edges()}


def assert_simple(g):
    e = g.edges()
    assert all(0 <= u < v < g.num_nodes for u, v, _ in e)
    assert len(edge_set(g)) == len(e)
    assert all(w > 0 for _, _, w in e)


@pytest.mark.parametrize(
    "branching,height,nodes",
    [(3, 5, 364), (2, 3, 15), (1, 4, 5), (2, 0, 1), (4, 2, 21)],
)
def test_tree_counts(branching, height, nodes):
    g = graphs.gen_tree(branching, height)
    assert g.num_nodes == nodes
    assert g.num_edges == nodes - 1
    assert_simple(g)


def test_tree_bfs_order_and_path():
    g = graphs.gen_tree(2, 2)
    assert edge_set(g) == {(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)}
    assert edge_set(graphs.gen_tree(1, 4)) == {(0, 1), (1, 2), (2, 3), (3, 4)}


@pytest.mark.parametrize("sides", [[5, 5, 5, 5], [2, 2], [5, 5], [3, 4], [2, 3, 4]])
def test_grid_edge_formula(sides):
    g = graphs.gen_grid(sides)
    expected = sum((s - 1) * math.prod(sides[:i] + sides[i + 1:]) for i, s in enumerate(sides))
    assert g.num_nodes == math.prod(sides)
    assert g.num_edges == expected
    assert_simple(g)


def test_grid_small_cases():
    assert graphs.gen_grid([5, 5, 5, 5]).num_edges == 2000
    assert graphs.gen_grid([5, 5]).num_edges == 40
    assert edge_set(graphs.gen_grid([2, 2])) == {(0, 1), (0, 2), (1, 3), (2, 3)}
    with pytest.raises(GraphError):
        graphs.gen_grid([1, 3])


def test_cartesian_product():
    t = graphs.gen_tree(2, 3)
    g = graphs.cartesian_product(t, t)
    assert (g.num_nodes, g.num_edges) == (225, 420)
    assert_simple(g)
    p2 = Graph.from_edges(2, [(0, 1)])
    assert edge_set(graphs.cartesian_product(p2, p2)) == {(0, 1), (0, 2), (1, 3), (2, 3)}
    k1 = Graph.from_edges(1, [])
    assert edge_set(graphs.cartesian_product(t, k1)) == edge_set(t)


def test_cartesian_edge_count_identity(rng):
    for _ in range(10):
        a = random_graph(rng, int(rng.integers(2, 8)), 0.5)
        b = random_graph(rng, int(rng.integers(2, 8)), 0.5)
        g = graphs.cartesian_product(a, b)
        assert g.num_edges == a.num_nodes * b.num_edges + b.num_nodes * a.num_edges
        assert_simple(g)


def test_rooted_products_match_table_counts():
    tree = graphs.gen_tree(2, 4)
    grid = graphs.gen_grid([5, 5])
    a = graphs.rooted_product(tree, grid, 0)
    b = graphs.rooted_product(grid, tree, 0)
    assert (a.num_nodes, a.num_edges) == (775, 1270)
    assert (b.num_nodes, b.num_edges) == (775, 790)
    assert_simple(a)
    assert_simple(b)
    k1 = Graph.from_edges(1, [])
    assert edge_set(graphs.rooted_product(tree, k1, 0)) == edge_set(tree)
    with pytest.raises(GraphError):
        graphs.rooted_product(tree, grid, 25)


@pytest.mark.parametrize("builder,pairs", [
    (lambda: graphs.gen_tree(3, 5), 66066),
    (lambda: graphs.gen_grid([5, 5, 5, 5]), 195000),
    (lambda: graphs.cartesian_product(graphs.gen_tree(2, 3), graphs.gen_tree(2, 3)), 25200),
    (lambda: graphs.rooted_product(graphs.gen_tree(2, 4), graphs.gen_grid([5, 5])), 299925),
    (lambda: graphs.rooted_product(graphs.gen_grid([5, 5]), graphs.gen_tree(2, 4)), 299925),
])
def test_pair_counts_match_triples(builder, pairs):
    assert len(graphs.apsp(builder())) == pairs


def brute_margulis(n):
    edges = set()
    for x in range(n):
        for y in range(n):
            for dx, dy in [(2 * y, 0), (-2 * y, 0), (2 * y + 1, 0), (-2 * y - 1, 0),
                           (0, 2 * x), (0, -2 * x), (0, 2 * x + 1), (0, -2 * x - 1)]:
                a, b = x * n + y, ((x + dx) % n) * n + (y + dy) % n
                if a != b:
                    edges.add((min(a, b), max(a, b)))
    return edges


@pytest.mark.parametrize("n", [2, 3, 5, 25])
def test_margulis_matches_brute_force(n):
    g = graphs.gen_margulis(n)
    assert g.num_nodes == n * n
    assert edge_set(g) == brute_margulis(n)
    assert_simple(g)


def test_margulis_25_counts_and_connectivity():
    g = graphs.gen_margulis(25)
    # 8 generator moves per node give 625 * 8 / 2 = 2500 edges as a multigraph
    moves = sum(len(graphs.margulis_moves(25, x, y)) for x in range(25) for y in range(25))
    assert moves // 2 == 2500
    # loops and parallel edges removed
    assert g.num_edges == 2350
    n_comp, _ = connected_components(g.adjacency(), directed=False)
    assert n_comp == 1
    lap = np.diag(g.degrees()) - g.adjacency().toarray()
    assert np.sort(np.linalg.eigvalsh(lap))[1] > 1e-6


def test_paley():
    assert edge_set(graphs.gen_paley(5)) == {(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)}
    g13 = graphs.gen_paley(13)
    residues = {(i * i) % 13 for i in range(1, 13)}
    expected = {(a, b) for a, b in itertools.combinations(range(13), 2) if (b - a) % 13 in residues}
    assert edge_set(g13) == expected
    assert g13.num_edges == 39
    assert set(g13.degrees().tolist()) == {6}
    g101 = graphs.gen_paley(101)
    assert (g101.num_nodes, g101.num_edges) == (101, 101 * 100 // 4)
    for bad in (7, 9, 15, 21):
        with pytest.raises(GraphError):
            graphs.gen_paley(bad)


def test_chordal_cycle():
    assert edge_set(graphs.gen_chordal_cycle(3)) == {(0, 1), (1, 2), (0, 2)}
    p = 7
    inverse = {i: next(j for j in range(1, p) if (i * j) % p == 1) for i in range(1, p)}
    expected = {(min(i, (i + 1) % p), max(i, (i + 1) % p)) for i in range(p)}
    expected |= {(min(i, j), max(i, j)) for i, j in inverse.items() if i != j}
    assert edge_set(graphs.gen_chordal_cycle(7)) == expected
    for q in (11, 101, 523):
        g = graphs.gen_chordal_cycle(q)
        assert g.degrees().max() <= 4
        assert_simple(g)
    with pytest.raises(GraphError):
        graphs.gen_chordal_cycle(9)


def test_load_edge_list(tmp_path):
    f = tmp_path / "tri.edges"
    f.write_text("# a triangle\n0 1\n1 2\n\n2 0\n1 0\n")
    g = graphs.load_edge_list(f)
    assert (g.num_nodes, g.num_edges) == (3, 3)

    f2 = tmp_path / "w.edges"
    f2.write_text("a b 2.5\nb a 7\n")
    g2 = graphs.load_edge_list(f2, weighted=True)
    assert g2.edges() == [(0, 1, 2.5)]
    assert g2.node_names == ("a", "b")

    bad = tmp_path / "bad.edges"
    bad.write_text("0 1\n0 1 2 3\n")
    with pytest.raises(GraphError, match=":2:"):
        graphs.load_edge_list(bad)
    neg = tmp_path / "neg.edges"
    neg.write_text("0 1 -1\n")
    with pytest.raises(GraphError, match="positive"):
        graphs.load_edge_list(neg, weighted=True)


def test_edge_list_roundtrip(tmp_path):
    g = graphs.gen_grid([3, 4])
    nodes = graphs.write_edge_list(g, tmp_path / "grid.edges")
    assert nodes.name == "grid.nodes.tsv"
    assert nodes.read_text().splitlines()[0] == "0\t0"
    h = graphs.load_edge_list(tmp_path / "grid.edges")
    assert h.num_nodes == g.num_nodes and h.num_edges == g.num_edges
    orig = [int(name) for name in h.node_names]
    dh = graphs.distance_matrix(h)
    dg = graphs.distance_matrix(g)
    assert np.array_equal(dh, dg[np.ix_(orig, orig)])


@pytest.mark.skipif(not __import__("pathlib").Path("data/bio-diseasome.edges").exists(),
                    reason="bio-diseasome edge list not supplied")
def test_bio_diseasome_counts():
    g = graphs.load_edge_list("data/bio-diseasome.edges")
    assert (g.num_nodes, g.num_edges) == (516, 1188)


def test_apsp_small_cases():
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    ps = graphs.apsp(p3)
    assert dict(zip(zip(ps.u.tolist(), ps.v.tolist()), ps.dist.tolist()))[(0, 2)] == 2
    grid = graphs.apsp(graphs.gen_grid([5, 5]))
    assert grid.dist[(grid.u == 0) & (grid.v == 24)][0] == 8


def test_apsp_disconnected_pairs_omitted():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    ps = graphs.apsp(g)
    assert list(zip(ps.u.tolist(), ps.v.tolist())) == [(0, 1), (2, 3)]


@pytest.mark.parametrize("weighted", [False, True])
def test_apsp_matches_floyd_warshall(rng, weighted):
    for _ in range(100):
        n = int(rng.integers(2, 51))
        g = random_graph(rng, n, float(rng.uniform(0.03, 0.3)), weighted)
        ps = graphs.apsp(g)
        fw = floyd_warshall(g)
        iu, iv = np.triu_indices(n, 1)
        finite = np.isfinite(fw[iu, iv])
        assert np.array_equal(ps.u, iu[finite]) and np.array_equal(ps.v, iv[finite])
        assert np.max(np.abs(ps.dist - fw[iu, iv][finite]), initial=0.0) <= 1e-9


def test_apsp_generated_graphs_exact_and_triangle():
    for g in [graphs.gen_tree(2, 4), graphs.gen_grid([3, 3, 3]), graphs.gen_paley(13),
              graphs.gen_chordal_cycle(23), graphs.gen_margulis(5)]:
        ps = graphs.apsp(g)
        fw = floyd_warshall(g)
        assert np.array_equal(ps.dist, fw[ps.u, ps.v])
        assert np.all(ps.dist > 0)
        full = fw
        n = g.num_nodes
        for a, b, c in itertools.islice(itertools.permutations(range(n), 3), 5000):
            assert full[a, c] <= full[a, b] + full[b, c]


def test_graph_rejects_bad_edges():
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 1, 0.0)])
    g = Graph.from_edges(3, [(0, 0), (0, 1), (1, 0), (2, 1)])
    assert g.edges() == [(0, 1, 1.0), (1, 2, 1.0)]
