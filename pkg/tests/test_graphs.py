import numpy as np
import pytest

from clusteropt.graphs import (
    DistanceTable, EdgeListError, all_pairs_bfs, degree_bucket_features,
    fallback_features, generate_sbm, largest_connected_component, load_edge_list,
    load_split, make_graph, modularity_matrix, normalized_adjacency, save_split,
    split_edges,
)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    chosen = rng.random(len(iu)) < p
    return make_graph(n, list(zip(iu[chosen], ju[chosen])))


def floyd_warshall_oracle(g):
    # independent O(n^3) reference for BFS distances
    big = float(g.n)
    d = np.full((g.n, g.n), big)
    np.fill_diagonal(d, 0.0)
    for u, v in g.edges:
        d[u, v] = d[v, u] = 1.0
    for k in range(g.n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    d[d >= big] = big
    return d


class TestLoad:
    def test_simple_file(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\n1 2\n")
        g = load_edge_list(p)
        assert g.n == 3 and g.m == 2

    def test_dedup_and_self_loop(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\n1 0\n0 0\n")
        with pytest.warns(UserWarning):
            g = load_edge_list(p)
        assert g.n == 2 and g.m == 1
        assert g.meta["dropped_self_loops"] == 1
        assert g.meta["dropped_duplicates"] == 1

    def test_comments_and_labels(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("# header\nalpha beta\nbeta gamma  # trailing\n")
        g = load_edge_list(p)
        assert g.n == 3 and g.names == ["alpha", "beta", "gamma"]

    def test_malformed_line_reports_lineno(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\n0 1 2\n")
        with pytest.raises(EdgeListError, match=":2:"):
            load_edge_list(p)

    def test_feature_file(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\n")
        f = tmp_path / "f.txt"
        f.write_text("1.0 2.0\n3.0 4.0\n")
        g = load_edge_list(p, f)
        assert g.features.shape == (2, 2)

    def test_feature_row_count_mismatch(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\n")
        f = tmp_path / "f.txt"
        f.write_text("1.0\n")
        with pytest.raises(EdgeListError):
            load_edge_list(p, f)


class TestSplit:
    def test_counts(self):
        g = random_graph(12, 0.3, 0)
        assert g.m >= 10
        s = split_edges(g, 0.6, seed=7)
        assert len(s.held_edges) == round(0.6 * g.m)
        assert len(s.train_edges) == g.m - len(s.held_edges)

    def test_deterministic(self):
        g = random_graph(15, 0.3, 1)
        assert split_edges(g, 0.6, 3).held_edges == split_edges(g, 0.6, 3).held_edges

    def test_single_edge_rounding(self):
        g = make_graph(2, [(0, 1)])
        s = split_edges(g, 0.6, 0)
        assert len(s.held_edges) == 1 and len(s.train_edges) == 0

    def test_partition_property_many_seeds(self):
        for seed in range(15):
            g = random_graph(20, 0.2, seed + 100)
            s = split_edges(g, 0.4, seed)
            assert s.train_edges | s.held_edges == g.edges
            assert not (s.train_edges & s.held_edges)
            assert s.train_graph(g).n == g.n

    def test_manifest_roundtrip(self, tmp_path):
        g = random_graph(10, 0.4, 2)
        s = split_edges(g, 0.5, 9)
        save_split(s, tmp_path / "s.json")
        s2 = load_split(tmp_path / "s.json")
        assert s2.held_edges == s.held_edges and s2.seed == 9

    def test_bad_fraction(self):
        g = make_graph(3, [(0, 1)])
        with pytest.raises(ValueError):
            split_edges(g, 1.2, 0)


class TestModularityMatrix:
    def test_triangle(self):
        b = modularity_matrix(make_graph(3, [(0, 1), (1, 2), (0, 2)]))
        off = 1 - 4 / 6
        assert np.allclose(b[0, 1], off) and np.allclose(b[0, 0], -4 / 6)

    def test_total_sum_zero(self):
        g = random_graph(30, 0.2, 3)
        assert abs(modularity_matrix(g).sum()) < 1e-10

    def test_two_disjoint_triangles(self):
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
        b = modularity_matrix(make_graph(6, edges))
        assert np.allclose(b[0, 3], -4 / 12)  # pure degree part across blocks
        assert np.allclose(b[0, 1], 1 - 4 / 12)

    def test_row_sums_zero_random(self):
        for seed in range(5):
            g = random_graph(200, 0.05, seed)
            b = modularity_matrix(g)
            assert np.abs(b.sum(axis=1)).max() < 1e-12
            assert np.allclose(b, b.T)

    def test_empty_graph_errors(self):
        with pytest.raises(ValueError):
            modularity_matrix(make_graph(3, []))


class TestNormalizedAdjacency:
    def test_single_node(self):
        assert np.allclose(normalized_adjacency(make_graph(1, [])), [[1.0]])

    def test_edge_pair(self):
        assert np.allclose(normalized_adjacency(make_graph(2, [(0, 1)])), 0.5)

    def test_triangle(self):
        assert np.allclose(normalized_adjacency(make_graph(3, [(0, 1), (1, 2), (0, 2)])), 1 / 3)

    def test_isolated_node_row(self):
        ahat = normalized_adjacency(make_graph(3, [(0, 1)]))
        assert np.allclose(ahat[2], [0, 0, 1])

    def test_symmetric_spectral_radius(self):
        for seed in range(5):
            g = random_graph(40, 0.15, seed + 10)
            ahat = normalized_adjacency(g)
            assert np.allclose(ahat, ahat.T)
            # power iteration
            v = np.random.default_rng(seed).standard_normal(g.n)
            for _ in range(200):
                v = ahat @ v
                v /= np.linalg.norm(v)
            lam = v @ ahat @ v
            assert lam <= 1 + 1e-9


class TestBfs:
    def test_path(self):
        t = all_pairs_bfs(make_graph(3, [(0, 1), (1, 2)]))
        assert t.dist[0, 2] == 2

    def test_disconnected_sentinel(self):
        t = all_pairs_bfs(make_graph(4, [(0, 1)]))
        assert t.dist[0, 3] == t.sentinel == 4

    def test_complete_graph(self):
        g = make_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        d = all_pairs_bfs(g).dist
        assert np.array_equal(d, 1 - np.eye(4))

    def test_matches_floyd_warshall(self):
        for seed in range(10):
            g = random_graph(np.random.default_rng(seed).integers(5, 30), 0.15, seed)
            assert np.array_equal(all_pairs_bfs(g).dist, floyd_warshall_oracle(g))


class TestSbm:
    def test_disjoint_cliques(self):
        g = generate_sbm([5, 5], 1.0, 0.0, seed=0)
        assert g.m == 20
        assert np.array_equal(g.meta["blocks"], [0] * 5 + [1] * 5)

    def test_planted_modularity(self):
        from clusteropt.decisions import modularity_value
        g = generate_sbm([50, 50], 0.3, 0.01, seed=1)
        assert modularity_value(g.meta["blocks"], g) > 0.3

    def test_deterministic(self):
        assert generate_sbm([10, 10], 0.5, 0.1, 5).edges == generate_sbm([10, 10], 0.5, 0.1, 5).edges

    def test_p_validation(self):
        with pytest.raises(ValueError):
            generate_sbm([5, 5], 0.1, 0.5, 0)


class TestComponentsAndFeatures:
    def test_largest_component(self):
        g = make_graph(6, [(0, 1), (1, 2), (3, 4)])
        sub, keep = largest_connected_component(g)
        assert sub.n == 3 and set(keep) == {0, 1, 2}

    def test_degree_buckets_shape(self):
        g = random_graph(30, 0.2, 4)
        x = degree_bucket_features(g)
        assert x.shape == (30, 16)
        assert np.array_equal(x.sum(axis=1), np.ones(30))

    def test_fallback_features_deterministic_and_symmetry_breaking(self):
        g = generate_sbm([5, 5], 1.0, 0.0, seed=0)  # 4-regular: buckets constant
        x1 = fallback_features(g, seed=3)
        x2 = fallback_features(g, seed=3)
        assert np.array_equal(x1, x2)
        assert np.unique(x1, axis=0).shape[0] == g.n  # rows distinct
