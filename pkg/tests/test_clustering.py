import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import linkage
from sklearn.metrics import adjusted_rand_score

from dmdclust import clustering as cl
from dmdclust.errors import ValidationError
from dmdclust.features import FeatureSet


def sse(points):
    return float(((points - points.mean(axis=0)) ** 2).sum())


def brute_force_greedy(points, edges):
    """Recompute every admissible merge from member lists at each step."""
    n = len(points)
    clusters = {i: [i] for i in range(n)}
    edge_set = {frozenset(e) for e in map(tuple, edges)}
    history = []
    new = n
    while True:
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            ma, mb = clusters[a], clusters[b]
            if not any(frozenset((x, y)) in edge_set for x in ma for y in mb):
                continue
            cost = sse(points[ma + mb]) - sse(points[ma]) - sse(points[mb])
            lo, hi = sorted((min(ma), min(mb)))
            key = (round(cost, 9), lo, hi)
            if best is None or key < best[0]:
                best = (key, a, b)
        if best is None:
            return history
        _, a, b = best
        clusters[new] = clusters.pop(a) + clusters.pop(b)
        history.append((min(a, b), max(a, b)))
        new += 1


def path_edges(n):
    return np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)


class TestGraph:
    def test_validation(self):
        with pytest.raises(ValidationError):
            cl.ConnectivityGraph(2, [[0, 2]])
        with pytest.raises(ValidationError):
            cl.ConnectivityGraph(2, [[1, 1]])

    def test_components(self):
        assert cl.ConnectivityGraph(4, [[0, 1], [2, 3]]).component_count() == 2
        assert cl.complete_graph(5).edges.shape == (10, 2)


class TestWardCost:
    def test_by_hand(self):
        a = cl.ClusterStats.from_points([[0.0]])
        b = cl.ClusterStats.from_points([[2.0]])
        assert cl.ward_cost(a, b) == 2.0
        assert cl.ward_cost(a, a) == 0.0

    @given(seed=st.integers(0, 10_000), na=st.integers(1, 6), nb=st.integers(1, 6))
    def test_matches_sse_increase(self, seed, na, nb):
        rng = np.random.default_rng(seed)
        pa, pb = rng.normal(size=(na, 3)), rng.normal(size=(nb, 3))
        a, b = cl.ClusterStats.from_points(pa), cl.ClusterStats.from_points(pb)
        expect = sse(np.vstack([pa, pb])) - sse(pa) - sse(pb)
        assert abs(cl.ward_cost(a, b) - expect) < 1e-10
        merged = a.merge(b)
        assert abs(merged.sse - sse(np.vstack([pa, pb]))) < 1e-10


@pytest.mark.parametrize("backend", sorted(cl.KERNELS))
class TestWard:
    def test_identical_points_merge_at_zero(self, backend):
        den = cl.ward_constrained(np.ones((2, 3)), cl.complete_graph(2), backend)
        assert den.merges == [(0, 1, 0.0, 2)]

    def test_path_example(self, backend):
        pts = np.array([[0], [0.1], [10], [10.1]])
        den = cl.ward_constrained(pts, cl.ConnectivityGraph(4, path_edges(4)), backend)
        # both within-pair merges precede the cross merge; their order is a
        # floating-point near-tie
        assert {tuple(c) for c in den.children[:2]} == {(0, 1), (2, 3)}
        assert tuple(den.children[2]) == (4, 5)

    def test_disconnected_stops_at_components(self, backend):
        pts = np.arange(4.0)[:, None]
        den = cl.ward_constrained(pts, cl.ConnectivityGraph(4, [[0, 1], [2, 3]]), backend)
        assert den.component_count == 2 and len(den.merges) == 2
        np.testing.assert_array_equal(cl.cut(den, 2), [1, 1, 2, 2])
        with pytest.raises(ValidationError):
            cl.cut(den, 1)

    def test_constraint_blocks_nearest_pair(self, backend):
        # 0 and 2 coincide but are not adjacent
        pts = np.array([[0.0], [5.0], [0.0]])
        den = cl.ward_constrained(pts, cl.ConnectivityGraph(3, path_edges(3)), backend)
        assert tuple(den.children[0]) == (0, 1)

    def test_tie_break(self, backend):
        # four equal-cost adjacent pairs on a square; (0, 1) wins
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        edges = [[2, 3], [3, 0], [1, 2], [0, 1]]
        den = cl.ward_constrained(pts, cl.ConnectivityGraph(4, edges), backend)
        assert tuple(den.children[0]) == (0, 1)

    def test_input_validation(self, backend):
        with pytest.raises(ValidationError):
            cl.ward_constrained(np.zeros((0, 2)), cl.ConnectivityGraph(0, []), backend)
        with pytest.raises(ValidationError):
            cl.ward_constrained(np.zeros((3, 2)), cl.complete_graph(2), backend)
        with pytest.raises(ValidationError):
            cl.ward_constrained(np.full((2, 1), np.nan), cl.complete_graph(2), backend)

    def test_feature_set_is_flattened(self, backend):
        blocks = np.random.default_rng(0).random((5, 3, 2))
        fs = FeatureSet(blocks, np.arange(5))
        a = cl.ward_constrained(fs, cl.complete_graph(5), backend)
        b = cl.ward_constrained(blocks.reshape(5, 6), cl.complete_graph(5), backend)
        np.testing.assert_array_equal(a.children, b.children)

    @given(seed=st.integers(0, 10_000), n=st.integers(2, 8), p=st.floats(0.2, 1.0))
    @settings(max_examples=60)
    def test_matches_brute_force(self, backend, seed, n, p):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, 2))
        edges = np.array([e for e in itertools.combinations(range(n), 2)
                          if rng.random() < p], dtype=np.int64).reshape(-1, 2)
        graph = cl.ConnectivityGraph(n, edges)
        den = cl.ward_constrained(pts, graph, backend)
        assert [tuple(c) for c in den.children] == brute_force_greedy(pts, edges)
        assert den.component_count == graph.component_count()
        # each merge joins clusters with an original edge between them
        members = {i: {i} for i in range(n)}
        edge_set = {frozenset(e) for e in map(tuple, edges)}
        for s, (a, b) in enumerate(den.children):
            assert any(frozenset((x, y)) in edge_set for x in members[a] for y in members[b])
            members[n + s] = members.pop(a) | members.pop(b)

    @given(seed=st.integers(0, 10_000), n=st.integers(2, 8))
    def test_complete_graph_matches_unconstrained_ward(self, backend, seed, n):
        pts = np.random.default_rng(seed).normal(size=(n, 3))
        den = cl.ward_constrained(pts, cl.complete_graph(n), backend)
        Z = linkage(pts, method="ward")
        ref = np.sort(Z[:, :2].astype(int), axis=1)
        np.testing.assert_array_equal(den.children, ref)
        # scipy reports sqrt(2 * cost)
        np.testing.assert_allclose(np.sqrt(2 * den.costs), Z[:, 2], rtol=1e-9)


@pytest.mark.skipif("compiled" not in cl.KERNELS, reason="extension not built")
def test_backends_agree_on_grid():
    side = 25
    rng = np.random.default_rng(1)
    pts = rng.random((side * side, 4)).round(1)  # rounding forces many ties
    ids = np.arange(side * side).reshape(side, side)
    edges = np.concatenate([
        np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1),
        np.stack([ids[:-1].ravel(), ids[1:].ravel()], axis=1)])
    g = cl.ConnectivityGraph(side * side, edges)
    a = cl.ward_constrained(pts, g, "compiled")
    b = cl.ward_constrained(pts, g, "python")
    np.testing.assert_array_equal(a.children, b.children)
    np.testing.assert_array_equal(a.costs, b.costs)
    np.testing.assert_array_equal(a.sizes, b.sizes)


class TestCut:
    def den(self, n=7, seed=0):
        pts = np.random.default_rng(seed).normal(size=(n, 2))
        return cl.ward_constrained(pts, cl.ConnectivityGraph(n, path_edges(n)))

    def test_extremes(self):
        d = self.den()
        np.testing.assert_array_equal(cl.cut(d, 7), np.arange(1, 8))
        np.testing.assert_array_equal(cl.cut(d, 1), np.ones(7))

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            cl.cut(self.den(), 0)
        with pytest.raises(ValidationError):
            cl.cut(self.den(), 8)

    def test_labels_numbered_by_first_member(self):
        pts = np.array([[10.0], [0.0], [0.1], [10.1]])
        d = cl.ward_constrained(pts, cl.complete_graph(4))
        np.testing.assert_array_equal(cl.cut(d, 2), [1, 2, 2, 1])

    @given(seed=st.integers(0, 10_000), n=st.integers(2, 12))
    def test_nesting(self, seed, n):
        d = self.den(n, seed)
        for k in range(2, n + 1):
            fine, coarse = cl.cut(d, k), cl.cut(d, k - 1)
            assert len(np.unique(fine)) == k
            for lab in np.unique(fine):
                assert len(np.unique(coarse[fine == lab])) == 1

    def test_separated_blobs(self):
        rng = np.random.default_rng(2)
        truth = np.repeat([0, 1, 2], 10)
        pts = rng.normal(scale=0.1, size=(30, 2)) + np.array([[0, 0], [5, 0], [0, 5]])[truth]
        labels = cl.cut(cl.ward_constrained(pts, cl.complete_graph(30)), 3)
        assert adjusted_rand_score(truth, labels) == 1.0
