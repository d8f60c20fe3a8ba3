import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lccgen import lcc
from lccgen.lcc import Coding, Dictionary
from lccgen.numeric import ShapeError, make_rng


def grid_oracle(v1, v2, h, l_h, l_g, lo=-1.0, hi=2.0, step=1e-4):
    """Exhaustive search over gamma_2 with gamma_1 = 1 - gamma_2."""
    g2 = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    g1 = 1.0 - g2
    r = g1[:, None] * v1 + g2[:, None] * v2
    value = (2 * l_h * np.sum((h - r) ** 2, axis=1)
             + l_g * (np.abs(g1) * np.sum((v1 - h) ** 2) + np.abs(g2) * np.sum((v2 - h) ** 2)))
    k = int(np.argmin(value))
    return np.array([g1[k], g2[k]]), k, len(g2)


def naive_objective(anchors, H, gammas, l_h, l_g, squared=True):
    total = 0.0
    for h, g in zip(H, gammas):
        r = [0.0] * len(h)
        for j, w in enumerate(g):
            for k in range(len(h)):
                r[k] += w * anchors[j][k]
        resid = sum((h[k] - r[k]) ** 2 for k in range(len(h)))
        first = resid if squared else resid ** 0.5
        loc = 0.0
        for j, w in enumerate(g):
            loc += abs(w) * sum((anchors[j][k] - h[k]) ** 2 for k in range(len(h)))
        total += 2 * l_h * first + l_g * loc
    return total


def swiss_latent(n=500, seed=0):
    from lccgen.data import ManifoldSpec, generate, normalize

    x = normalize(generate(ManifoldSpec("swiss_roll", seed=seed), n)).samples
    return 0.9 * x[:, [0, 2]]


class TestDictionary:
    def test_needs_two_distinct_finite_anchors(self):
        with pytest.raises(ValueError):
            Dictionary(np.zeros((1, 2)))
        with pytest.raises(ValueError):
            Dictionary(np.array([[0.0, 1.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            Dictionary(np.array([[0.0], [np.nan]]))

    def test_columns_of_v_are_anchors(self):
        d = Dictionary(np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]))
        assert d.M == 3 and d.latent_dim == 2
        np.testing.assert_array_equal(d.V[:, 1], [2.0, 3.0])

    def test_coding_origin_checked(self):
        with pytest.raises(ValueError):
            Coding(np.ones(2), origin="guessed")


class TestReconstruct:
    def test_midpoint(self):
        d = Dictionary(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_array_equal(lcc.reconstruct(d, Coding([0.5, 0.5])), [1.0, 0.0])

    def test_one_hot_selects_anchor(self):
        d = Dictionary(make_rng(0).normal(size=(5, 3)))
        for j in range(5):
            np.testing.assert_array_equal(lcc.reconstruct(d, np.eye(5)[j]), d.anchors[j])

    def test_matches_loop_oracle(self):
        rng = make_rng(1)
        d = Dictionary(rng.normal(size=(7, 4)))
        g = rng.normal(size=7)
        expected = [sum(g[j] * d.anchors[j, k] for j in range(7)) for k in range(4)]
        np.testing.assert_allclose(lcc.reconstruct(d, g), expected, rtol=0, atol=1e-12)

    def test_length_mismatch(self):
        d = Dictionary(np.array([[0.0], [1.0]]))
        with pytest.raises(ShapeError):
            lcc.reconstruct(d, np.ones(3))


class TestObjective:
    def test_zero_at_anchors(self):
        anchors = make_rng(2).normal(size=(4, 2))
        assert lcc.objective(Dictionary(anchors), anchors, np.eye(4)) == 0.0

    def test_substitution_value_three(self):
        d = Dictionary(np.array([[1.0, 0.0], [5.0, 5.0]]))
        assert lcc.objective(d, np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]])) == pytest.approx(3.0, abs=1e-15)

    @pytest.mark.parametrize("squared", [True, False])
    def test_matches_naive_loop(self, squared):
        rng = make_rng(3)
        anchors, H, G = rng.normal(size=(5, 3)), rng.normal(size=(9, 3)), rng.normal(size=(9, 5))
        d = Dictionary(anchors, 1.3, 0.7)
        expected = naive_objective(anchors.tolist(), H.tolist(), G.tolist(), 1.3, 0.7, squared)
        assert lcc.objective(d, H, G, squared=squared) == pytest.approx(expected, rel=0, abs=1e-12)


class TestAffineProx:
    def test_matches_bisection_oracle(self):
        rng = make_rng(4)
        U, tau = rng.normal(size=(100, 9)), 0.5 * np.abs(rng.normal(size=(100, 9)))
        G = lcc.affine_soft_threshold(U, tau)
        for u, t, g in zip(U, tau, G):
            lo, hi = -50.0, 50.0
            for _ in range(200):
                nu = 0.5 * (lo + hi)
                total = np.sum(np.sign(u - nu) * np.maximum(np.abs(u - nu) - t, 0))
                lo, hi = (nu, hi) if total > 1 else (lo, nu)
            nu = 0.5 * (lo + hi)
            np.testing.assert_allclose(g, np.sign(u - nu) * np.maximum(np.abs(u - nu) - t, 0), atol=1e-12)
        np.testing.assert_allclose(G.sum(axis=1), 1.0, atol=1e-12)

    def test_zero_threshold_is_affine_projection(self):
        u = np.array([[0.2, 0.4, 1.0]])
        np.testing.assert_allclose(lcc.affine_soft_threshold(u, np.zeros_like(u)), u - (u.sum() - 1) / 3, atol=1e-15)


class TestCodePoint:
    def test_two_anchor_grid_oracle(self):
        d = Dictionary(np.array([[0.0], [1.0]]))
        c = lcc.code_point(d, [0.3])
        oracle, _, _ = grid_oracle(np.array([0.0]), np.array([1.0]), np.array([0.3]), 1.0, 1.0)
        np.testing.assert_allclose(oracle, [0.8, 0.2], atol=1e-4)
        np.testing.assert_allclose(c.gamma, [0.8, 0.2], atol=1e-3)
        assert c.origin == "optimized" and c.converged

    def test_random_two_anchor_instances(self):
        rng = make_rng(5)
        for _ in range(50):
            dim = int(rng.integers(1, 4))
            v1, v2 = rng.normal(size=dim), rng.normal(size=dim)
            h = v1 + rng.uniform(-0.5, 1.5) * (v2 - v1) + 0.2 * rng.normal(size=dim)
            l_h, l_g = rng.uniform(0.5, 2.0, size=2)
            oracle, k, n = grid_oracle(v1, v2, h, l_h, l_g)
            assert 0 < k < n - 1  # optimum is interior to the searched range
            c = lcc.code_point(Dictionary(np.stack([v1, v2]), l_h, l_g), h)
            np.testing.assert_allclose(c.gamma, oracle, atol=1e-3)

    def test_anchor_hit(self):
        anchors = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [-10.0, -10.0]])
        d = Dictionary(anchors)
        c = lcc.code_point(d, anchors[2])
        np.testing.assert_allclose(c.gamma, np.eye(4)[2], atol=1e-9)
        assert lcc.objective(d, anchors[2:3], c.gamma[None]) < 1e-12

    def test_rejects_bad_points(self):
        d = Dictionary(np.array([[0.0], [1.0]]))
        with pytest.raises(ShapeError):
            lcc.code_point(d, [np.nan])
        with pytest.raises(ShapeError):
            lcc.code_point(d, [0.0, 1.0])

    def test_iteration_cap_sets_flag(self):
        rng = make_rng(6)
        d = Dictionary(rng.normal(size=(12, 3)))
        H = rng.normal(size=(40, 3))
        G, conv = lcc.code_points(d, H, max_iters=1)
        assert not conv.all()
        np.testing.assert_allclose(G.sum(axis=1), 1.0, atol=1e-9)

    def test_candidate_restriction_matches_full_solve(self):
        rng = make_rng(7)
        d = Dictionary(rng.uniform(-1, 1, size=(30, 2)), 1.0, 0.3)
        H = rng.uniform(-1, 1, size=(200, 2))
        fast, _ = lcc.code_points(d, H)
        full, _ = lcc.code_points(d, H, n_candidates=30)
        assert lcc.objective(d, H, fast) == pytest.approx(lcc.objective(d, H, full), rel=1e-9)
        assert np.all(lcc.kkt_violation(d.anchors, H, fast, lcc.pairwise_sq_dists(H, d.anchors), 1.0, 0.3) < 1e-6)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 100_000), M=st.integers(2, 12), dim=st.integers(1, 4),
           l_h=st.floats(0.1, 5.0), l_g=st.floats(0.1, 5.0))
    def test_constraint_and_uniform_bound(self, seed, M, dim, l_h, l_g):
        rng = make_rng(seed)
        d = Dictionary(rng.normal(size=(M, dim)), l_h, l_g)
        H = rng.normal(size=(8, dim))
        G, _ = lcc.code_points(d, H)
        np.testing.assert_allclose(G.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        uniform = np.full((1, M), 1.0 / M)
        for h, g in zip(H, G):
            assert lcc.objective(d, h[None], g[None]) <= lcc.objective(d, h[None], uniform) + 1e-9


class TestKmeans:
    def test_recovers_separated_clusters(self):
        rng = make_rng(8)
        centers = np.array([[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]])
        X = np.concatenate([c + 0.1 * rng.normal(size=(50, 2)) for c in centers])
        found, events = lcc.kmeans(X, 3, seed=0)
        assert events == []
        d = np.linalg.norm(found[:, None] - centers[None], axis=2)
        assert np.all(d.min(axis=0) < 0.1)

    def test_empty_cluster_reseeded_and_logged(self):
        X = np.array([[0.0], [0.1], [1.0], [1.1]])
        found, events = lcc.kmeans(X, 3, seed=0, iters=1, init=np.array([[0.0], [1.0], [100.0]]))
        assert len(events) == 1 and "cluster 2 empty" in events[0]
        assert found[2, 0] in X[:, 0]


class TestLearnDictionary:
    def test_interpolates_m_distinct_points(self):
        H = make_rng(9).uniform(-1, 1, size=(6, 2))
        fit = lcc.learn_dictionary(H, 6, outer_iters=5, seed=0)
        assert fit.trace[-1] < 1e-6
        d = lcc.pairwise_sq_dists(fit.dictionary.anchors, H)
        assert np.all(np.sqrt(d.min(axis=0)) < 1e-6)

    def test_trace_monotone_and_constraint(self):
        H = swiss_latent(500)
        dictionary, gammas, trace = lcc.learn_dictionary(H, 16, outer_iters=15, seed=1)
        assert len(trace) == 15
        for a, b in zip(trace, trace[1:]):
            assert b <= a * (1 + 1e-8)
        np.testing.assert_allclose(gammas.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        assert dictionary.M == 16

    def test_unsquared_trace_reported(self):
        fit = lcc.learn_dictionary(swiss_latent(200), 4, outer_iters=3, seed=0)
        assert len(fit.unsquared_trace) == 3
        assert fit.unsquared_trace[-1] == pytest.approx(
            lcc.objective(fit.dictionary, swiss_latent(200), fit.gammas, squared=False))

    def test_capacity_in_m(self):
        H = swiss_latent(600, seed=2)
        errs = []
        for M in (4, 16, 64):
            fit = lcc.learn_dictionary(H, M, outer_iters=10, seed=0)
            errs.append(lcc.mean_reconstruction_error(fit.dictionary, H, fit.gammas))
        assert errs[0] > errs[1] > errs[2]

    def test_locality(self):
        H = swiss_latent(500, seed=3)
        fit = lcc.learn_dictionary(H, 16, outer_iters=10, seed=0)
        d_int = 2
        nearest = np.argsort(lcc.pairwise_sq_dists(H, fit.dictionary.anchors), axis=1, kind="stable")[:, :2 * d_int]
        top = np.argsort(-np.abs(fit.gammas), axis=1, kind="stable")[:, :d_int]
        ok = []
        for t, n, g in zip(top, nearest, fit.gammas):
            t = [j for j in t if g[j] != 0]
            ok.append(set(t) <= set(n))
        assert np.mean(ok) >= 0.95

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            lcc.learn_dictionary(np.zeros((3, 2)), 4)
        with pytest.raises(ValueError):
            lcc.learn_dictionary(np.zeros((3, 2)), 1)

    def test_duplicate_data_needs_distinct_points(self):
        with pytest.raises(ValueError):
            lcc.learn_dictionary(np.zeros((10, 2)), 3, outer_iters=1)

    def test_deterministic(self):
        H = swiss_latent(200)
        a = lcc.learn_dictionary(H, 8, outer_iters=3, seed=4)
        b = lcc.learn_dictionary(H, 8, outer_iters=3, seed=4)
        np.testing.assert_array_equal(a.dictionary.anchors, b.dictionary.anchors)
        np.testing.assert_array_equal(a.gammas, b.gammas)


class TestSerialization:
    def test_dictionary_round_trip(self, tmp_path):
        d = Dictionary(make_rng(10).normal(size=(4, 3)), 0.1, 1.0 / 3.0)
        lcc.save_dictionary(d, tmp_path / "dict.json")
        back = lcc.load_dictionary(tmp_path / "dict.json")
        np.testing.assert_array_equal(back.anchors, d.anchors)
        assert back.lipschitz_g == d.lipschitz_g
        assert "0.33333333333333331" in (tmp_path / "dict.json").read_text()
        json.loads((tmp_path / "dict.json").read_text())

    def test_codings_csv_triplets(self, tmp_path):
        G = np.array([[0.8, 0.2, 0.0], [0.0, 0.0, 1.0]])
        lcc.write_codings_csv(G, tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "point,anchor,weight" and len(lines) == 4
        np.testing.assert_array_equal(lcc.read_codings_csv(tmp_path / "c.csv", 2, 3), G)
