import numpy as np
import pytest

from relulens.data import gen_cocircles, group_split
from relulens.docio import canonical_dumps
from relulens.errors import InfeasibleError, InputError, StaleIndexError
from relulens.metrics import auc
from relulens.network import forward_batch, load_network, save_network, sigmoid
from relulens.simplify import (
    flatten,
    logistic_objective,
    merge_regions,
    merged_from_document,
    merged_table,
    merged_to_document,
    predict_merged,
    predict_merged_batch,
    refit_local,
    silhouette_scan,
    weighted_kmeans,
)
from relulens.train import TrainConfig, train
from relulens.unwrap import unwrap

from conftest import make_random_network


def independent_gradient(w, b, X, y, C):
    """Fresh gradient of (1/C) * 0.5 ||w||^2 + sum log-loss, written from scratch."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
    residual = p - y
    return np.concatenate([X.T @ residual + w / C, [residual.sum()]])


@pytest.fixture
def cocircles_setup():
    X, y = gen_cocircles(1200, seed=11)
    tr, va, te = group_split(np.arange(1200), seed=11)
    net = train(TrainConfig(hidden=(6, 6), max_epochs=80, seed=11), X[tr], y[tr], X[va], y[va])
    rs = unwrap(net, X[tr])
    return net, rs, X, y, tr, te


class TestRefitLocal:
    def test_all_negative_labels_bounded(self, rng):
        X = rng.normal(size=(200, 3))
        affine = refit_local(X, np.zeros(200, dtype=int), C=1000.0)
        assert np.linalg.norm(affine.w) < 1.0
        assert -40.0 < affine.b < -5.0  # strongly negative but finite

    def test_separated_data_stays_finite(self):
        X = np.linspace(-2, 2, 40)[:, None]
        y = (X[:, 0] > 0).astype(int)
        affine = refit_local(X, y, C=0.1)
        assert np.all(np.isfinite(affine.w)) and np.isfinite(affine.b)

    def test_kkt_on_separable_blob(self, rng):
        X = np.vstack([rng.normal(-2, 0.5, size=(100, 2)), rng.normal(2, 0.5, size=(100, 2))])
        y = np.array([0] * 100 + [1] * 100)
        affine = refit_local(X, y, C=0.1)
        g = independent_gradient(affine.w, affine.b, X, y, 0.1)
        assert np.abs(g).max() <= 1e-8

    def test_beats_trivial_intercept_model(self, rng):
        X = rng.normal(size=(300, 2))
        y = (X[:, 0] + 0.3 * rng.normal(size=300) > 0).astype(int)
        C = 0.5
        affine = refit_local(X, y, C=C)
        fitted = logistic_objective(affine.w, affine.b, X, y.astype(float), C)
        p = y.mean()
        trivial = logistic_objective(np.zeros(2), np.log(p / (1 - p)), X, y.astype(float), C)
        assert fitted <= trivial

    def test_bad_inputs(self):
        with pytest.raises(InputError):
            refit_local(np.empty((0, 2)), np.empty(0, dtype=int))
        with pytest.raises(InputError):
            refit_local([[1.0]], [1], C=0.0)


class TestWeightedKmeans:
    def test_k_equals_n_gives_singletons(self, rng):
        points = rng.normal(size=(6, 3))
        labels, centers, inertia = weighted_kmeans(points, np.ones(6), k=6, seed=0)
        assert sorted(labels.tolist()) == list(range(6))
        assert inertia == pytest.approx(0.0, abs=1e-12)

    def test_deterministic(self, rng):
        points = rng.normal(size=(40, 2))
        weights = rng.integers(1, 10, size=40).astype(float)
        a = weighted_kmeans(points, weights, k=4, seed=9)
        b = weighted_kmeans(points, weights, k=4, seed=9)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_weight_pulls_centroid(self):
        points = np.array([[0.0], [1.0], [10.0]])
        labels, centers, _ = weighted_kmeans(points, np.array([1.0, 100.0, 1.0]), k=1, seed=0)
        assert centers[0, 0] == pytest.approx((0 + 100 + 10) / 102)

    def test_infeasible_k(self):
        with pytest.raises(InfeasibleError):
            weighted_kmeans(np.zeros((3, 2)), np.ones(3), k=4, seed=0)


class TestMergeRegions:
    def test_k_equals_regions_is_identity_partition(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        k = len(rs)
        merged = merge_regions(rs, X[tr], y[tr], k=k, seed=3)
        assert merged.k == k
        assert all(len(c.member_patterns) == 1 for c in merged.clusters)
        by_pattern = {c.member_patterns[0]: c for c in merged.clusters}
        for region in rs.regions:
            cluster = by_pattern[region.pattern]
            assert np.array_equal(cluster.sample_indices, region.sample_indices)
            expected = refit_local(X[tr][region.sample_indices], y[tr][region.sample_indices], C=0.1)
            assert np.allclose(cluster.refit.w, expected.w) and cluster.refit.b == expected.b

    def test_k1_is_global_refit(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=1, C=0.2, seed=0)
        expected = refit_local(X[tr], y[tr], C=0.2)
        assert np.allclose(merged.clusters[0].refit.w, expected.w)
        assert merged.clusters[0].refit.b == pytest.approx(expected.b)

    def test_partition_of_samples(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        pooled = np.concatenate([c.sample_indices for c in merged.clusters])
        assert np.array_equal(np.sort(pooled), np.arange(len(tr)))
        assert sum(c.count for c in merged.clusters) == len(tr)
        assert set(merged.lookup) == {r.pattern for r in rs.regions}

    def test_infeasible_k(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        with pytest.raises(InfeasibleError):
            merge_regions(rs, X[tr], y[tr], k=len(rs) + 1)

    def test_deterministic_documents(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        doc1 = merged_to_document(merge_regions(rs, X[tr], y[tr], k=3, seed=7))
        doc2 = merged_to_document(merge_regions(rs, X[tr], y[tr], k=3, seed=7))
        assert canonical_dumps(doc1) == canonical_dumps(doc2)

    def test_document_roundtrip(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=4, seed=1)
        loaded = merged_from_document(merged_to_document(merged))
        assert canonical_dumps(merged_to_document(loaded)) == canonical_dumps(
            merged_to_document(merged)
        )

    def test_merged_table_same_columns(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        rows = merged_table(merged, X[tr], y[tr])
        assert [r.region_id for r in rows] == [0, 1, 2]
        assert sum(r.count for r in rows) == len(tr)
        counts = [r.count for r in rows]
        assert counts == sorted(counts, reverse=True)


class TestPredictMerged:
    def test_training_sample_routes_to_its_region_cluster(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        x = X[tr][17]
        _, cluster_id = predict_merged(merged, net, x)
        pattern = rs.regions[[i for i, r in enumerate(rs.regions) if 17 in r.sample_indices][0]].pattern
        assert merged.lookup[pattern] == cluster_id

    def test_k1_scores_with_single_refit(self, cocircles_setup):
        net, rs, X, y, tr, te = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=1, seed=0)
        logit, cid = predict_merged(merged, net, X[te][0])
        assert cid == 0
        assert logit == pytest.approx(merged.clusters[0].refit(X[te][0]))

    def test_holdout_end_to_end(self, cocircles_setup):
        net, rs, X, y, tr, te = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        logits, ids = predict_merged_batch(merged, net, X[te])
        assert np.all((0 <= ids) & (ids < 3))
        assert 0.0 <= auc(logits, y[te]) <= 1.0

    def test_fingerprint_mismatch(self, cocircles_setup, rng):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=2, seed=0)
        other = make_random_network(rng, [2, 4, 1])
        with pytest.raises(StaleIndexError):
            predict_merged(merged, other, X[0])


class TestFlatten:
    def test_k1_positive_region_is_monotone_transform(self):
        # labels independent of x with a 4:1 positive skew: the single refit
        # is near-constant with a clearly positive intercept, so the ReLU
        # never clips and the output layer is affine in the LLM logit
        rng = np.random.default_rng(2)
        X = rng.uniform(0.5, 2.0, size=(200, 1))
        y = (rng.random(200) < 0.8).astype(int)
        net = train(TrainConfig(hidden=(3,), max_epochs=40, seed=2), X, y, X, y)
        rs = unwrap(net, X)
        merged = merge_regions(rs, X, y, k=1, seed=0)
        hinge_logits = merged.clusters[0].refit.batch(X)
        assume_positive = hinge_logits.min() > 0
        assert assume_positive, "construction should give positive refit logits"
        flat = flatten(merged, X, y)
        flat_logits, _ = forward_batch(flat, X)
        order_a = np.argsort(hinge_logits, kind="stable")
        order_b = np.argsort(flat_logits, kind="stable")
        out_weight = flat.layers[1].weights[0, 0]
        assert np.array_equal(order_a, order_b if out_weight > 0 else order_b[::-1])

    def test_flatnet_is_valid_network(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        flat = flatten(merged, X[tr], y[tr])
        assert flat.hidden_widths == (3,)
        reloaded = load_network(save_network(flat))
        a, _ = forward_batch(flat, X[tr][:50])
        b, _ = forward_batch(reloaded, X[tr][:50])
        assert np.array_equal(a, b)

    def test_flatnet_unwrappable_with_bounded_regions(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        flat = flatten(merged, X[tr], y[tr])
        assert len(unwrap(flat, X[tr])) <= 2**3

    def test_output_kkt(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        merged = merge_regions(rs, X[tr], y[tr], k=3, seed=5)
        flat = flatten(merged, X[tr], y[tr], C=0.3)
        hidden = np.maximum(X[tr] @ flat.layers[0].weights.T + flat.layers[0].bias, 0.0)
        g = independent_gradient(
            flat.layers[1].weights[0], flat.layers[1].bias[0], hidden, y[tr], 0.3
        )
        assert np.abs(g).max() <= 1e-8


class TestSilhouette:
    def test_scores_in_range_and_k_order(self, cocircles_setup):
        net, rs, X, y, tr, _ = cocircles_setup
        results = silhouette_scan(rs, k_values=range(2, 6), seed=0)
        assert [k for k, _ in results] == [2, 3, 4, 5]
        assert all(-1.0 <= s <= 1.0 for _, s in results)
