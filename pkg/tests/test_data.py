import numpy as np
import pytest
from scipy import stats

from relulens.data import (
    DECREASING_RISK_FEATURE,
    HORIZON_FEATURE,
    INCREASING_RISK_FEATURE,
    Dataset,
    gen_balanced_default,
    gen_cocircles,
    group_split,
    load_dataset,
    write_dataset_csv,
)
from relulens.errors import InfeasibleError, InputError
from relulens.metrics import auc


class TestCoCircles:
    def test_noiseless_inner_radius(self):
        X, y = gen_cocircles(400, noise_sd=0.0, factor=0.5, seed=0)
        inner = np.hypot(X[y == 1, 0], X[y == 1, 1])
        np.testing.assert_allclose(inner, 0.5, rtol=1e-15)
        outer = np.hypot(X[y == 0, 0], X[y == 0, 1])
        np.testing.assert_allclose(outer, 1.0, rtol=1e-15)

    def test_exact_class_balance(self):
        _, y = gen_cocircles(500 * 2, seed=1)
        assert int(y.sum()) == 500

    def test_radial_threshold_oracle(self):
        X, y = gen_cocircles()  # defaults n=2000, factor 0.5, noise 0.1
        threshold = (1 + 0.5) / 2
        scores = threshold - np.hypot(X[:, 0], X[:, 1])  # higher -> inner class
        assert auc(scores, y) >= 0.95

    def test_deterministic_per_seed(self):
        a = gen_cocircles(100, seed=3)
        b = gen_cocircles(100, seed=3)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        c = gen_cocircles(100, seed=4)
        assert not np.array_equal(a[0], c[0])

    @pytest.mark.parametrize(
        "kwargs", [dict(n=3), dict(factor=0.0), dict(factor=1.0), dict(noise_sd=-0.1)]
    )
    def test_input_validation(self, kwargs):
        with pytest.raises(InputError):
            gen_cocircles(**{"n": 100, **kwargs})


class TestBalancedDefault:
    def test_exact_balance(self):
        _, y, _ = gen_balanced_default(2000, seed=0)
        assert int(y.sum()) == 1000

    def test_decreasing_feature_negative_rank_correlation(self):
        X, y, _ = gen_balanced_default(2000, seed=1)
        rho, _ = stats.spearmanr(X[:, DECREASING_RISK_FEATURE], y)
        assert rho < -0.3
        rho_up, _ = stats.spearmanr(X[:, INCREASING_RISK_FEATURE], y)
        assert rho_up > 0.3

    def test_panel_structure(self):
        X, y, gids = gen_balanced_default(1000, d=5, seed=2)
        _, counts = np.unique(gids, return_counts=True)
        assert counts.min() >= 2
        # horizon feature counts observations within each id
        first_group = X[gids == gids[0], HORIZON_FEATURE]
        assert first_group.tolist() == list(range(len(first_group)))

    def test_dimension_validation(self):
        with pytest.raises(InputError):
            gen_balanced_default(100, d=2)
        with pytest.raises(InputError):
            gen_balanced_default(101)


class TestGroupSplit:
    def test_three_groups_one_each(self):
        gids = np.array([0, 0, 1, 1, 2, 2])
        train, val, test = group_split(gids, fractions=(1 / 3, 1 / 3, 1 / 3), seed=0)
        assert len(train) == len(val) == len(test) == 2

    def test_single_group_errors(self):
        with pytest.raises(InfeasibleError):
            group_split(np.zeros(10), fractions=(0.6, 0.2, 0.2), seed=0)

    def test_no_group_straddles_splits(self):
        rng = np.random.default_rng(5)
        sizes = rng.integers(1, 8, size=1000)
        gids = np.repeat(np.arange(1000), sizes)
        parts = group_split(gids, fractions=(0.6, 0.2, 0.2), seed=5)
        as_sets = [set(gids[p]) for p in parts]
        assert not (as_sets[0] & as_sets[1])
        assert not (as_sets[0] & as_sets[2])
        assert not (as_sets[1] & as_sets[2])
        all_rows = np.concatenate(parts)
        assert np.array_equal(np.sort(all_rows), np.arange(len(gids)))

    def test_group_counts_near_fractions(self):
        gids = np.arange(100)
        parts = group_split(gids, fractions=(0.6, 0.2, 0.2), seed=1)
        assert abs(len(parts[0]) - 60) <= 1
        assert abs(len(parts[1]) - 20) <= 1
        assert abs(len(parts[2]) - 20) <= 1

    def test_fraction_validation(self):
        with pytest.raises(InputError):
            group_split(np.arange(10), fractions=(0.5, 0.2), seed=0)
        with pytest.raises(InputError):
            group_split(np.arange(10), fractions=(0.5, -0.1, 0.6), seed=0)

    def test_deterministic(self):
        gids = np.repeat(np.arange(50), 2)
        a = group_split(gids, seed=9)
        b = group_split(gids, seed=9)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa, pb)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        X, y, gids = gen_balanced_default(200, d=4, seed=3)
        path = tmp_path / "data.csv"
        write_dataset_csv(path, X, y, group_ids=gids)
        ds = load_dataset(path)
        np.testing.assert_allclose(ds.X, X)
        assert np.array_equal(ds.y, y)
        assert np.array_equal(ds.group_ids, gids)
        assert ds.feature_names == ["x0", "x1", "x2", "x3"]

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InputError, match="'y'"):
            load_dataset(path)

    def test_non_numeric_feature_names_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\nfoo,1\nbar,0\n")
        with pytest.raises(InputError, match="'a'"):
            load_dataset(path)

    def test_non_binary_labels(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\n1.0,2\n2.0,0\n")
        with pytest.raises(InputError, match="'y'"):
            load_dataset(path)

    def test_feature_index_resolution(self):
        ds = Dataset(
            X=np.zeros((2, 2)), y=np.array([0, 1]), feature_names=["fico", "ltv"], group_ids=None
        )
        assert ds.feature_index("ltv") == 1
        assert ds.feature_index("0") == 0
        with pytest.raises(InputError, match="unknown feature"):
            ds.feature_index("spread")
        with pytest.raises(InputError, match="out of range"):
            ds.feature_index("7")
