import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keynode.labeling import (
    BinSpec,
    DegenerateInputError,
    LabelingError,
    SelectionError,
    baseline_bins,
    fixed_bins_top_percent,
    save_labelset,
    select_k,
    smart_bins_dp_exact,
    smart_bins_kmeans,
)

import oracles


class TestSmartKmeans:
    def test_separated_clusters(self):
        ls = smart_bins_kmeans([0.0, 0.1, 10.0, 10.1], k=2, seed=1)
        assert list(ls.labels) == [0, 0, 1, 1]
        assert ls.centroids == pytest.approx([0.05, 10.05])

    def test_top_class_holds_largest(self):
        rng = np.random.Generator(np.random.PCG64(2))
        values = np.concatenate([rng.normal(0, 1, 200), rng.normal(20, 1, 20)])
        ls = smart_bins_kmeans(values, k=2, seed=0)
        top = values[ls.labels == 1]
        rest = values[ls.labels == 0]
        assert top.min() > rest.max()

    def test_fewer_distinct_values_than_k(self):
        with pytest.raises(DegenerateInputError):
            smart_bins_kmeans([1.0, 1.0, 1.0, 2.0], k=3, seed=0)

    def test_deterministic_for_seed(self):
        rng = np.random.Generator(np.random.PCG64(5))
        values = rng.random(300)
        a = smart_bins_kmeans(values, k=4, seed=9)
        b = smart_bins_kmeans(values, k=4, seed=9)
        assert np.array_equal(a.labels, b.labels)

    def test_contiguity_in_value_order(self):
        rng = np.random.Generator(np.random.PCG64(7))
        values = rng.random(500)
        ls = smart_bins_kmeans(values, k=3, seed=3)
        order = np.argsort(values, kind="stable")
        assert (np.diff(ls.labels[order]) >= 0).all()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_lloyd_close_to_exact(self, data_seed, k):
        rng = np.random.Generator(np.random.PCG64(data_seed))
        values = rng.random(60 + data_seed % 200)
        lloyd = smart_bins_kmeans(values, k=k, seed=data_seed)
        exact = smart_bins_dp_exact(values, k=k)
        assert lloyd.inertia <= 1.01 * exact.inertia + 1e-12


class TestDpExact:
    def test_obvious_split(self):
        ls = smart_bins_dp_exact([1.0, 2.0, 9.0, 10.0], k=2)
        assert list(ls.labels) == [0, 0, 1, 1]

    def test_zero_inertia_when_k_equals_distinct(self):
        values = [3.0, 1.0, 2.0, 1.0, 3.0]
        ls = smart_bins_dp_exact(values, k=3)
        assert ls.inertia == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_enumeration(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        values = list(rng.random(9 + seed % 4))
        k = 2 + seed % 3
        ls = smart_bins_dp_exact(values, k=k)
        labels, inertia = oracles.kmeans_1d_exhaustive(values, k)
        assert ls.inertia == pytest.approx(inertia, abs=1e-9)
        assert list(ls.labels) == labels

    def test_never_worse_than_lloyd(self):
        rng = np.random.Generator(np.random.PCG64(11))
        for _ in range(10):
            values = rng.random(50)
            exact = smart_bins_dp_exact(values, k=4)
            lloyd = smart_bins_kmeans(values, k=4, seed=1)
            assert exact.inertia <= lloyd.inertia + 1e-9

    def test_centroid_ordering(self):
        rng = np.random.Generator(np.random.PCG64(13))
        ls = smart_bins_dp_exact(rng.random(80), k=5)
        assert (np.diff(ls.centroids) > 0).all()


class TestFixedBins:
    def test_exact_quantile(self):
        values = np.arange(1.0, 101.0)
        ls = fixed_bins_top_percent(values, 0.05)
        assert set(values[ls.labels == 1]) == {96, 97, 98, 99, 100}

    def test_tie_rule_includes_all(self):
        ls = fixed_bins_top_percent([0.0, 0.0, 5.0, 5.0, 5.0], 0.2)
        assert list(ls.labels) == [0, 0, 1, 1, 1]

    def test_constant_vector_errors(self):
        with pytest.raises(DegenerateInputError):
            fixed_bins_top_percent([2.0] * 10, 0.05)

    def test_param_validation(self):
        with pytest.raises(LabelingError):
            fixed_bins_top_percent([1.0, 2.0], 0.0)


class TestBaselineBins:
    def test_quantile_equal_counts(self):
        values = np.arange(1.0, 101.0)
        ls = baseline_bins(values, 4, "quantile")
        assert list(np.bincount(ls.labels)) == [25, 25, 25, 25]

    def test_uniform_width_split(self):
        ls = baseline_bins([0.0, 1.0, 2.0, 100.0], 2, "uniform")
        assert list(ls.labels) == [0, 0, 0, 1]

    def test_uniform_empty_bins_merged(self):
        with pytest.warns(UserWarning):
            ls = baseline_bins([0.0, 0.1, 0.2, 100.0], 4, "uniform")
        assert sorted(set(ls.labels.tolist())) == list(range(ls.n_classes))

    def test_skewed_uniform_top_bin_much_smaller(self):
        rng = np.random.Generator(np.random.PCG64(3))
        values = rng.exponential(1.0, 3000)
        uni = baseline_bins(values, 3, "uniform")
        qua = baseline_bins(values, 3, "quantile")
        top_uni = (uni.labels == uni.n_classes - 1).mean()
        top_qua = (qua.labels == qua.n_classes - 1).mean()
        assert top_uni < top_qua / 3

    def test_constant_vector(self):
        with pytest.raises(DegenerateInputError):
            baseline_bins([1.0] * 5, 2, "quantile")


class TestSelectK:
    def test_two_point_dataset(self):
        values = [0.0] * 50 + [1.0] * 50
        assert select_k(values, k_max=5, min_bin_size=10) == 2

    def test_uniform_thousand_supports_five(self):
        rng = np.random.Generator(np.random.PCG64(4))
        assert select_k(rng.random(1000), k_max=5, min_bin_size=10) == 5

    def test_tiny_input_errors(self):
        with pytest.raises(SelectionError):
            select_k([1.0, 2.0, 3.0], k_max=3, min_bin_size=10)

    def test_skewed_data_backs_off(self):
        # one extreme outlier forces a singleton top bin at every k >= 3
        values = np.concatenate([np.zeros(30), np.ones(30), [1000.0] * 10])
        k = select_k(values, k_max=5, min_bin_size=10)
        assert k == 3


class TestLabelSetInvariants:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_sorted_values_give_nondecreasing_labels(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        values = rng.normal(0, 1, 120)
        for make in (
            lambda: smart_bins_kmeans(values, 3, seed=seed),
            lambda: smart_bins_dp_exact(values, 3),
        ):
            ls = make()
            order = np.argsort(values, kind="stable")
            assert (np.diff(ls.labels[order]) >= 0).all()
            assert (np.diff(ls.centroids) > 0).all()

    def test_binspec_validation(self):
        with pytest.raises(LabelingError):
            BinSpec("nope", 2)
        with pytest.raises(LabelingError):
            BinSpec("smart_kmeans", 1)
        with pytest.raises(LabelingError):
            BinSpec("fixed_top_percent", 2, None)


class TestPersistence:
    def test_save_labelset(self, tmp_path):
        ls = smart_bins_kmeans([0.0, 0.1, 10.0, 10.1], k=2, seed=1)
        ls.source_task = "influence_range"
        ls.threshold = 0.2
        save_labelset(ls, nodes=[0, 1, 2, 3], csv_path=tmp_path / "l.csv",
                      json_path=tmp_path / "l.json", seed=1)
        lines = (tmp_path / "l.csv").read_text().strip().split("\n")
        assert lines[0] == "node,threshold,task,label"
        assert lines[1] == "0,0.2,influence_range,0"
        meta = json.loads((tmp_path / "l.json").read_text())
        assert meta["method"] == "smart_kmeans"
        assert meta["k"] == 2
        assert len(meta["centroids"]) == 2
