import numpy as np
import pytest

from keynode.centrality import compute_all_centralities
from keynode.diffusion import ThresholdSet
from keynode.features import (
    FEATURE_NAMES,
    FeatureError,
    FeatureMatrix,
    apply_standardizer,
    assemble_features,
    fit_standardizer,
    invert_standardizer,
    load_features,
    load_scaler,
    save_features,
    save_scaler,
)

from conftest import random_digraph


@pytest.fixture
def small_matrix():
    g = random_digraph(4, 0.4, seed=2)
    maps = compute_all_centralities(g)
    return assemble_features(maps, ThresholdSet.citation())


class TestAssemble:
    def test_cardinality(self, small_matrix):
        assert small_matrix.values.shape == (12, 15)
        assert small_matrix.feature_names == FEATURE_NAMES

    def test_rows_differ_only_in_threshold(self, small_matrix):
        rows = small_matrix.values
        for base in range(0, 12, 3):
            block = rows[base : base + 3]
            assert np.array_equal(block[0, :-1], block[1, :-1])
            assert np.array_equal(block[1, :-1], block[2, :-1])
            assert list(block[:, -1]) == [0.2, 0.3, 0.4]

    def test_missing_measure_named(self):
        g = random_digraph(4, 0.4, seed=2)
        maps = compute_all_centralities(g)
        with pytest.raises(FeatureError, match="pagerank"):
            assemble_features([m for m in maps if m.measure.name != "pagerank"],
                              ThresholdSet.citation())

    def test_inconsistent_lengths(self):
        g1 = random_digraph(4, 0.4, seed=2)
        g2 = random_digraph(5, 0.4, seed=3)
        maps = compute_all_centralities(g1)
        bad = compute_all_centralities(g2)
        mixed = maps[:-1] + [bad[-1]]
        with pytest.raises(FeatureError, match="inconsistent"):
            assemble_features(mixed, ThresholdSet.citation())


class TestStandardizer:
    def test_hand_computed_column(self):
        m = FeatureMatrix(
            values=np.tile(np.array([[1.0], [2.0], [3.0]]), (1, 15)),
            node_ids=np.arange(3),
            thresholds=np.full(3, 0.2),
        )
        scaler = fit_standardizer(m)
        z = apply_standardizer(m, scaler)
        # mu=2, population sigma=sqrt(2/3): (1-2)/sigma = -1.224744871...
        assert z.values[:, 0] == pytest.approx([-1.2247448714, 0.0, 1.2247448714])

    def test_constant_column_flagged_and_passed_through(self, small_matrix):
        scaler = fit_standardizer(small_matrix)
        z = apply_standardizer(small_matrix, scaler)
        # threshold varies; some centrality column may be constant
        const_cols = np.flatnonzero(scaler.constant)
        for c in const_cols:
            assert np.array_equal(z.values[:, c], small_matrix.values[:, c])
        var_cols = np.flatnonzero(~scaler.constant)
        assert np.abs(z.values[:, var_cols].mean(axis=0)).max() < 1e-9
        assert np.abs(z.values[:, var_cols].std(axis=0) - 1).max() < 1e-9

    def test_round_trip(self, small_matrix):
        scaler = fit_standardizer(small_matrix)
        z = apply_standardizer(small_matrix, scaler)
        back = invert_standardizer(z, scaler)
        assert np.abs(back.values - small_matrix.values).max() < 1e-12

    def test_needs_two_rows(self, small_matrix):
        with pytest.raises(FeatureError):
            fit_standardizer(small_matrix.take([0]))


class TestPersistence:
    def test_feature_csv_round_trip(self, tmp_path, small_matrix):
        save_features(small_matrix, tmp_path / "f.csv")
        back = load_features(tmp_path / "f.csv")
        assert np.array_equal(back.values, small_matrix.values)
        assert np.array_equal(back.node_ids, small_matrix.node_ids)

    def test_header_mismatch_rejected(self, tmp_path):
        (tmp_path / "bad.csv").write_text("node,threshold,a,b\n")
        with pytest.raises(FeatureError):
            load_features(tmp_path / "bad.csv")

    def test_scaler_round_trip(self, tmp_path, small_matrix):
        scaler = fit_standardizer(small_matrix)
        save_scaler(scaler, tmp_path / "s.json")
        back = load_scaler(tmp_path / "s.json")
        assert np.array_equal(back.mean, scaler.mean)
        assert np.array_equal(back.std, scaler.std)
        assert np.array_equal(back.constant, scaler.constant)


class TestTake:
    def test_row_subset_keeps_keys_aligned(self, small_matrix):
        sub = small_matrix.take([0, 5, 7])
        assert sub.n_rows == 3
        assert list(sub.node_ids) == [0, 1, 2]
        assert np.array_equal(sub.values[1], small_matrix.values[5])
