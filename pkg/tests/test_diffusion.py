import math

import numpy as np
import pytest

from keynode import diffusion, graph
from keynode.diffusion import (
    ThresholdSet,
    load_records,
    records_to_csv,
    run_cascade,
    run_sir_gamma1,
    save_records,
    simulate_all,
    simulate_node,
    simulation_sidecar,
)
from keynode.graph import GraphError, from_edges, generate_synthetic, reachable_set

import oracles
from conftest import random_digraph


class TestRunCascade:
    def test_p_zero_no_propagation(self, star6):
        out = run_cascade(star6, 0, 0.0, rng_seed=1)
        assert (out.range, out.peak, out.peak_time) == (1, 1, 0)

    def test_star_p1(self, star6):
        out = run_cascade(star6, 0, 1.0, rng_seed=7)
        assert (out.range, out.peak, out.peak_time) == (6, 5, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_p1_matches_bfs_level_oracle(self, seed):
        g = random_digraph(30, 0.1, seed=seed)
        adj = oracles.adjacency_from_graph(g)
        for s in range(0, g.n, 3):
            out = run_cascade(g, s, 1.0, rng_seed=seed)
            levels = oracles.bfs_levels(adj, s)
            assert (out.range, out.peak, out.peak_time) == oracles.peak_from_levels(levels)

    def test_deterministic_for_seed(self, star6):
        a = run_cascade(star6, 0, 0.5, rng_seed=123)
        b = run_cascade(star6, 0, 0.5, rng_seed=123)
        assert a == b

    def test_invalid_node(self, star6):
        with pytest.raises(GraphError):
            run_cascade(star6, 99, 0.5, rng_seed=0)

    def test_invalid_probability(self, star6):
        with pytest.raises(ValueError):
            run_cascade(star6, 0, 1.5, rng_seed=0)

    @pytest.mark.parametrize("seed", range(10))
    def test_outcome_invariants(self, seed):
        g = random_digraph(25, 0.15, seed=seed)
        for s in (0, 7, 13):
            out = run_cascade(g, s, 0.4, rng_seed=seed * 17 + s)
            assert 1 <= out.range <= g.n
            assert 1 <= out.peak <= out.range
            assert out.peak_time >= 0
            assert out.range <= len(reachable_set(g, s))


class TestSimulateNode:
    def test_p_zero_means(self, star6):
        rec = simulate_node(star6, 0, 0.0, runs=50, master_seed=3)
        assert (rec.mean_range, rec.mean_peak, rec.mean_peak_time) == (1.0, 1.0, 0.0)
        assert rec.runs == 50

    def test_p1_equals_single_run(self):
        g = from_edges([(0, 1), (0, 2), (1, 3), (2, 3)], n=4, directed=True)
        rec = simulate_node(g, 0, 1.0, runs=10, master_seed=5)
        single = run_cascade(g, 0, 1.0, rng_seed=99)
        assert rec.mean_range == float(single.range)
        assert rec.mean_peak == float(single.peak)
        assert rec.mean_peak_time == float(single.peak_time)

    def test_two_node_closed_form(self):
        # a -> b with p=0.3: E[range] = 1 + p
        g = from_edges([(0, 1)], n=2, directed=True)
        runs = 10000
        rec = simulate_node(g, 0, 0.3, runs=runs, master_seed=11)
        se = math.sqrt(0.3 * 0.7 / runs)
        assert abs(rec.mean_range - 1.3) <= 3 * se

    def test_order_independence_of_master_stream(self, star6):
        # each run is a pure function of (master, node, t_idx, run)
        rec1 = simulate_node(star6, 2, 0.5, runs=30, master_seed=8, threshold_index=1)
        rec2 = simulate_node(star6, 2, 0.5, runs=30, master_seed=8, threshold_index=1)
        assert rec1 == rec2


class TestSimulateAll:
    def test_record_cardinality(self):
        g = random_digraph(12, 0.2, seed=2)
        recs = simulate_all(g, ThresholdSet.citation(), runs=5, master_seed=1)
        assert len(recs) == 12 * 3

    def test_single_node_graph(self):
        g = from_edges([], n=1, directed=True)
        recs = simulate_all(g, ThresholdSet.citation(), runs=5, master_seed=1)
        assert len(recs) == 3
        assert all(r.mean_range == 1.0 for r in recs)

    def test_thread_count_does_not_change_bytes(self):
        g = random_digraph(30, 0.12, seed=4)
        ts = ThresholdSet.social()
        outputs = []
        for threads in (1, 4, 8):
            recs = simulate_all(g, ts, runs=20, master_seed=77, threads=threads)
            outputs.append(records_to_csv(recs).encode())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_progress_reported(self):
        g = random_digraph(10, 0.2, seed=6)
        seen = []
        simulate_all(
            g, ThresholdSet.citation(), runs=2, master_seed=0,
            progress=lambda done, total: seen.append((done, total)),
        )
        assert seen[-1] == (30, 30)

    def test_monotone_in_p(self):
        g = generate_synthetic("erdos_renyi", 60, 0.05, seed=9)
        runs = 400
        lo = simulate_all(g, ThresholdSet((0.1,)), runs=runs, master_seed=13)
        hi = simulate_all(g, ThresholdSet((0.3,)), runs=runs, master_seed=13)
        eps = 4 * math.sqrt(0.25 / runs) * g.n  # generous binomial SE bound
        for a, b in zip(lo, hi):
            assert a.mean_range <= b.mean_range + eps

    def test_mean_range_bounded_by_reachability(self):
        g = random_digraph(25, 0.15, seed=12)
        recs = simulate_all(g, ThresholdSet.citation(), runs=50, master_seed=21)
        for r in recs:
            assert r.mean_range <= len(reachable_set(g, r.node)) + 1e-12


class TestSir:
    def test_beta_zero(self, star6):
        out = run_sir_gamma1(star6, 0, 0.0, rng_seed=5)
        assert out.range == 1

    def test_beta_one_equals_cascade(self):
        g = random_digraph(30, 0.1, seed=3)
        for s in range(0, 30, 5):
            a = run_sir_gamma1(g, s, 1.0, rng_seed=1)
            b = run_cascade(g, s, 1.0, rng_seed=2)
            assert a == b

    def test_statistical_equivalence_small(self):
        # smoke-scale version of the acceptance check
        g = generate_synthetic("erdos_renyi", 40, 0.08, seed=70)
        runs, beta, node = 3000, 0.2, 0
        ic = [run_cascade(g, node, beta, diffusion.derive_run_seed(1, node, 0, r)).range
              for r in range(runs)]
        sir = [run_sir_gamma1(g, node, beta, diffusion.derive_run_seed(2, node, 0, r)).range
               for r in range(runs)]
        m_ic, m_sir = np.mean(ic), np.mean(sir)
        pooled_se = math.sqrt(np.var(ic) / runs + np.var(sir) / runs)
        assert abs(m_ic - m_sir) <= 4 * pooled_se


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        g = random_digraph(8, 0.3, seed=1)
        recs = simulate_all(g, ThresholdSet.citation(), runs=10, master_seed=2)
        save_records(recs, tmp_path / "sim.csv")
        back = load_records(tmp_path / "sim.csv")
        assert back == recs

    def test_bad_header_rejected(self, tmp_path):
        (tmp_path / "junk.csv").write_text("a,b,c\n")
        with pytest.raises(ValueError):
            load_records(tmp_path / "junk.csv")

    def test_sidecar_fields(self):
        g = random_digraph(8, 0.3, seed=1)
        side = simulation_sidecar(g, ThresholdSet.social(), runs=100, master_seed=9)
        assert side["runs"] == 100
        assert side["thresholds"] == [0.1, 0.15, 0.2]
        assert side["graph_checksum"] == g.checksum()
        assert side["rng"] == "splitmix64-v1"


class TestThresholdSet:
    def test_family_defaults(self):
        assert ThresholdSet.citation().values == (0.2, 0.3, 0.4)
        assert ThresholdSet.social().values == (0.1, 0.15, 0.2)

    def test_rejects_empty_and_out_of_range(self):
        with pytest.raises(ValueError):
            ThresholdSet(())
        with pytest.raises(ValueError):
            ThresholdSet((0.0,))
        with pytest.raises(ValueError):
            ThresholdSet((1.2,))
