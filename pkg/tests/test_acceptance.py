"""Acceptance suite.

Each criterion prints one PASS/FAIL line. Criteria 1-5 run against the
public datasets when edge lists are available (drop them into ./data or
point KEYNODE_DATA_DIR at them, stems 'citeseer' and 'facebook');
otherwise they run the synthetic-surrogate variants. The property suite
(criterion 6) needs no external data and always runs.
"""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from keynode import _cascade_kernels as ck
from keynode.cli import main as cli_main
from keynode.diffusion import ThresholdSet, records_to_csv, simulate_all
from keynode.evaluation import (
    TaskId,
    binning_comparison,
    build_dataset,
    cross_network_eval,
    f1_macro,
    within_network_eval,
)
from keynode.features import apply_standardizer, fit_standardizer
from keynode.graph import generate_synthetic, load_edge_list, reachable_set
from keynode.importance import importance_report, shapley_values_fn
from keynode.labeling import smart_bins_dp_exact, smart_bins_kmeans
from keynode.models import ModelSpec, train
from keynode.models import _logreg
from keynode.rng import derive_seed

import oracles
from conftest import random_digraph
from surrogates import citation_surrogate, social_surrogate, write_edge_list

DATA_DIR = Path(os.environ.get("KEYNODE_DATA_DIR", Path(__file__).resolve().parent.parent / "data"))


def find_dataset(stem):
    if not DATA_DIR.is_dir():
        return None
    for ext in (".txt", ".edges", ".csv", ".cites", ".edgelist", ""):
        p = DATA_DIR / f"{stem}{ext}"
        if p.is_file():
            return p
    return None


CITESEER = find_dataset("citeseer")
FACEBOOK = find_dataset("facebook")


def report(criterion, passed, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def citation_ds():
    """Citeseer when available, otherwise the citation surrogate."""
    if CITESEER:
        g = load_edge_list(CITESEER, directed=True)
        name = "citeseer"
    else:
        g = citation_surrogate(800, seed=5)
        name = "citation-surrogate"
    return build_dataset(g, ThresholdSet.citation(), runs=100, master_seed=9,
                         name=name)


@pytest.fixture(scope="module")
def social_ds():
    """Facebook when available, otherwise the follower-graph surrogate."""
    if FACEBOOK:
        g = load_edge_list(FACEBOOK, directed=True)
        name = "facebook"
    else:
        g = social_surrogate(3000, seed=13)
        name = "social-surrogate"
    return build_dataset(g, ThresholdSet.social(), runs=100, master_seed=15,
                         name=name)


class TestCriterion1DatasetScaleReproduction:
    def test_full_pipeline_and_top_bin_share(self, tmp_path):
        if CITESEER:
            edge_path = CITESEER
            label = "citeseer"
        else:
            edge_path = write_edge_list(citation_surrogate(800, seed=5),
                                        tmp_path / "surrogate.txt")
            label = "citation-surrogate"
        config = {
            "networks": [{"name": "net", "path": str(edge_path),
                          "family": "citation", "directed": True}],
            "master_seed": 20240601,
            "runs": 100,
            "k_values": [2],
            "tasks": ["influence_range"],
            "models": [{"kind": "gbm"}],
            "trials": 5,
            "output_dir": str(tmp_path / "out"),
            "importance_sample_size": 40,
            "importance_permutations": 40,
            "importance_background": 60,
        }
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(config))
        code = cli_main(["pipeline", "--config", str(cfg)])
        assert code == 0, "pipeline run failed"
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        paths = [a["path"] for a in manifest["artifacts"]]
        assert any("simulations.csv" in p for p in paths)
        assert any("features.csv" in p for p in paths)
        # top-bin share of the smart two-bin range labels, mean over thresholds
        label_dir = tmp_path / "out" / "cache" / "net" / "labels"
        shares = []
        for csv_file in sorted(label_dir.glob("influence_range_*_k2.csv")):
            rows = csv_file.read_text().strip().split("\n")[1:]
            labels = np.array([int(r.rsplit(",", 1)[1]) for r in rows])
            shares.append((labels == 1).mean())
        share = float(np.mean(shares))
        if CITESEER:
            ok = abs(share - 0.04170) <= 0.015
            report("criterion-1", ok,
                   f"{label}: top-bin share {share:.2%} vs 4.170% +/- 1.5pp")
        else:
            ok = 0.0 < share <= 0.30
            report("criterion-1", ok,
                   f"{label} (dataset unavailable): pipeline complete, "
                   f"top-bin share {share:.2%} within sanity bounds")


class TestCriterion2SmartVsFixed:
    def test_smart_beats_fixed(self, citation_ds):
        spec = ModelSpec("gbm")
        smart, fixed = binning_comparison(citation_ds, TaskId.influence_range,
                                          spec, trials=5, master_seed=31)
        ok = smart.f1_macro_mean > fixed.f1_macro_mean
        report(
            "criterion-2", ok,
            f"{citation_ds.name}: smart F1 {smart.f1_macro_mean:.3f} "
            f"(std {smart.f1_macro_std:.3f}) vs fixed {fixed.f1_macro_mean:.3f} "
            f"(std {fixed.f1_macro_std:.3f}) over 5 trials",
        )


class TestCriterion3WithinNetwork:
    def test_gbm_all_tasks_k23(self, citation_ds):
        spec = ModelSpec("gbm")
        results = {}
        for task in TaskId:
            for k in (2, 3):
                rep = within_network_eval(citation_ds, task, k, spec,
                                          trials=5, master_seed=17)
                results[(task.name, k)] = rep.f1_macro_mean
        worst = min(results.values())
        ok = worst >= 0.85
        detail = ", ".join(f"{t}/k{k}={v:.3f}" for (t, k), v in results.items())
        report("criterion-3", ok, f"{citation_ds.name}: {detail} (floor 0.85)")


class TestCriterion4CrossNetwork:
    def test_transfer_at_best_k(self, citation_ds):
        if CITESEER and FACEBOOK:
            g_test = load_edge_list(FACEBOOK, directed=True)
            test_ds = build_dataset(g_test, ThresholdSet.social(), runs=100,
                                    master_seed=11, name="facebook")
            ks = (2, 3, 4, 5)
            label = "citeseer->facebook"
        else:
            g_test = citation_surrogate(1500, seed=77)
            test_ds = build_dataset(g_test, ThresholdSet.citation(), runs=100,
                                    master_seed=11, name="citation-surrogate-B")
            ks = (2, 3, 4)
            label = f"{citation_ds.name}->citation-surrogate-B"
        spec = ModelSpec("gbm")
        best = 0.0
        best_k = None
        for k in ks:
            rep = cross_network_eval(citation_ds, test_ds, TaskId.influence_range,
                                     k, spec, master_seed=23)
            if rep.f1_macro_mean > best:
                best, best_k = rep.f1_macro_mean, k
        ok = best >= 0.75
        report("criterion-4", ok, f"{label}: best k={best_k} F1 {best:.3f} (floor 0.75)")


class TestCriterion5ImportanceNarrative:
    def test_out_degree_and_threshold_ranks(self, social_ds):
        labels, _ = smart_labels_for(social_ds, TaskId.influence_range, k=2, seed=7)
        X = apply_standardizer(social_ds.features,
                               fit_standardizer(social_ds.features))
        model = train(ModelSpec("gbm"), X, labels)
        rep = importance_report(model, X, sample_size=60, permutations=100,
                                background_size=100, seed=3)
        out_rank = rep.rank_of("out_degree")
        thr_rank = rep.rank_of("threshold")
        ok = out_rank <= 3 and thr_rank <= 6
        top = ", ".join(name for name, _ in rep.ranking()[:6])
        report(
            "criterion-5", ok,
            f"{social_ds.name}: out_degree rank {out_rank} (<=3), "
            f"threshold rank {thr_rank} (<=6); top6: {top}",
        )


def smart_labels_for(ds, task, k, seed):
    from keynode.evaluation import task_labels

    return task_labels(ds, task, k, seed=seed)


class TestCriterion6PropertySuite:
    def test_p1_cascade_equals_reachable_set(self):
        checked = 0
        for seed in range(50):
            g = random_digraph(12 + seed % 30, 0.12, seed=seed)
            for node in range(g.n):
                out = ck.ic_single(g.out_indptr, g.out_indices, node, 1.0,
                                   derive_seed(seed, node))
                if out[0] != len(reachable_set(g, node)):
                    report("criterion-6a", False,
                           f"graph seed {seed} node {node}: {out[0]} != reachable")
                checked += 1
        report("criterion-6a", True,
               f"IC(p=1) range equals reachable-set size on {checked} nodes "
               f"across 50 seeded digraphs (exact)")

    def test_sir_equals_ic_statistically(self):
        g = generate_synthetic("erdos_renyi", 100, 0.05, seed=3)
        runs, beta = 10_000, 0.2
        worst = 0.0
        for node in range(g.n):
            ic = np.array([
                ck.ic_single(g.out_indptr, g.out_indices, node, beta,
                             derive_seed(1, node, 0, r))[0]
                for r in range(runs)
            ])
            sir = np.array([
                ck.sir_single(g.out_indptr, g.out_indices, node, beta,
                              derive_seed(2, node, 0, r))[0]
                for r in range(runs)
            ])
            se = math.sqrt(ic.var() / runs + sir.var() / runs)
            if se == 0.0:
                ok_node = ic.mean() == sir.mean()
                z = 0.0 if ok_node else math.inf
            else:
                z = abs(ic.mean() - sir.mean()) / se
            worst = max(worst, z)
            if z > 4.0:
                report("criterion-6b", False, f"node {node}: z={z:.2f} > 4")
        report("criterion-6b", True,
               f"SIR(gamma=1) vs IC per-node mean range: max |z| {worst:.2f} "
               f"<= 4 pooled SE at {runs} runs on a 100-node graph")

    def test_lloyd_within_one_percent_of_exact(self):
        worst = 0.0
        for seed in range(100):
            rng = np.random.Generator(np.random.PCG64(seed))
            size = int(rng.integers(50, 5001))
            kind = seed % 3
            if kind == 0:
                values = rng.random(size)
            elif kind == 1:
                values = rng.exponential(1.0, size)
            else:
                values = np.concatenate([
                    rng.normal(0, 1, size // 2),
                    rng.normal(8, 2, size - size // 2),
                ])
            k = 2 + seed % 4
            lloyd = smart_bins_kmeans(values, k=k, seed=seed)
            exact = smart_bins_dp_exact(values, k=k)
            if exact.inertia > 0:
                worst = max(worst, lloyd.inertia / exact.inertia)
        ok = worst <= 1.01
        report("criterion-6c", ok,
               f"Lloyd/DP inertia ratio max {worst:.5f} <= 1.01 over 100 datasets")

    def test_centrality_brute_force_oracles(self):
        from keynode.centrality import CentralityId, compute_centrality

        graphs = [random_digraph(2 + s % 7, 0.35, seed=s) for s in range(20)]
        worst = 0.0
        for g in graphs:
            adj = oracles.adjacency_from_graph(g)
            norm = (g.n - 1) * (g.n - 2) if g.n >= 3 else 1
            checks = [
                (CentralityId.betweenness,
                 {v: b / norm for v, b in oracles.betweenness_oracle(adj).items()}),
                (CentralityId.load,
                 {v: b / norm for v, b in oracles.load_oracle(adj).items()}),
                (CentralityId.closeness, oracles.closeness_oracle(adj, g.n)),
                (CentralityId.harmonic, oracles.harmonic_oracle(adj)),
                (CentralityId.local_reaching,
                 oracles.local_reaching_oracle(adj, g.n)),
            ]
            import warnings as _w

            with _w.catch_warnings():
                _w.simplefilter("ignore")
                for measure, want in checks:
                    got = compute_centrality(g, measure).scores
                    for v in range(g.n):
                        err = abs(got[v] - want[v])
                        worst = max(worst, err)
                        if err > 1e-9:
                            report("criterion-6d", False,
                                   f"{measure.name} node {v}: |err| {err:.2e}")
        report("criterion-6d", True,
               f"path-centrality oracles on graphs <= 8 nodes: max |err| "
               f"{worst:.2e} <= 1e-9")

    def test_f1_macro_oracle_twenty_matrices(self):
        rng = np.random.Generator(np.random.PCG64(7))
        worst = 0.0
        for _ in range(20):
            k = int(rng.integers(2, 6))
            n = int(rng.integers(k, 60))
            y_true = rng.integers(0, k, n)
            y_true[:k] = np.arange(k)
            y_pred = rng.integers(0, k, n)
            want = oracles.f1_macro_oracle(list(y_true), list(y_pred))
            worst = max(worst, abs(f1_macro(y_true, y_pred) - want))
        ok = worst <= 1e-12
        report("criterion-6e", ok,
               f"f1_macro vs hand oracle on 20 matrices: max |err| {worst:.2e}")

    def test_logreg_gradient_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(21))
        worst = 0.0
        for _ in range(5):
            n, d, k = 15, 4, 3
            X = rng.normal(0, 1, (n, d))
            y = rng.integers(0, k, n)
            onehot = np.zeros((n, k))
            onehot[np.arange(n), y] = 1.0
            w = rng.normal(0, 0.5, d * k + k)
            _, grad = _logreg.loss_and_grad(w, X, onehot, 1e-4)
            eps = 1e-6
            for i in range(w.size):
                up, down = w.copy(), w.copy()
                up[i] += eps
                down[i] -= eps
                fd = (_logreg.loss_and_grad(up, X, onehot, 1e-4)[0]
                      - _logreg.loss_and_grad(down, X, onehot, 1e-4)[0]) / (2 * eps)
                rel = abs(grad[i] - fd) / max(1.0, abs(fd))
                worst = max(worst, rel)
        ok = worst <= 1e-5
        report("criterion-6f", ok,
               f"logreg analytic vs finite-difference gradient: max rel err "
               f"{worst:.2e} <= 1e-5")

    def test_shapley_linear_closed_form_and_efficiency(self):
        rng = np.random.Generator(np.random.PCG64(33))
        w = np.array([1.5, -2.0, 0.0, 0.75, 0.2])
        background = rng.normal(0, 1, (400, 5))
        x = rng.normal(0, 1, 5)
        fn = lambda rows: rows @ w
        perms = 3000
        attr = shapley_values_fn(fn, x, background, permutations=perms, seed=13)
        want = w * (x - background.mean(axis=0))
        se = np.abs(w) * background.std(axis=0) / np.sqrt(perms)
        closed_ok = all(
            abs(attr[i] - want[i]) <= 3 * se[i] + 1e-12 for i in range(5)
        )
        gap = fn(x[None, :])[0] - fn(background).mean()
        gap_se = fn(background).std() / np.sqrt(perms)
        eff_ok = abs(attr.sum() - gap) <= 3 * gap_se
        ok = closed_ok and eff_ok
        report("criterion-6g", ok,
               f"shapley linear closed form within 3 SE ({closed_ok}) and "
               f"efficiency within 3 SE ({eff_ok}) at {perms} permutations")

    def test_simulate_all_bytes_stable_across_threads(self):
        g = generate_synthetic("erdos_renyi", 60, 0.08, seed=19)
        ts = ThresholdSet.citation()
        blobs = []
        for threads in (1, 4, 8):
            recs = simulate_all(g, ts, runs=50, master_seed=99, threads=threads)
            blobs.append(records_to_csv(recs).encode())
        ok = blobs[0] == blobs[1] == blobs[2]
        report("criterion-6h", ok,
               "simulate_all output byte-identical across 1/4/8 worker threads")
