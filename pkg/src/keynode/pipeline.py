"""Cached, resumable pipeline over the processing stages:

    ingest -> simulate -> label -> featurize -> train -> evaluate
           -> generalize -> compare-bins -> importance

Every stage owns a cache key hashed from its parameters, a stage code
version, and the checksums of its upstream artifacts. A stage is skipped
when its key file matches and all of its outputs still exist, so a
config change only reruns the stages it actually affects. The pipeline
ends by writing a manifest listing every artifact with its checksum
(and nothing time-dependent, so reruns are byte-identical).
"""

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import graph as graphmod
from .backend import backend_name
from .centrality import compute_all_centralities
from .diffusion import (
    ThresholdSet,
    load_records,
    save_records,
    save_sidecar,
    simulate_all,
    simulation_sidecar,
)
from .evaluation import (
    NetworkDataset,
    TaskId,
    binning_comparison,
    cross_network_eval,
    reports_to_csv,
    save_report,
    task_labels,
    within_network_eval,
)
from .features import (
    apply_standardizer,
    assemble_features,
    fit_standardizer,
    load_features,
    save_features,
)
from .importance import importance_report
from .importance import save_report as save_importance
from .labeling import save_labelset
from .models import ModelSpec, save_model, train
from .rng import derive_seed

STAGE_VERSION = 1

STAGE_ORDER = (
    "ingest",
    "simulate",
    "label",
    "featurize",
    "train",
    "evaluate",
    "generalize",
    "compare-bins",
    "importance",
)


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


class DependencyError(Exception):
    def __init__(self, stage, missing_stage, detail=""):
        self.stage = stage
        self.missing_stage = missing_stage
        extra = f" ({detail})" if detail else ""
        super().__init__(
            f"stage {stage}: missing upstream artifact from stage {missing_stage}{extra}"
        )


@dataclass
class NetworkConfig:
    name: str
    path: str
    family: str = "custom"
    directed: bool = True
    thresholds: Optional[List[float]] = None

    def threshold_set(self) -> ThresholdSet:
        if self.thresholds:
            return ThresholdSet(tuple(self.thresholds), self.family)
        return ThresholdSet.for_family(self.family)


@dataclass
class RunConfig:
    networks: List[NetworkConfig]
    master_seed: int
    output_dir: str
    cache_dir: Optional[str] = None
    runs: int = 100
    k_values: List[int] = field(default_factory=lambda: [2, 3, 4, 5])
    k_max: int = 5
    binning: List[str] = field(default_factory=lambda: ["smart_kmeans"])
    tasks: List[str] = field(default_factory=lambda: [t.name for t in TaskId])
    models: List[dict] = field(default_factory=lambda: [{"kind": "gbm"}])
    trials: int = 5
    threads: Optional[int] = None
    importance_sample_size: int = 200
    importance_permutations: int = 100
    importance_background: int = 100

    def __post_init__(self):
        if not self.networks:
            raise ConfigError("config needs at least one network")
        if self.master_seed is None:
            raise ConfigError("master_seed is mandatory (no wall-clock seeding)")
        names = [n.name for n in self.networks]
        if len(set(names)) != len(names):
            raise ConfigError("network names must be unique")
        for n in self.networks:
            if not Path(n.path).exists():
                raise ConfigError(f"network file not found: {n.path}")
        for t in self.tasks:
            if t not in TaskId.__members__:
                raise ConfigError(f"unknown task {t!r}")
        for k in self.k_values:
            if not 2 <= k <= self.k_max:
                raise ConfigError(f"k must be in 2..{self.k_max}, got {k}")
        known_binning = {"smart_kmeans", "smart_dp_exact", "fixed_top_percent",
                         "quantile", "uniform"}
        for method in self.binning:
            if method not in known_binning:
                raise ConfigError(f"unknown binning method {method!r}")

    @classmethod
    def from_json(cls, path, overrides: Optional[dict] = None) -> "RunConfig":
        try:
            with open(path, "rt", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            networks = [NetworkConfig(**n) for n in raw.pop("networks")]
            return cls(networks=networks, **raw)
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"bad config structure: {exc}") from exc

    def model_specs(self) -> List[ModelSpec]:
        return [
            ModelSpec(m["kind"], m.get("hyperparams"), m.get("seed", 0))
            for m in self.models
        ]

    def cache_path(self) -> Path:
        env = os.environ.get("KEYNODE_CACHE_DIR")
        if env:
            return Path(env)
        if self.cache_dir:
            return Path(self.cache_dir)
        return Path(self.output_dir) / "cache"


class Logger:
    def __init__(self, json_lines=False, stream=None):
        self.json_lines = json_lines
        self.stream = stream or sys.stderr

    def event(self, stage, message, **fields):
        if self.json_lines:
            record = {"stage": stage, "message": message}
            record.update(fields)
            print(json.dumps(record, sort_keys=True), file=self.stream)
        else:
            extra = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"[{stage}] {message}{' ' + extra if extra else ''}", file=self.stream)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage_key(stage: str, params: dict, upstream: List[str]) -> str:
    payload = json.dumps(
        {"stage": stage, "version": STAGE_VERSION, "params": params, "upstream": upstream},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


class Pipeline:
    def __init__(self, config: RunConfig, logger: Optional[Logger] = None):
        self.config = config
        self.log = logger or Logger()
        self.cache = config.cache_path()
        self.out = Path(config.output_dir)
        self.cache.mkdir(parents=True, exist_ok=True)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.cache / "keys").mkdir(exist_ok=True)
        self._artifacts: Dict[str, str] = {}  # path -> stage

    # -- cache bookkeeping ---------------------------------------------------

    def _key_file(self, stage: str, scope: str) -> Path:
        return self.cache / "keys" / f"{stage}_{scope}.json"

    def _fresh(self, stage, scope, key, outputs) -> bool:
        kf = self._key_file(stage, scope)
        if not kf.exists():
            return False
        try:
            stored = json.loads(kf.read_text())
        except json.JSONDecodeError:
            return False
        return stored.get("key") == key and all(Path(p).exists() for p in stored.get("artifacts", []))

    def _commit(self, stage, scope, key, outputs) -> None:
        self._key_file(stage, scope).write_text(
            json.dumps({"key": key, "artifacts": [str(p) for p in outputs]}, indent=2)
        )

    def _register(self, stage, outputs) -> None:
        for p in outputs:
            self._artifacts[str(p)] = stage

    def _run_stage(self, stage, scope, key, outputs, action) -> bool:
        """Returns True when the stage executed, False on a cache hit."""
        self._register(stage, outputs)
        if self._fresh(stage, scope, key, outputs):
            self.log.event(stage, f"cache hit for {scope}")
            return False
        action()
        for p in outputs:
            if not Path(p).exists():
                raise StageError(stage, f"did not produce expected artifact {p}")
        self._commit(stage, scope, key, outputs)
        self.log.event(stage, f"completed {scope}")
        return True

    # -- per-network paths ----------------------------------------------------

    def _net_dir(self, name) -> Path:
        d = self.cache / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def graph_file(self, name) -> Path:
        return self._net_dir(name) / "graph.npz"

    def stats_file(self, name) -> Path:
        return self._net_dir(name) / "stats.json"

    def sim_file(self, name) -> Path:
        return self._net_dir(name) / "simulations.csv"

    def sim_sidecar_file(self, name) -> Path:
        return self._net_dir(name) / "simulations.json"

    def features_file(self, name) -> Path:
        return self._net_dir(name) / "features.csv"

    # -- stages ----------------------------------------------------------------

    def stage_ingest(self) -> None:
        for net in self.config.networks:
            out = [self.graph_file(net.name), self.stats_file(net.name)]
            key = _stage_key(
                "ingest",
                {"directed": net.directed, "name": net.name},
                [_sha256_file(Path(net.path))],
            )

            def action(net=net):
                g = graphmod.load_edge_list(net.path, directed=net.directed)
                graphmod.save_binary(g, self.graph_file(net.name))
                stats = graphmod.compute_stats(g, diameter_on_largest_component=False)
                with open(self.stats_file(net.name), "wt", encoding="utf-8") as fh:
                    json.dump(
                        {
                            "nodes": stats.nodes,
                            "edges": stats.edges,
                            "avg_degree": stats.avg_degree,
                            "clustering_coefficient": stats.clustering_coefficient,
                            "diameter": stats.diameter,
                            "transitivity": stats.transitivity,
                            "directed": net.directed,
                        },
                        fh,
                        indent=2,
                        sort_keys=True,
                    )
                    fh.write("\n")

            self._run_stage("ingest", net.name, key, out, action)

    def _load_graph(self, stage, name):
        gf = self.graph_file(name)
        if not gf.exists():
            raise DependencyError(stage, "ingest", f"graph cache for {name}")
        return graphmod.load_binary(gf)

    def stage_simulate(self) -> None:
        for net in self.config.networks:
            g = self._load_graph("simulate", net.name)
            ts = net.threshold_set()
            out = [self.sim_file(net.name), self.sim_sidecar_file(net.name)]
            key = _stage_key(
                "simulate",
                {
                    "runs": self.config.runs,
                    "master_seed": self.config.master_seed,
                    "thresholds": list(ts.values),
                },
                [g.checksum()],
            )

            def action(net=net, g=g, ts=ts):
                done = {"count": 0}

                def progress(done_pairs, total):
                    if done_pairs - done["count"] >= max(1, total // 10):
                        done["count"] = done_pairs
                        self.log.event("simulate", f"{net.name}: {done_pairs}/{total} pairs")

                records = simulate_all(
                    g,
                    ts,
                    runs=self.config.runs,
                    master_seed=self.config.master_seed,
                    threads=self.config.threads,
                    progress=progress,
                )
                save_records(records, self.sim_file(net.name))
                save_sidecar(
                    simulation_sidecar(g, ts, self.config.runs, self.config.master_seed),
                    self.sim_sidecar_file(net.name),
                )

            self._run_stage("simulate", net.name, key, out, action)

    def _load_dataset(self, stage, net: NetworkConfig) -> NetworkDataset:
        g = self._load_graph(stage, net.name)
        sim = self.sim_file(net.name)
        if not sim.exists():
            raise DependencyError(stage, "simulate", f"simulations for {net.name}")
        feats = self.features_file(net.name)
        if not feats.exists():
            raise DependencyError(stage, "featurize", f"features for {net.name}")
        records = load_records(sim)
        features = load_features(feats)
        return NetworkDataset.from_records(
            net.name, g.n, net.threshold_set(), features, records
        )

    def _label_variants(self):
        """(method, k) grid; the binary fixed-percent method has no k sweep."""
        out = []
        for method in self.config.binning:
            if method == "fixed_top_percent":
                out.append((method, 2))
            else:
                out.extend((method, k) for k in self.config.k_values)
        return out

    def stage_label(self) -> None:
        from .labeling import (
            baseline_bins,
            fixed_bins_top_percent,
            smart_bins_dp_exact,
            smart_bins_kmeans,
        )

        for net in self.config.networks:
            sim = self.sim_file(net.name)
            if not sim.exists():
                raise DependencyError("label", "simulate", f"simulations for {net.name}")
            records = load_records(sim)
            label_dir = self._net_dir(net.name) / "labels"
            label_dir.mkdir(exist_ok=True)
            ts = net.threshold_set()
            variants = self._label_variants()
            outputs = []
            for task_name in self.config.tasks:
                for method, k in variants:
                    for t in ts.values:
                        stem = f"{task_name}_thr{t}_{method}_k{k}"
                        outputs.append(label_dir / f"{stem}.csv")
                        outputs.append(label_dir / f"{stem}.json")
            key = _stage_key(
                "label",
                {
                    "tasks": self.config.tasks,
                    "k_values": self.config.k_values,
                    "binning": self.config.binning,
                    "master_seed": self.config.master_seed,
                },
                [_sha256_file(sim)],
            )

            def action(net=net, records=records, ts=ts, label_dir=label_dir,
                       variants=variants):
                for task_name in self.config.tasks:
                    task = TaskId[task_name]
                    values = np.array([getattr(r, task.value) for r in records])
                    thr = np.array([r.threshold for r in records])
                    nodes = np.array([r.node for r in records])
                    for method, k in variants:
                        for idx, t in enumerate(ts.values):
                            mask = thr == t
                            seed = derive_seed(self.config.master_seed, 0xAB, idx)
                            if method == "smart_kmeans":
                                ls = smart_bins_kmeans(values[mask], k=k, seed=seed)
                            elif method == "smart_dp_exact":
                                ls = smart_bins_dp_exact(values[mask], k=k)
                            elif method == "fixed_top_percent":
                                ls = fixed_bins_top_percent(values[mask], 0.05)
                            else:
                                ls = baseline_bins(values[mask], k, method)
                            ls.source_task = task_name
                            ls.threshold = t
                            stem = f"{task_name}_thr{t}_{method}_k{k}"
                            save_labelset(
                                ls,
                                nodes[mask],
                                label_dir / f"{stem}.csv",
                                label_dir / f"{stem}.json",
                                seed=seed,
                            )

            self._run_stage("label", net.name, key, outputs, action)

    def stage_featurize(self) -> None:
        for net in self.config.networks:
            g = self._load_graph("featurize", net.name)
            ts = net.threshold_set()
            out = [self.features_file(net.name)]
            key = _stage_key(
                "featurize", {"thresholds": list(ts.values)}, [g.checksum()]
            )

            def action(net=net, g=g, ts=ts):
                maps = compute_all_centralities(g, cache_dir=self._net_dir(net.name))
                features = assemble_features(maps, ts)
                save_features(features, self.features_file(net.name))

            self._run_stage("featurize", net.name, key, out, action)

    def _model_path(self, net_name, task_name, k, kind) -> Path:
        d = self.cache / "models"
        d.mkdir(exist_ok=True)
        return d / f"{net_name}_{task_name}_k{k}_{kind}.json"

    def stage_train(self) -> None:
        for net in self.config.networks:
            ds = self._load_dataset("train", net)
            for task_name in self.config.tasks:
                for k in self.config.k_values:
                    for spec in self.config.model_specs():
                        path = self._model_path(net.name, task_name, k, spec.kind)
                        scope = path.stem
                        key = _stage_key(
                            "train",
                            {
                                "task": task_name,
                                "k": k,
                                "kind": spec.kind,
                                "hyperparams": spec.resolved(),
                                "seed": spec.seed,
                                "master_seed": self.config.master_seed,
                            },
                            [
                                _sha256_file(self.sim_file(net.name)),
                                _sha256_file(self.features_file(net.name)),
                            ],
                        )

                        def action(ds=ds, task_name=task_name, k=k, spec=spec, path=path):
                            labels, _ = task_labels(
                                ds,
                                TaskId[task_name],
                                k,
                                seed=derive_seed(self.config.master_seed, 0xAB),
                            )
                            scaler = fit_standardizer(ds.features)
                            model = train(
                                spec, apply_standardizer(ds.features, scaler), labels
                            )
                            save_model(model, path)

                        self._run_stage("train", scope, key, [path], action)

    def stage_evaluate(self) -> None:
        report_dir = self.cache / "reports"
        report_dir.mkdir(exist_ok=True)
        all_rows = []
        for net in self.config.networks:
            ds = self._load_dataset("evaluate", net)
            for task_name in self.config.tasks:
                for k in self.config.k_values:
                    for spec in self.config.model_specs():
                        path = report_dir / f"within_{net.name}_{task_name}_k{k}_{spec.kind}.json"
                        key = _stage_key(
                            "evaluate",
                            {
                                "task": task_name,
                                "k": k,
                                "kind": spec.kind,
                                "hyperparams": spec.resolved(),
                                "trials": self.config.trials,
                                "master_seed": self.config.master_seed,
                            },
                            [
                                _sha256_file(self.sim_file(net.name)),
                                _sha256_file(self.features_file(net.name)),
                            ],
                        )

                        def action(ds=ds, task_name=task_name, k=k, spec=spec, path=path):
                            rep = within_network_eval(
                                ds,
                                TaskId[task_name],
                                k,
                                spec,
                                trials=self.config.trials,
                                master_seed=self.config.master_seed,
                            )
                            save_report(rep, path)

                        self._run_stage("evaluate", path.stem, key, [path], action)
                        all_rows.append(path)
        self._flat_report_csv(all_rows, self.out / "within_network.csv")

    def stage_generalize(self) -> None:
        if len(self.config.networks) < 2:
            self.log.event("generalize", "skipped: needs at least two networks")
            return
        report_dir = self.cache / "reports"
        report_dir.mkdir(exist_ok=True)
        rows = []
        for a in self.config.networks:
            for b in self.config.networks:
                if a.name == b.name:
                    continue
                ds_a = self._load_dataset("generalize", a)
                ds_b = self._load_dataset("generalize", b)
                for task_name in self.config.tasks:
                    for k in self.config.k_values:
                        for spec in self.config.model_specs():
                            path = (
                                report_dir
                                / f"cross_{a.name}_{b.name}_{task_name}_k{k}_{spec.kind}.json"
                            )
                            key = _stage_key(
                                "generalize",
                                {
                                    "task": task_name,
                                    "k": k,
                                    "kind": spec.kind,
                                    "hyperparams": spec.resolved(),
                                    "master_seed": self.config.master_seed,
                                },
                                [
                                    _sha256_file(self.sim_file(a.name)),
                                    _sha256_file(self.sim_file(b.name)),
                                    _sha256_file(self.features_file(a.name)),
                                    _sha256_file(self.features_file(b.name)),
                                ],
                            )

                            def action(ds_a=ds_a, ds_b=ds_b, task_name=task_name,
                                       k=k, spec=spec, path=path):
                                rep = cross_network_eval(
                                    ds_a, ds_b, TaskId[task_name], k, spec,
                                    master_seed=self.config.master_seed,
                                )
                                save_report(rep, path)

                            self._run_stage("generalize", path.stem, key, [path], action)
                            rows.append(path)
        self._flat_report_csv(rows, self.out / "generalization.csv")

    def stage_compare_bins(self) -> None:
        report_dir = self.cache / "reports"
        report_dir.mkdir(exist_ok=True)
        rows = []
        for net in self.config.networks:
            ds = self._load_dataset("compare-bins", net)
            for task_name in self.config.tasks:
                for spec in self.config.model_specs():
                    paths = [
                        report_dir / f"bins_smart_{net.name}_{task_name}_{spec.kind}.json",
                        report_dir / f"bins_fixed_{net.name}_{task_name}_{spec.kind}.json",
                    ]
                    key = _stage_key(
                        "compare-bins",
                        {
                            "task": task_name,
                            "kind": spec.kind,
                            "hyperparams": spec.resolved(),
                            "trials": self.config.trials,
                            "master_seed": self.config.master_seed,
                        },
                        [
                            _sha256_file(self.sim_file(net.name)),
                            _sha256_file(self.features_file(net.name)),
                        ],
                    )

                    def action(ds=ds, task_name=task_name, spec=spec, paths=paths):
                        smart, fixed = binning_comparison(
                            ds,
                            TaskId[task_name],
                            spec,
                            trials=self.config.trials,
                            master_seed=self.config.master_seed,
                        )
                        save_report(smart, paths[0])
                        save_report(fixed, paths[1])

                    self._run_stage("compare-bins", paths[0].stem, key, paths, action)
                    rows.extend(paths)
        self._flat_report_csv(rows, self.out / "binning_comparison.csv")

    def stage_importance(self) -> None:
        report_dir = self.cache / "reports"
        report_dir.mkdir(exist_ok=True)
        for net in self.config.networks:
            ds = self._load_dataset("importance", net)
            for task_name in self.config.tasks:
                for spec in self.config.model_specs():
                    k = self.config.k_values[0]
                    model_file = self._model_path(net.name, task_name, k, spec.kind)
                    if not model_file.exists():
                        raise DependencyError(
                            "importance", "train", f"model {model_file.name}"
                        )
                    paths = [
                        report_dir / f"importance_{net.name}_{task_name}_{spec.kind}.json",
                        report_dir / f"importance_{net.name}_{task_name}_{spec.kind}.csv",
                    ]
                    key = _stage_key(
                        "importance",
                        {
                            "task": task_name,
                            "kind": spec.kind,
                            "sample_size": self.config.importance_sample_size,
                            "permutations": self.config.importance_permutations,
                            "background": self.config.importance_background,
                            "master_seed": self.config.master_seed,
                        },
                        [_sha256_file(model_file), _sha256_file(self.features_file(net.name))],
                    )

                    def action(ds=ds, model_file=model_file, paths=paths):
                        from .models import load_model

                        model = load_model(model_file)
                        scaler = fit_standardizer(ds.features)
                        standardized = apply_standardizer(ds.features, scaler)
                        rep = importance_report(
                            model,
                            standardized,
                            sample_size=self.config.importance_sample_size,
                            permutations=self.config.importance_permutations,
                            background_size=self.config.importance_background,
                            seed=self.config.master_seed,
                        )
                        save_importance(rep, paths[0], paths[1])

                    self._run_stage("importance", paths[0].stem, key, paths, action)

    # -- orchestration ----------------------------------------------------------

    def _flat_report_csv(self, report_paths, out_path) -> None:
        from .evaluation import load_report

        reports = [load_report(p) for p in report_paths if Path(p).exists()]
        with open(out_path, "wt", encoding="utf-8") as fh:
            fh.write(reports_to_csv(reports))
        self._register("report-csv", [out_path])

    def run_stage(self, stage: str) -> None:
        actions = {
            "ingest": self.stage_ingest,
            "simulate": self.stage_simulate,
            "label": self.stage_label,
            "featurize": self.stage_featurize,
            "train": self.stage_train,
            "evaluate": self.stage_evaluate,
            "generalize": self.stage_generalize,
            "compare-bins": self.stage_compare_bins,
            "importance": self.stage_importance,
        }
        if stage not in actions:
            raise ConfigError(f"unknown stage {stage!r}")
        try:
            actions[stage]()
        except (StageError, DependencyError, ConfigError):
            raise
        except Exception as exc:
            # partial caches stay valid; the failing stage is named
            raise StageError(stage, f"{exc.__class__.__name__}: {exc}") from exc

    def run_all(self) -> Path:
        for stage in STAGE_ORDER:
            self.run_stage(stage)
        return self.write_manifest()

    def write_manifest(self) -> Path:
        entries = []
        for path, stage in sorted(self._artifacts.items()):
            p = Path(path)
            if p.exists():
                entries.append(
                    {
                        "path": os.path.relpath(path, self.out),
                        "stage": stage,
                        "sha256": _sha256_file(p),
                    }
                )
        manifest = {
            "version": STAGE_VERSION,
            "backend": backend_name(),
            "master_seed": self.config.master_seed,
            "runs": self.config.runs,
            "networks": [n.name for n in self.config.networks],
            "artifacts": entries,
        }
        out = self.out / "manifest.json"
        with open(out, "wt", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.log.event("pipeline", f"manifest written with {len(entries)} artifacts")
        return out
