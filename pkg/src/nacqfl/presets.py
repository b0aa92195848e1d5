"""Experiment presets and parameter sweeps.

The five settings: S1 runs the unpartitioned model on one pinned noisy
device; S2/S3 run a single cluster with symmetric/asymmetric partitioning;
S4/S5 run the full three-cluster federation. Method variants toggle the
selection strategy (noise-aware vs random) and the mitigation technique.

Summary rows report the best-so-far aggregated model (the checkpoint a
server keeps), and every cluster gets an equal local step budget per round
(the desk-scale analogue of each cluster training its own local dataset).
Absolute accuracies from the original hardware-scale experiments are not
reproducible here; the harness targets the directional trends, and reports
label the stand-in datasets accordingly. Sweep cells are independent
deterministic runs and execute in parallel; rows come back in grid order.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import DatasetSpec, generate_dataset
from .federation import FederationConfig, FederationRun, run_federation
from .mitigation import PecConfig, ZneConfig
from .topology import DeviceProfile, bundled_fleet

PRESET_NAMES = ("S1", "S2", "S3", "S4", "S5")

BENCH_SEEDS = (1, 2, 3, 4, 5)

_BASE = dict(
    n_qubits=4,
    n_layers=2,
    lr=0.3,
    lr_decay=0.8,
    local_steps_per_round=8,  # equal per-cluster compute per round
    shard_size=40,            # each cluster owns a fixed-size local dataset
    batch_size=16,
    max_rounds=5,
    accuracy_threshold=1.0,  # never stop early: comparable round counts
    delta=1.0,               # non-binding: random selection may pick any device,
                             # and all-noisy clusters stay feasible at high counts
    device_limit=3,
    parallel_limit=2,
)

_PRESET_OVERRIDES = {
    "S1": dict(n_clusters=1, device_limit=1, parallel_limit=64,
               partition_type="SYM", pin_devices=("mumbai-27",)),
    "S2": dict(n_clusters=1, partition_type="SYM"),
    "S3": dict(n_clusters=1, partition_type="ASYM"),
    "S4": dict(n_clusters=3, partition_type="SYM"),
    "S5": dict(n_clusters=3, partition_type="ASYM"),
}

_TRAINING_PEC_SAMPLES = 64  # desk-scale budget for PEC inside training loops


def preset_config(name: str, seed: int = 7, **overrides) -> FederationConfig:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}")
    fields = dict(_BASE)
    fields.update(_PRESET_OVERRIDES[name])
    fields.update(overrides)
    return FederationConfig(seed=seed, **fields)


def preset_variants(name: str) -> dict[str, dict]:
    """Method label -> config overrides, mirroring the published table rows."""
    if name == "S1":
        return {
            "QNN": {},
            "QNN(PEC)": {"mitigation": PecConfig(n_samples=_TRAINING_PEC_SAMPLES, seed=0)},
            "QNN(ZNE)": {"mitigation": ZneConfig()},
        }
    if name in ("S2", "S3"):
        return {
            "DQNN(R)": {"selection": "random"},
            "DQNN(NA)": {},
            "DQNN(R+ZNE)": {"selection": "random", "mitigation": ZneConfig()},
            "DQNN(NA+ZNE)": {"mitigation": ZneConfig()},
        }
    if name in ("S4", "S5"):
        return {
            "FedAvg(R)": {"selection": "random"},
            "FedAvg(NA)": {},
            "FedAvg(NA+PEC)": {"mitigation": PecConfig(n_samples=_TRAINING_PEC_SAMPLES, seed=0)},
            "FedAvg(NA+ZNE)": {"mitigation": ZneConfig()},
        }
    raise ValueError(f"unknown preset {name!r}")


def blob_benchmark_spec(noisy: bool = False, seed: int = 0, n_features: int = 4) -> DatasetSpec:
    """The seed-pinned benchmark task used across trend checks.

    The training split (300 samples) covers seven disjoint 40-sample local
    shards, so the cluster-count sweep adds data as it adds clusters."""
    spec = DatasetSpec(source="blobs", n_samples=480, n_features=n_features,
                       n_classes=2, separation=3.2, cluster_std=1.0,
                       splits=(0.625, 0.125, 0.25), seed=seed)
    if noisy:
        spec = spec.noisy(feature_sigma=0.8, label_flip_prob=0.08)
    return spec


@dataclass(frozen=True)
class RunMetrics:
    """What the sweeps keep from one federation run."""

    best_accuracy: float
    best_f1: float
    final_accuracy: float
    round_accuracies: tuple[float, ...]
    max_rounds: int

    def rounds_to(self, target: float) -> int:
        for i, acc in enumerate(self.round_accuracies, start=1):
            if acc >= target:
                return i
        return self.max_rounds + 1


def _run_once(config: FederationConfig, dataset_spec: DatasetSpec,
              fleet: list[DeviceProfile]) -> FederationRun:
    dataset = generate_dataset(replace(dataset_spec, seed=config.seed))
    return run_federation(config, fleet, dataset)


def _run_metrics(job) -> RunMetrics:
    config, dataset_spec, fleet = job
    run = _run_once(config, dataset_spec, fleet)
    best = max(run.rounds, key=lambda r: r.global_accuracy)
    return RunMetrics(
        best_accuracy=best.global_accuracy,
        best_f1=best.global_f1,
        final_accuracy=run.rounds[-1].global_accuracy,
        round_accuracies=tuple(r.global_accuracy for r in run.rounds),
        max_rounds=config.max_rounds,
    )


def _pmap(jobs, n_jobs: int | None = None) -> list[RunMetrics]:
    """Run federation jobs, in parallel when possible; order preserved."""
    if n_jobs is None:
        n_jobs = min(len(jobs), os.cpu_count() or 1)
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_metrics(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_metrics, jobs))


@dataclass
class SummaryRow:
    setting: str
    method: str
    dataset: str
    seeds: tuple[int, ...]
    accuracies: tuple[float, ...]
    f1s: tuple[float, ...]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1s))


def run_preset(name: str, dataset_spec: DatasetSpec, seeds, fleet=None,
               variants=None, n_jobs: int | None = None,
               **config_overrides) -> list[SummaryRow]:
    """Run the preset's method variants over the seeds; one summary row each."""
    fleet = fleet if fleet is not None else bundled_fleet()
    all_variants = preset_variants(name)
    if variants is not None:
        unknown = set(variants) - set(all_variants)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}")
        all_variants = {k: v for k, v in all_variants.items() if k in variants}
    jobs, keys = [], []
    for method, var_overrides in all_variants.items():
        for seed in seeds:
            config = preset_config(name, seed=seed, **{**var_overrides, **config_overrides})
            jobs.append((config, dataset_spec, fleet))
            keys.append(method)
    results = _pmap(jobs, n_jobs)
    rows = []
    for method in all_variants:
        got = [m for k, m in zip(keys, results) if k == method]
        rows.append(SummaryRow(name, method, _dataset_label(dataset_spec), tuple(seeds),
                               tuple(m.best_accuracy for m in got),
                               tuple(m.best_f1 for m in got)))
    return rows


def _dataset_label(spec: DatasetSpec) -> str:
    stand_in = {"blobs": "blobs (MNIST-Bin stand-in)",
                "moons": "moons (P-MNIST stand-in)",
                "idx-digits": "idx-digits (MNIST stand-in)"}
    label = stand_in[spec.source]
    if spec.noise.feature_sigma > 0 or spec.noise.label_flip_prob > 0:
        label += " [noisy]"
    return label


def summary_to_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    buf.write("setting,method,dataset,mean_accuracy,std_accuracy,mean_f1,seeds,per_seed_accuracy\n")
    for r in rows:
        per_seed = ";".join(repr(a) for a in r.accuracies)
        seeds = ";".join(str(s) for s in r.seeds)
        buf.write(f"{r.setting},{r.method},\"{r.dataset}\",{r.mean_accuracy!r},"
                  f"{r.std_accuracy!r},{r.mean_f1!r},{seeds},{per_seed}\n")
    return buf.getvalue()


@dataclass
class ClusterSweepRow:
    n_clusters: int
    mean_accuracy: float
    std_accuracy: float
    mean_rounds_to_target: float
    target: float


def sweep_clusters(dataset_spec: DatasetSpec, seeds, counts=(1, 3, 5, 7),
                   fleet=None, target_accuracy: float = 0.9,
                   cluster_seed: int | None = 1, n_jobs: int | None = None,
                   **config_overrides) -> list[ClusterSweepRow]:
    """Federation accuracy and rounds-to-target as the cluster count varies.

    ``cluster_seed`` pins the clustering structure per count so the sweep
    varies only data and training randomness; pass None to re-draw the
    clusters from each run seed.
    """
    fleet = fleet if fleet is not None else bundled_fleet()
    if max(counts) > len(fleet):
        raise ValueError(f"fleet of {len(fleet)} devices cannot form {max(counts)} clusters")
    jobs = []
    for count in counts:
        for seed in seeds:
            config = preset_config("S4" if count > 1 else "S2", seed=seed,
                                   n_clusters=count, cluster_seed=cluster_seed,
                                   **config_overrides)
            jobs.append((config, dataset_spec, fleet))
    results = _pmap(jobs, n_jobs)
    rows = []
    for i, count in enumerate(counts):
        got = results[i * len(seeds):(i + 1) * len(seeds)]
        rows.append(ClusterSweepRow(
            count,
            float(np.mean([m.best_accuracy for m in got])),
            float(np.std([m.best_accuracy for m in got])),
            float(np.mean([m.rounds_to(target_accuracy) for m in got])),
            target_accuracy,
        ))
    return rows


def cluster_sweep_to_csv(rows: list[ClusterSweepRow]) -> str:
    buf = io.StringIO()
    buf.write("n_clusters,mean_accuracy,std_accuracy,mean_rounds_to_target,target\n")
    for r in rows:
        buf.write(f"{r.n_clusters},{r.mean_accuracy!r},{r.std_accuracy!r},"
                  f"{r.mean_rounds_to_target!r},{r.target!r}\n")
    return buf.getvalue()


@dataclass
class ChannelSweepRow:
    kind: str
    intensity: float
    dataset: str
    mean_accuracy: float
    std_accuracy: float


def sweep_channel_noise(clean_spec: DatasetSpec, noisy_spec: DatasetSpec, seeds,
                        kinds=("bitflip", "phaseflip", "depolarizing", "ampdamp"),
                        intensities=(0.01, 0.05, 0.10, 0.25), fleet=None,
                        include_zero: bool = True, n_jobs: int | None = None,
                        **config_overrides) -> list[ChannelSweepRow]:
    """Grid of federation runs across channel kinds, intensities and the
    clean/noisy dataset variants. The zero-intensity column is channel-kind
    independent, so it is computed once and replicated into every kind."""
    fleet = fleet if fleet is not None else bundled_fleet()
    datasets = (("clean", clean_spec), ("noisy", noisy_spec))
    jobs, keys = [], []
    if include_zero:
        for label, spec in datasets:
            for seed in seeds:
                jobs.append((preset_config("S4", seed=seed, **config_overrides), spec, fleet))
                keys.append(("zero", 0.0, label))
    for kind in kinds:
        for intensity in intensities:
            for label, spec in datasets:
                for seed in seeds:
                    config = preset_config("S4", seed=seed, channel_kind=kind,
                                           channel_intensity=float(intensity),
                                           **config_overrides)
                    jobs.append((config, spec, fleet))
                    keys.append((kind, float(intensity), label))
    results = _pmap(jobs, n_jobs)
    by_cell: dict[tuple, list[float]] = {}
    for key, metrics in zip(keys, results):
        by_cell.setdefault(key, []).append(metrics.best_accuracy)
    rows = []
    for kind in kinds:
        grid = ((0.0,) if include_zero else ()) + tuple(float(v) for v in intensities)
        for intensity in grid:
            for label, _ in datasets:
                cell = by_cell[("zero", 0.0, label)] if intensity == 0.0 else by_cell[(kind, intensity, label)]
                rows.append(ChannelSweepRow(kind, intensity, label,
                                            float(np.mean(cell)), float(np.std(cell))))
    return rows


def channel_sweep_to_csv(rows: list[ChannelSweepRow]) -> str:
    buf = io.StringIO()
    buf.write("kind,intensity,dataset,mean_accuracy,std_accuracy\n")
    for r in rows:
        buf.write(f"{r.kind},{r.intensity!r},{r.dataset},{r.mean_accuracy!r},{r.std_accuracy!r}\n")
    return buf.getvalue()
