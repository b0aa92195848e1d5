"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 infeasible device selection.
Fleet arguments accept a JSON file path or the literal ``bundled`` for the
packaged device profiles. ``NACQFL_DATA_DIR`` is prepended to relative IDX
dataset paths.
"""

from __future__ import annotations

import functools
import json
import os
import pathlib
import sys

import click
import numpy as np

from .data import Dataset, DatasetSpec, IdxFormatError, NoiseSpec, generate_dataset
from .dqnn import model_to_dict
from .federation import FederationConfig, InfeasibleSelectionError, history_to_csv, run_federation
from .mitigation import (PecConfig, ZneConfig, benchmark_circuit, pec_estimate,
                         zne_expectations)
from .noise import (CalibrationError, DepolarizingNoiseModel, FleetNorms, PauliNoiseModel,
                    effective_noise)
from .presets import (PRESET_NAMES, blob_benchmark_spec, channel_sweep_to_csv,
                      cluster_sweep_to_csv, preset_config, run_preset, summary_to_csv,
                      sweep_channel_noise, sweep_clusters)
from .selection import Candidate, SelectionProblem, brute_force_select, greedy_select, quantum_volume
from .sim import Observable, run_circuit, z_expectations
from .topology import bundled_fleet, form_clusters, load_fleet


def harness(fn):
    """Map configuration failures to exit code 2 and infeasibility to 3."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InfeasibleSelectionError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (ValueError, KeyError, OSError, json.JSONDecodeError,
                CalibrationError, IdxFormatError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _load_fleet_arg(fleet: str):
    if fleet == "bundled":
        return bundled_fleet()
    return load_fleet(fleet)


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def _write_or_echo(text: str, out: str | None):
    if out:
        pathlib.Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@click.group()
def main():
    """Noise-aware clustered quantum federated learning, simulated."""


@main.command()
@click.option("--fleet", default="bundled", show_default=True)
@click.option("--n", "n_clusters", type=int, required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--lambda", "lambda_mix", type=float, default=0.5, show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--out", required=True)
@harness
def cluster(fleet, n_clusters, seed, lambda_mix, alpha, out):
    """Cluster the fleet and elect cluster heads."""
    devices = _load_fleet_arg(fleet)
    clusters = form_clusters(devices, n_clusters, seed, lambda_mix, alpha)
    doc = {
        "fleet": fleet,
        "n_clusters": n_clusters,
        "seed": seed,
        "lambda_mix": lambda_mix,
        "alpha": alpha,
        "clusters": [c.to_dict() for c in clusters],
    }
    pathlib.Path(out).write_text(json.dumps(doc, indent=1) + "\n")
    for c in clusters:
        click.echo(f"{c.id}: head={c.head} members={','.join(c.members)}")


@main.command()
@click.option("--cluster", "cluster_ref", required=True,
              help="clusters.json#C1 (file produced by `nacqfl cluster`)")
@click.option("--fleet", default=None, help="override the fleet recorded in the clusters file")
@click.option("--model-qubits", type=int, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--plim", type=int, required=True)
@click.option("--dim", type=int, required=True)
@click.option("--max-devices", type=int, required=True)
@click.option("--oracle", is_flag=True, help="use the exhaustive oracle instead of the greedy scan")
@click.option("--qv-seed", type=int, default=11, show_default=True)
@click.option("--out", default=None)
@harness
def select(cluster_ref, fleet, model_qubits, delta, plim, dim, max_devices, oracle, qv_seed, out):
    """Solve the noise-aware device selection problem for one cluster."""
    if "#" not in cluster_ref:
        raise ValueError("--cluster must look like clusters.json#C1")
    path, cluster_id = cluster_ref.split("#", 1)
    doc = json.loads(pathlib.Path(path).read_text())
    wanted = next((c for c in doc["clusters"] if c["id"] == cluster_id), None)
    if wanted is None:
        raise ValueError(f"cluster {cluster_id!r} not found in {path}")
    devices = _load_fleet_arg(fleet if fleet is not None else doc["fleet"])
    by_id = {d.id: d for d in devices}
    norms = FleetNorms.from_fleet([d.calibration for d in devices])
    candidates = []
    for i, mid in enumerate(sorted(wanted["members"])):
        dev = by_id[mid]
        qv = dev.quantum_volume
        if qv is None:
            qv = quantum_volume(dev, seed=qv_seed + i, max_width=3)
        candidates.append(Candidate(mid, dev.capacity,
                                    effective_noise(dev.calibration, norms=norms).n_eff,
                                    float(qv)))
    problem = SelectionProblem(tuple(candidates), model_qubits, delta, plim, dim, max_devices)
    result = brute_force_select(problem) if oracle else greedy_select(problem)
    text = json.dumps(result.to_dict(), indent=1) + "\n"
    _write_or_echo(text, out)
    if not result.feasible:
        sys.exit(3)


@main.command("make-dataset")
@click.option("--source", type=click.Choice(["blobs", "moons", "idx-digits"]), default="blobs",
              show_default=True)
@click.option("--n", "n_samples", type=int, default=240, show_default=True)
@click.option("--d", "n_features", type=int, default=4, show_default=True)
@click.option("--classes", type=int, default=2, show_default=True)
@click.option("--sigma", type=float, default=0.0, show_default=True,
              help="additive Gaussian feature noise")
@click.option("--flip", type=float, default=0.0, show_default=True,
              help="label flip probability")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--splits", default="0.7,0.1,0.2", show_default=True)
@click.option("--idx-images", default=None)
@click.option("--idx-labels", default=None)
@click.option("--keep-classes", default=None, help="comma list of IDX labels to keep")
@click.option("--out", required=True)
@harness
def make_dataset(source, n_samples, n_features, classes, sigma, flip, seed, splits,
                 idx_images, idx_labels, keep_classes, out):
    """Generate (or ingest) a dataset and store it as .npz."""
    data_dir = os.environ.get("NACQFL_DATA_DIR")

    def resolve(p):
        if p is None or os.path.isabs(p) or data_dir is None:
            return p
        return os.path.join(data_dir, p)

    spec = DatasetSpec(
        source=source, n_samples=n_samples, n_features=n_features, n_classes=classes,
        noise=NoiseSpec(sigma, flip),
        splits=tuple(float(x) for x in splits.split(",")),
        seed=seed,
        idx_images=resolve(idx_images), idx_labels=resolve(idx_labels),
        classes=tuple(int(c) for c in keep_classes.split(",")) if keep_classes else None,
    )
    dataset = generate_dataset(spec)
    dataset.save_npz(out)
    click.echo(f"wrote {out}: train {dataset.train_x.shape} val {dataset.val_x.shape} "
               f"test {dataset.test_x.shape} classes {dataset.n_classes}")


def _config_from_doc(doc: dict) -> tuple[FederationConfig, DatasetSpec, str]:
    fed = FederationConfig.from_dict(doc.get("federation", {}))
    ds = doc.get("dataset", {})
    noise_doc = ds.pop("noise", None)
    if noise_doc is not None:
        ds["noise"] = NoiseSpec(**noise_doc)
    if "splits" in ds:
        ds["splits"] = tuple(ds["splits"])
    if "classes" in ds and ds["classes"] is not None:
        ds["classes"] = tuple(ds["classes"])
    spec = DatasetSpec(**ds) if ds else blob_benchmark_spec(seed=fed.seed)
    return fed, spec, doc.get("fleet", "bundled")


@main.command()
@click.option("--config", "config_path", required=True)
@click.option("--out", required=True, help="history CSV path")
@harness
def federate(config_path, out):
    """Run the full clustered federation described by a config JSON."""
    doc = json.loads(pathlib.Path(config_path).read_text())
    config, spec, fleet_arg = _config_from_doc(doc)
    fleet = _load_fleet_arg(fleet_arg)
    dataset = generate_dataset(spec)
    run = run_federation(config, fleet, dataset)
    pathlib.Path(out).write_text(history_to_csv(run.rounds))
    last = run.rounds[-1]
    click.echo(f"rounds={len(run.rounds)} accuracy={last.global_accuracy:.4f} "
               f"f1={last.global_f1:.4f} -> {out}")


@main.command()
@click.option("--config", "config_path", default=None,
              help="same JSON shape as `federate`; defaults to a single-cluster run")
@click.option("--dataset", "dataset_npz", default=None, help="npz produced by make-dataset")
@click.option("--epochs", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--mitigation", type=click.Choice(["none", "zne", "pec"]), default="none",
              show_default=True)
@click.option("--out", default=None, help="model checkpoint JSON")
@harness
def train(config_path, dataset_npz, epochs, seed, mitigation, out):
    """Train a partitioned model on one cluster (no federation loop)."""
    if config_path:
        doc = json.loads(pathlib.Path(config_path).read_text())
        config, spec, fleet_arg = _config_from_doc(doc)
    else:
        config, spec, fleet_arg = preset_config("S2", seed=seed), blob_benchmark_spec(seed=seed), "bundled"
    overrides = {"n_clusters": 1, "max_rounds": 1, "epochs_per_round": epochs, "seed": seed}
    if mitigation == "zne":
        overrides["mitigation"] = ZneConfig()
    elif mitigation == "pec":
        overrides["mitigation"] = PecConfig(n_samples=64, seed=seed)
    config = FederationConfig(**{**config.to_dict(), **overrides})
    fleet = _load_fleet_arg(fleet_arg)
    dataset = Dataset.load_npz(dataset_npz) if dataset_npz else generate_dataset(spec)
    run = run_federation(config, fleet, dataset)
    state = run.clusters[0]
    click.echo(f"selected={','.join(state.selection.selected)} "
               f"accuracy={run.rounds[-1].global_accuracy:.4f}")
    if out:
        doc = model_to_dict(run.model, state.plan)
        pathlib.Path(out).write_text(json.dumps(doc) + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--name", type=click.Choice(PRESET_NAMES), required=True)
@click.option("--source", type=click.Choice(["blobs", "moons"]), default="blobs", show_default=True)
@click.option("--noisy", is_flag=True, help="use the noisy dataset variant")
@click.option("--seeds", default="1,2,3", show_default=True)
@click.option("--variants", default=None, help="comma list; default runs all")
@click.option("--rounds", type=int, default=None)
@click.option("--out", default=None)
@harness
def preset(name, source, noisy, seeds, variants, rounds, out):
    """Run one of the S1-S5 experiment settings."""
    spec = blob_benchmark_spec(noisy=noisy)
    if source == "moons":
        spec = DatasetSpec(source="moons", n_samples=spec.n_samples, n_features=2,
                           n_classes=2, noise=spec.noise, splits=spec.splits)
    overrides = {} if rounds is None else {"max_rounds": rounds}
    chosen = tuple(v.strip() for v in variants.split(",")) if variants else None
    rows = run_preset(name, spec, _parse_seeds(seeds), variants=chosen, **overrides)
    _write_or_echo(summary_to_csv(rows), out)


@main.command("sweep-clusters")
@click.option("--counts", default="1,3,5,7", show_default=True)
@click.option("--seeds", default="1,2,3", show_default=True)
@click.option("--target", type=float, default=0.9, show_default=True)
@click.option("--out", default=None)
@harness
def sweep_clusters_cmd(counts, seeds, target, out):
    """Vary the number of clusters on the benchmark task."""
    rows = sweep_clusters(blob_benchmark_spec(), _parse_seeds(seeds),
                          counts=tuple(int(c) for c in counts.split(",")),
                          target_accuracy=target)
    _write_or_echo(cluster_sweep_to_csv(rows), out)


@main.command("sweep-channel")
@click.option("--kinds", default="bitflip,phaseflip,depolarizing,ampdamp", show_default=True)
@click.option("--intensities", default="0.01,0.05,0.10,0.25", show_default=True)
@click.option("--seeds", default="1,2,3", show_default=True)
@click.option("--out", default=None)
@harness
def sweep_channel_cmd(kinds, intensities, seeds, out):
    """Grid over channel kinds and intensities, clean and noisy datasets."""
    rows = sweep_channel_noise(
        blob_benchmark_spec(), blob_benchmark_spec(noisy=True), _parse_seeds(seeds),
        kinds=tuple(k.strip() for k in kinds.split(",")),
        intensities=tuple(float(v) for v in intensities.split(",")),
    )
    _write_or_echo(channel_sweep_to_csv(rows), out)


@main.command("mitigate-bench")
@click.option("--noise", "noise_arg", default="depolarizing:0.02", show_default=True,
              help="kind:p, e.g. depolarizing:0.02 or bitflip:0.05")
@click.option("--method", type=click.Choice(["zne", "pec"]), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--pec-samples", type=int, default=20000, show_default=True)
@click.option("--out", default=None)
@harness
def mitigate_bench(noise_arg, method, seed, pec_samples, out):
    """ZNE/PEC benchmark on the 3-qubit reference circuit; emits one CSV row."""
    kind, _, value = noise_arg.partition(":")
    p = float(value)
    if kind == "depolarizing":
        noise_model = DepolarizingNoiseModel(p)
    elif kind == "bitflip":
        noise_model = PauliNoiseModel(p, 0.0, 0.0)
    elif kind == "phaseflip":
        noise_model = PauliNoiseModel(0.0, 0.0, p)
    else:
        raise ValueError(f"unsupported noise kind {kind!r} for mitigation benchmarks")
    circuit = benchmark_circuit(3, 2, seed)
    ideal = float(z_expectations(run_circuit(circuit), [0])[0])
    raw = float(z_expectations(run_circuit(circuit, noise_model), [0])[0])
    if method == "zne":
        mitigated = float(zne_expectations(circuit, noise_model, [0], ZneConfig())[0])
    else:
        mitigated = pec_estimate(circuit, noise_model, Observable("ZII"),
                                 n_samples=pec_samples, seed=seed).estimate
    text = ("method,ideal,raw,mitigated,abs_error\n"
            f"{method},{ideal!r},{raw!r},{mitigated!r},{abs(mitigated - ideal)!r}\n")
    _write_or_echo(text, out)


if __name__ == "__main__":
    main()
