"""Federated training across clusters: distribution, aggregation, evaluation.

One communication round: the server sends the global parameters to every
cluster head through the (possibly noisy) quantum channel, each cluster
trains its partitioned model on its local shard under its devices' noise,
uploads the result through the channel again, and the server aggregates
with quantum-volume weights. The global metric is the QV-weighted average
of the aggregated model's per-cluster test performance.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dqnn import PartitionPlan, QnnModel, forward, partition_circuit, train_local
from .mitigation import PecConfig, ZneConfig
from .noise import CHANNEL_FACTORIES, CalibrationNoiseModel, FleetNorms, NoiseWeights, effective_noise
from .selection import (Candidate, SelectionProblem, SelectionResult, aggregate_noise,
                        check_feasible, greedy_select, quantum_volume, random_select)
from .sim import Gate, Observable, apply_channel, apply_gate, expectation, zero_state
from .topology import Cluster, DeviceProfile, form_clusters


class InfeasibleSelectionError(RuntimeError):
    """No cluster selection satisfies the constraints; carries the violations."""

    def __init__(self, cluster_id: str, violations: tuple[str, ...]):
        super().__init__(f"selection infeasible in {cluster_id}: {', '.join(violations)}")
        self.cluster_id = cluster_id
        self.violations = violations

    def __reduce__(self):
        # default exception pickling would replay __init__ with the message
        # string only, which breaks transport out of process pools
        return (InfeasibleSelectionError, (self.cluster_id, self.violations))


@dataclass(frozen=True)
class FederationConfig:
    n_clusters: int = 3
    accuracy_threshold: float = 1.0
    max_rounds: int = 5
    delta: float = 0.5
    parallel_limit: int = 2
    device_limit: int = 3
    partition_type: str = "SYM"
    mitigation: ZneConfig | PecConfig | None = None
    channel_kind: str = "none"
    channel_intensity: float = 0.0
    selection: str = "noise-aware"
    n_qubits: int = 4
    n_layers: int = 2
    lr: float = 0.3
    lr_decay: float = 1.0  # multiplicative per round
    epochs_per_round: int = 1
    local_steps_per_round: int | None = None  # equal per-cluster step budget; overrides epochs
    shard_size: int | None = None  # fixed local dataset size per cluster; None: split the corpus
    batch_size: int = 16
    lambda_mix: float = 0.5
    alpha: float = 0.5
    device_noise: bool = True
    reselect_each_round: bool = False
    noise_weights: NoiseWeights | None = None
    pin_devices: tuple[str, ...] | None = None  # bypass selection, e.g. the S1 single-device run
    cluster_seed: int | None = None  # pin the clustering draw independently of `seed`
    seed: int = 7

    def __post_init__(self):
        if not 0.0 < self.accuracy_threshold <= 1.0:
            raise ValueError("accuracy_threshold must be in (0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.channel_kind != "none" and self.channel_kind not in CHANNEL_FACTORIES:
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        if not 0.0 <= self.channel_intensity <= 1.0:
            raise ValueError("channel intensity must be in [0, 1]")
        if self.selection not in ("noise-aware", "random"):
            raise ValueError(f"unknown selection strategy {self.selection!r}")
        if self.partition_type not in ("SYM", "ASYM"):
            raise ValueError(f"partition_type must be SYM or ASYM")

    @classmethod
    def from_dict(cls, d: dict) -> "FederationConfig":
        d = dict(d)
        mit = d.get("mitigation")
        if isinstance(mit, dict):
            kind = mit.get("kind")
            if kind == "zne":
                d["mitigation"] = ZneConfig(
                    scale_factors=tuple(mit.get("scale_factors", (1, 3, 5))),
                    method=mit.get("method", "linear"))
            elif kind == "pec":
                d["mitigation"] = PecConfig(n_samples=int(mit.get("n_samples", 2000)),
                                            seed=int(mit.get("seed", 0)))
            else:
                raise ValueError(f"unknown mitigation kind {kind!r}")
        nw = d.get("noise_weights")
        if isinstance(nw, (list, tuple)):
            d["noise_weights"] = NoiseWeights(*nw)
        if d.get("pin_devices") is not None:
            d["pin_devices"] = tuple(d["pin_devices"])
        return cls(**d)

    def to_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if isinstance(self.mitigation, ZneConfig):
            doc["mitigation"] = {"kind": "zne", "scale_factors": list(self.mitigation.scale_factors),
                                 "method": self.mitigation.method}
        elif isinstance(self.mitigation, PecConfig):
            doc["mitigation"] = {"kind": "pec", "n_samples": self.mitigation.n_samples,
                                 "seed": self.mitigation.seed}
        if self.noise_weights is not None:
            doc["noise_weights"] = list(self.noise_weights.as_tuple())
        return doc


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    cluster_loss: dict[str, float]
    cluster_accuracy: dict[str, float]
    global_accuracy: float
    global_f1: float
    params_transferred: int


def _subseed(base: int, *key: int) -> int:
    """A stable derived seed for one named stage of the pipeline."""
    return int(np.random.SeedSequence(entropy=base, spawn_key=key).generate_state(1)[0])


def fedavg(param_sets, weights) -> np.ndarray:
    """Eq.-16-style aggregation: normalize the weights, weighted-sum the
    parameter vectors elementwise."""
    arrays = [np.asarray(p, dtype=float) for p in param_sets]
    if not arrays:
        raise ValueError("no parameter sets")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError("parameter vectors must have equal length")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(arrays),):
        raise ValueError("one weight per parameter set required")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and not all zero")
    w = w / w.sum()
    out = np.zeros(shape)
    for wi, a in zip(w, arrays):
        out += wi * a
    return out


def transmit_params(theta: np.ndarray, kind: str, intensity: float,
                    seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Send each parameter through a 1-qubit noisy channel and decode it.

    theta_k (clamped to [-pi, pi]) is encoded as RY(theta_k)|0>, the channel
    is applied, and the angle is decoded as atan2(<X>, <Z>). All four channel
    kinds are deterministic CPTP maps, so no randomness is used; ``seed`` is
    reserved for shot-based decoding. Returns (decoded values, degeneracy
    mask); a parameter decodes to 0 with its flag set when both expectations
    vanish (e.g. full depolarizing).
    """
    theta = np.asarray(theta, dtype=float)
    if kind == "none":
        return theta.copy(), np.zeros(theta.shape, dtype=bool)
    if kind not in CHANNEL_FACTORIES:
        raise ValueError(f"unknown channel kind {kind!r}")
    if not 0.0 <= intensity <= 1.0:
        raise ValueError("intensity must be in [0, 1]")
    channel = CHANNEL_FACTORIES[kind](intensity)
    out = np.empty_like(theta)
    degenerate = np.zeros(theta.shape, dtype=bool)
    obs_z, obs_x = Observable("Z"), Observable("X")
    for i, raw in np.ndenumerate(theta):
        angle = float(np.clip(raw, -math.pi, math.pi))
        state = apply_gate(zero_state(1), Gate("RY", (0,), angle))
        state = apply_channel(state, channel, (0,))
        z = expectation(state, obs_z)
        x = expectation(state, obs_x)
        if math.hypot(x, z) < 1e-12:
            out[i] = 0.0
            degenerate[i] = True
        else:
            out[i] = math.atan2(x, z)
    return out, degenerate


def evaluate(model: QnnModel, plan: PartitionPlan, features, labels,
             noise_map: dict | None = None, mitigation=None) -> tuple[float, float]:
    """(accuracy, macro F1) of argmax-of-logits classification.

    Argmax ties break toward the lower class index; a class with an empty
    prediction/truth intersection contributes F1 = 0.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if len(features) == 0:
        raise ValueError("evaluation set is empty")
    preds = np.empty(len(features), dtype=int)
    for i, x in enumerate(features):
        preds[i] = int(np.argmax(forward(model, plan, x, noise_map, mitigation).logits))
    accuracy = float((preds == labels).mean())
    f1s = []
    for c in range(model.n_classes):
        tp = int(((preds == c) & (labels == c)).sum())
        fp = int(((preds == c) & (labels != c)).sum())
        fn = int(((preds != c) & (labels == c)).sum())
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return accuracy, float(np.mean(f1s))


@dataclass
class ClusterState:
    cluster: Cluster
    selection: SelectionResult
    plan: PartitionPlan
    weight: float
    noise_map: dict | None
    shard: tuple[np.ndarray, np.ndarray]


@dataclass
class FederationRun:
    model: QnnModel
    rounds: list[RoundRecord]
    clusters: list[ClusterState]
    config: FederationConfig | None = field(repr=False, default=None)

    def final_accuracy(self) -> float:
        return self.rounds[-1].global_accuracy

    def best_accuracy(self) -> float:
        """Best global accuracy over rounds: the checkpoint a server keeps."""
        return max(r.global_accuracy for r in self.rounds)

    def rounds_to_accuracy(self, target: float) -> int:
        """First round index reaching the target accuracy; max_rounds + 1 if never."""
        for rec in self.rounds:
            if rec.global_accuracy >= target:
                return rec.round_index
        return self.config.max_rounds + 1 if self.config else len(self.rounds) + 1


def _device_qv(device: DeviceProfile, seed: int) -> float:
    if device.quantum_volume is not None:
        return float(device.quantum_volume)
    return float(quantum_volume(device, seed=seed, max_width=3))


def _select_for_cluster(config: FederationConfig, cluster: Cluster,
                        by_id: dict[str, DeviceProfile], n_eff: dict[str, float],
                        qv: dict[str, float], data_dim: int, seed: int) -> SelectionResult:
    candidates = tuple(
        Candidate(mid, by_id[mid].capacity, n_eff[mid], qv[mid]) for mid in cluster.members
    )
    problem = SelectionProblem(
        candidates=candidates,
        model_capacity=config.n_qubits,
        noise_threshold=config.delta,
        parallel_limit=config.parallel_limit,
        data_dim=data_dim,
        device_limit=config.device_limit,
    )
    if config.pin_devices is not None:
        ids = tuple(sorted(i for i in config.pin_devices if i in cluster.members))
        if not ids:
            return greedy_select(problem)
        report = check_feasible(problem, ids)
        chosen = [problem.by_id(i) for i in ids]
        return SelectionResult(
            ids, aggregate_noise(chosen), float(np.mean([c.quantum_volume for c in chosen])),
            report.feasible, report.violations)
    if config.selection == "random":
        return random_select(problem, seed=seed)
    return greedy_select(problem)


def _prepare_clusters(config: FederationConfig, fleet: list[DeviceProfile],
                      model: QnnModel, train_x, train_y) -> list[ClusterState]:
    by_id = {d.id: d for d in fleet}
    cluster_seed = (config.cluster_seed if config.cluster_seed is not None
                    else _subseed(config.seed, 1))
    clusters = form_clusters(fleet, config.n_clusters, seed=cluster_seed,
                             lambda_mix=config.lambda_mix, alpha=config.alpha)
    norms = FleetNorms.from_fleet([d.calibration for d in fleet])
    n_eff = {d.id: effective_noise(d.calibration, config.noise_weights, norms).n_eff
             for d in fleet}
    qv = {d.id: _device_qv(d, _subseed(config.seed, 2, i)) for i, d in enumerate(fleet)}

    rng = np.random.default_rng(_subseed(config.seed, 3))
    perm = rng.permutation(len(train_x))
    if config.shard_size is None:
        shards = np.array_split(perm, config.n_clusters)
    else:
        needed = config.shard_size * config.n_clusters
        if needed > len(train_x):
            raise ValueError(
                f"{config.n_clusters} clusters x shard_size {config.shard_size} "
                f"exceeds the {len(train_x)} training samples")
        shards = [perm[k * config.shard_size:(k + 1) * config.shard_size]
                  for k in range(config.n_clusters)]

    states = []
    pauli_only = isinstance(config.mitigation, PecConfig)
    for k, cluster in enumerate(clusters):
        sel = _select_for_cluster(config, cluster, by_id, n_eff, qv,
                                  data_dim=model.data_dim,
                                  seed=_subseed(config.seed, 4, k))
        if not sel.feasible:
            raise InfeasibleSelectionError(cluster.id, sel.violations)
        selected_devices = [by_id[i] for i in sel.selected]
        plan = partition_circuit(model, selected_devices, config.partition_type)
        noise_map = None
        if config.device_noise:
            noise_map = {d.id: CalibrationNoiseModel(d.calibration, pauli_only=pauli_only)
                         for d in selected_devices}
        shard_idx = shards[k]
        states.append(ClusterState(
            cluster=cluster, selection=sel, plan=plan,
            weight=sel.avg_quantum_volume,
            noise_map=noise_map,
            shard=(train_x[shard_idx], train_y[shard_idx]),
        ))
    return states


def run_round(config: FederationConfig, states: list[ClusterState],
              global_model: QnnModel, round_index: int,
              test_x, test_y) -> tuple[QnnModel, RoundRecord]:
    """One Algorithm-1 round: download, local distributed training per
    cluster, upload, QV-weighted aggregation, global test evaluation."""
    kind, p = config.channel_kind, config.channel_intensity
    lr = config.lr * config.lr_decay ** (round_index - 1)
    thetas, readout_ws, readout_bs = [], [], []
    cluster_loss, cluster_acc = {}, {}
    for k, st in enumerate(states):
        theta_down, _ = transmit_params(global_model.params, kind, p,
                                        seed=_subseed(config.seed, 10, round_index, k))
        local = global_model.copy()
        local.params = theta_down
        epochs = config.epochs_per_round
        if config.local_steps_per_round is not None:
            # equal per-cluster compute per round, whatever the shard size
            steps_per_epoch = max(1, math.ceil(len(st.shard[0]) / config.batch_size))
            epochs = max(1, round(config.local_steps_per_round / steps_per_epoch))
        trained, losses = train_local(
            local, st.plan, st.shard[0], st.shard[1],
            epochs=epochs, lr=lr,
            noise_map=st.noise_map, mitigation=config.mitigation,
            seed=_subseed(config.seed, 11, round_index, k),
            batch_size=config.batch_size,
        )
        theta_up, _ = transmit_params(trained.params, kind, p,
                                      seed=_subseed(config.seed, 12, round_index, k))
        thetas.append(theta_up)
        readout_ws.append(trained.readout.weights.ravel())
        readout_bs.append(trained.readout.bias)
        acc, _ = evaluate(trained, st.plan, st.shard[0], st.shard[1],
                          st.noise_map, config.mitigation)
        cluster_loss[st.cluster.id] = losses[-1]
        cluster_acc[st.cluster.id] = acc

    weights = [st.weight for st in states]
    new_model = global_model.copy()
    new_model.params = fedavg(thetas, weights)
    new_model.readout.weights = fedavg(readout_ws, weights).reshape(global_model.readout.weights.shape)
    new_model.readout.bias = fedavg(readout_bs, weights)

    w_norm = np.asarray(weights, dtype=float)
    w_norm = w_norm / w_norm.sum()
    accs, f1s = [], []
    for st in states:
        a, f = evaluate(new_model, st.plan, test_x, test_y, st.noise_map, config.mitigation)
        accs.append(a)
        f1s.append(f)
    global_acc = float(np.dot(w_norm, accs))
    global_f1 = float(np.dot(w_norm, f1s))

    scalars_per_model = global_model.params.size + global_model.readout.weights.size + global_model.readout.bias.size
    record = RoundRecord(
        round_index=round_index,
        cluster_loss=cluster_loss,
        cluster_accuracy=cluster_acc,
        global_accuracy=global_acc,
        global_f1=global_f1,
        params_transferred=2 * len(states) * scalars_per_model,
    )
    return new_model, record


def run_federation(config: FederationConfig, fleet: list[DeviceProfile],
                   dataset) -> FederationRun:
    """Full federated training: cluster, select, partition once, then loop
    rounds until the accuracy threshold is exceeded or rounds run out.
    Bit-reproducible for fixed seeds."""
    n_classes = dataset.n_classes
    model = QnnModel.init(config.n_qubits, config.n_layers, n_classes,
                          dataset.train_x.shape[1], seed=_subseed(config.seed, 0))
    states = _prepare_clusters(config, fleet, model, dataset.train_x, dataset.train_y)
    rounds: list[RoundRecord] = []
    for i in range(1, config.max_rounds + 1):
        if config.reselect_each_round and i > 1:
            states = _prepare_clusters(config, fleet, model, dataset.train_x, dataset.train_y)
        model, record = run_round(config, states, model, i, dataset.test_x, dataset.test_y)
        rounds.append(record)
        if record.global_accuracy > config.accuracy_threshold:
            break
    return FederationRun(model=model, rounds=rounds, clusters=states, config=config)


def history_to_csv(rounds: list[RoundRecord]) -> str:
    """history.csv: one row per cluster per round plus a "global" row."""
    buf = io.StringIO()
    buf.write("round,cluster_id,loss,accuracy,f1,params_transferred\n")
    for rec in rounds:
        for cid in sorted(rec.cluster_loss):
            buf.write(f"{rec.round_index},{cid},{rec.cluster_loss[cid]!r},"
                      f"{rec.cluster_accuracy[cid]!r},,\n")
        buf.write(f"{rec.round_index},global,,{rec.global_accuracy!r},"
                  f"{rec.global_f1!r},{rec.params_transferred}\n")
    return buf.getvalue()
