"""Device fleet, link-capacity distance metric, K-means clustering, head election.

Every device carries a 2-D position (km) and a Pauli-channel description of
its quantum link. A device-centroid pair is scored by a convex combination
of normalized spatial distance and normalized link quality, where the pair's
link is the midpoint of the two Pauli triples. Centroids live in the joint
feature space (x, y, px, py, pz) and are updated to member means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .noise import CalibrationData


def channel_capacity(link_pauli: tuple[float, float, float]) -> float:
    """Entanglement-assisted capacity of a Pauli link: 2 - H(qI, qx, qy, qz) bits."""
    px, py, pz = link_pauli
    if min(px, py, pz) < 0 or px + py + pz > 1 + 1e-12:
        raise ValueError(f"invalid Pauli probabilities {link_pauli}")
    q = np.array([max(0.0, 1.0 - px - py - pz), px, py, pz])
    nz = q[q > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return 2.0 - entropy


def distance_metric(d_km: float, ce: float, d_max: float, alpha: float = 0.5) -> float:
    """Convex mix of spatial distance and link quality; lower is closer."""
    if d_km < 0:
        raise ValueError("distance must be >= 0")
    if not 0.0 <= ce <= 2.0 + 1e-12:
        raise ValueError("channel capacity must be in [0, 2]")
    spatial = d_km / d_max if d_max > 0 else 0.0
    return alpha * spatial + (1.0 - alpha) * (1.0 - ce / 2.0)


@dataclass(frozen=True)
class DeviceProfile:
    """One simulated quantum device: capacity, calibration, link, position."""

    id: str
    capacity: int
    position: tuple[float, float]
    calibration: CalibrationData
    classical_resources: float
    link_pauli: tuple[float, float, float]
    quantum_volume: int | None = None

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.classical_resources < 0:
            raise ValueError("classical_resources must be >= 0")
        if self.calibration.n_qubits != self.capacity:
            raise ValueError(
                f"calibration covers {self.calibration.n_qubits} qubits, capacity is {self.capacity}"
            )
        channel_capacity(self.link_pauli)  # validates the triple
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        object.__setattr__(self, "link_pauli", tuple(float(x) for x in self.link_pauli))

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        return cls(
            id=str(d["id"]),
            capacity=int(d["capacity"]),
            position=tuple(d["position"]),
            calibration=CalibrationData.from_dict(d["calibration"]),
            classical_resources=float(d["classical_resources"]),
            link_pauli=tuple(d["link_pauli"]),
            quantum_volume=int(d["quantum_volume"]) if d.get("quantum_volume") is not None else None,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "capacity": self.capacity,
            "position": list(self.position),
            "calibration": self.calibration.to_dict(),
            "classical_resources": self.classical_resources,
            "link_pauli": list(self.link_pauli),
            "quantum_volume": self.quantum_volume,
        }


def load_fleet(path) -> list[DeviceProfile]:
    with open(path) as fh:
        docs = json.load(fh)
    return [DeviceProfile.from_dict(d) for d in docs]


def bundled_fleet() -> list[DeviceProfile]:
    """The packaged synthetic device profiles (illustrative fixtures)."""
    out = []
    root = resources.files("nacqfl").joinpath("profiles")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out.append(DeviceProfile.from_dict(json.loads(entry.read_text())))
    return out


@dataclass(frozen=True)
class Cluster:
    """A group of device ids with an elected head."""

    id: str
    members: tuple[str, ...]
    head: str | None = None
    head_score: float | None = None

    def to_dict(self) -> dict:
        return {"id": self.id, "members": list(self.members),
                "head": self.head, "head_score": self.head_score}

    @classmethod
    def from_dict(cls, d: dict) -> "Cluster":
        return cls(id=d["id"], members=tuple(d["members"]),
                   head=d.get("head"), head_score=d.get("head_score"))


def _features(device: DeviceProfile) -> np.ndarray:
    return np.array([*device.position, *device.link_pauli])


def _max_pairwise_distance(feats: np.ndarray) -> float:
    pos = feats[:, :2]
    diff = pos[:, None, :] - pos[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def _delta_to_centroids(feats: np.ndarray, centroids: np.ndarray,
                        d_max: float, alpha: float) -> np.ndarray:
    """delta[i, j] between device i and centroid j."""
    n, k = len(feats), len(centroids)
    out = np.empty((n, k))
    for j in range(k):
        d = np.sqrt(((feats[:, :2] - centroids[j, :2]) ** 2).sum(-1))
        mid = np.clip((feats[:, 2:] + centroids[j, 2:]) / 2.0, 0.0, 1.0)
        for i in range(n):
            ce = channel_capacity(tuple(mid[i]))
            out[i, j] = distance_metric(float(d[i]), ce, d_max, alpha)
    return out


def _plusplus_init(feats: np.ndarray, n_clusters: int, d_max: float, alpha: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Pick initial centroids from the devices, each new one drawn with
    probability proportional to its squared distance from those already
    chosen (k-means++ seeding; far less prone to degenerate splits than
    uniform draws while still random-from-devices)."""
    chosen = [int(rng.integers(len(feats)))]
    while len(chosen) < n_clusters:
        delta = _delta_to_centroids(feats, feats[chosen], d_max, alpha)
        d2 = delta.min(axis=1) ** 2
        d2[chosen] = 0.0
        total = d2.sum()
        if total <= 0:
            remaining = [i for i in range(len(feats)) if i not in chosen]
            chosen.append(int(rng.choice(remaining)))
        else:
            chosen.append(int(rng.choice(len(feats), p=d2 / total)))
    return feats[chosen].copy()


def _repair_empty(assign: np.ndarray, delta: np.ndarray, n_clusters: int) -> np.ndarray:
    """Move the worst-assigned device into each empty cluster (deterministic)."""
    assign = assign.copy()
    for j in range(n_clusters):
        if (assign == j).any():
            continue
        counts = np.bincount(assign, minlength=n_clusters)
        movable = np.flatnonzero(counts[assign] > 1)
        worst = movable[np.argmax(delta[movable, assign[movable]])]
        assign[worst] = j
    return assign


def _kmeans(feats: np.ndarray, n_clusters: int, seed: int, max_iter: int,
            alpha: float) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Core loop; returns (assignment, centroids, per-iteration objective)."""
    rng = np.random.default_rng(seed)
    d_max = _max_pairwise_distance(feats)
    centroids = _plusplus_init(feats, n_clusters, d_max, alpha, rng)
    assign = np.full(len(feats), -1)
    objective: list[float] = []
    for _ in range(max_iter):
        delta = _delta_to_centroids(feats, centroids, d_max, alpha)
        assign = _repair_empty(delta.argmin(axis=1), delta, n_clusters)
        objective.append(float(delta[np.arange(len(feats)), assign].sum()))
        new_centroids = centroids.copy()
        for j in range(n_clusters):
            new_centroids[j] = feats[assign == j].mean(axis=0)
        if np.allclose(new_centroids, centroids, atol=1e-12):
            break
        centroids = new_centroids
    return assign, centroids, objective


def kmeans_cluster(devices: list[DeviceProfile], n_clusters: int, seed: int,
                   max_iter: int = 50, alpha: float = 0.5) -> list[Cluster]:
    """Cluster the fleet by the link-aware distance metric (heads unset)."""
    if not 1 <= n_clusters <= len(devices):
        raise ValueError(f"n_clusters must be in [1, {len(devices)}], got {n_clusters}")
    feats = np.array([_features(d) for d in devices])
    assign, _, _ = _kmeans(feats, n_clusters, seed, max_iter, alpha)
    clusters = []
    for j in range(n_clusters):
        member_ids = sorted(devices[i].id for i in np.flatnonzero(assign == j))
        clusters.append(Cluster(id=f"C{j + 1}", members=tuple(member_ids)))
    return clusters


def elect_head(cluster: Cluster, devices: list[DeviceProfile],
               lambda_mix: float = 0.5) -> tuple[str, float]:
    """Head = argmax of lambda * Ce_hat + (1 - lambda) * R_hat over members.

    Ce and R are normalized by their fleet maxima; ties break toward the
    lexicographically smallest id.
    """
    if not 0.0 < lambda_mix < 1.0:
        raise ValueError("lambda must be in (0, 1)")
    if not cluster.members:
        raise ValueError("cluster has no members")
    by_id = {d.id: d for d in devices}
    ce_max = max(channel_capacity(d.link_pauli) for d in devices) or 1.0
    r_max = max(d.classical_resources for d in devices) or 1.0
    best_id, best_score = None, -1.0
    for mid in sorted(cluster.members):
        dev = by_id[mid]
        score = (lambda_mix * channel_capacity(dev.link_pauli) / ce_max
                 + (1.0 - lambda_mix) * dev.classical_resources / r_max)
        if score > best_score + 1e-15:
            best_id, best_score = mid, score
    return best_id, best_score


def form_clusters(devices: list[DeviceProfile], n_clusters: int, seed: int,
                  lambda_mix: float = 0.5, alpha: float = 0.5,
                  max_iter: int = 50) -> list[Cluster]:
    """Cluster the fleet and elect one head per cluster."""
    clusters = kmeans_cluster(devices, n_clusters, seed, max_iter, alpha)
    out = []
    for c in clusters:
        head, score = elect_head(c, devices, lambda_mix)
        out.append(Cluster(id=c.id, members=c.members, head=head, head_score=score))
    return out
