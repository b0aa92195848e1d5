"""Dataset generation and ingestion for the experiment harness.

Sources: synthetic Gaussian blobs, two moons, and IDX-format digit images
(downsampled by average pooling). A "noisy" variant adds Gaussian feature
noise and random label flips. Features are min-max scaled to [0, pi] with
statistics fitted on the training split only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.datasets import make_moons

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """An IDX file is missing, truncated, or has the wrong magic number."""


@dataclass(frozen=True)
class NoiseSpec:
    feature_sigma: float = 0.0
    label_flip_prob: float = 0.0

    def __post_init__(self):
        if self.feature_sigma < 0:
            raise ValueError("feature_sigma must be >= 0")
        if not 0.0 <= self.label_flip_prob <= 1.0:
            raise ValueError("label_flip_prob must be in [0, 1]")


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "blobs"  # blobs | moons | idx-digits
    n_samples: int = 240
    n_features: int = 4
    n_classes: int = 2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    splits: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    separation: float = 6.0       # blobs: center distance in units of cluster_std
    cluster_std: float = 1.0
    moons_noise: float = 0.12
    idx_images: str | None = None
    idx_labels: str | None = None
    classes: tuple[int, ...] | None = None  # idx-digits: which labels to keep

    def __post_init__(self):
        if self.source not in ("blobs", "moons", "idx-digits"):
            raise ValueError(f"unknown source {self.source!r}")
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.n_features < 1 or self.n_samples < 4 or self.n_classes < 2:
            raise ValueError("need n_features >= 1, n_samples >= 4, n_classes >= 2")

    def noisy(self, feature_sigma: float, label_flip_prob: float) -> "DatasetSpec":
        return replace(self, noise=NoiseSpec(feature_sigma, label_flip_prob))


@dataclass
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    n_classes: int
    name: str = ""

    @property
    def n_features(self) -> int:
        return self.train_x.shape[1]

    def save_npz(self, path):
        np.savez(path, train_x=self.train_x, train_y=self.train_y,
                 val_x=self.val_x, val_y=self.val_y,
                 test_x=self.test_x, test_y=self.test_y,
                 n_classes=np.array(self.n_classes), name=np.array(self.name))

    @classmethod
    def load_npz(cls, path) -> "Dataset":
        with np.load(path) as d:
            return cls(d["train_x"], d["train_y"], d["val_x"], d["val_y"],
                       d["test_x"], d["test_y"], int(d["n_classes"]), str(d["name"]))


def read_idx_images(path) -> np.ndarray:
    """Parse an IDX image file: magic 0x00000803, big-endian dims, uint8 data."""
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise IdxFormatError(f"cannot read IDX file {path}: {exc}") from exc
    if len(raw) < 16:
        raise IdxFormatError(f"{path} is too short for an IDX image header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: expected magic {IDX_IMAGES_MAGIC:#010x}, got {magic:#010x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if body.size != n * rows * cols:
        raise IdxFormatError(f"{path}: payload size does not match header")
    return body.reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise IdxFormatError(f"cannot read IDX file {path}: {exc}") from exc
    if len(raw) < 8:
        raise IdxFormatError(f"{path} is too short for an IDX label header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"{path}: expected magic {IDX_LABELS_MAGIC:#010x}, got {magic:#010x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if body.size != n:
        raise IdxFormatError(f"{path}: payload size does not match header")
    return body.astype(np.int64)


def _avg_pool(images: np.ndarray, side: int) -> np.ndarray:
    n, h, w = images.shape
    if h % side or w % side:
        raise ValueError(f"cannot pool {h}x{w} images to {side}x{side}")
    bh, bw = h // side, w // side
    return images.reshape(n, side, bh, side, bw).mean(axis=(2, 4))


def _blob_centers(n_classes: int, n_features: int, separation: float, std: float) -> np.ndarray:
    radius = separation * std / 2.0
    centers = np.zeros((n_classes, n_features))
    if n_classes == 2:
        centers[0, 0] = -radius
        centers[1, 0] = radius
    else:
        angles = 2 * np.pi * np.arange(n_classes) / n_classes
        centers[:, 0] = radius * np.cos(angles)
        centers[:, 1 % n_features] = radius * np.sin(angles)
    return centers


def _raw_samples(spec: DatasetSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if spec.source == "blobs":
        centers = _blob_centers(spec.n_classes, spec.n_features, spec.separation, spec.cluster_std)
        reps = -(-spec.n_samples // spec.n_classes)
        y = rng.permutation(np.tile(np.arange(spec.n_classes), reps)[: spec.n_samples])
        x = centers[y] + rng.normal(0.0, spec.cluster_std, size=(spec.n_samples, spec.n_features))
        return x, y
    if spec.source == "moons":
        if spec.n_features != 2 or spec.n_classes != 2:
            raise ValueError("moons is a 2-feature binary dataset")
        x, y = make_moons(n_samples=spec.n_samples, noise=spec.moons_noise,
                          random_state=spec.seed)
        return x.astype(float), y.astype(np.int64)
    # idx-digits
    side = int(round(np.sqrt(spec.n_features)))
    if side * side != spec.n_features:
        raise ValueError(f"n_features={spec.n_features} must be a perfect square for image sources")
    if spec.idx_images is None or spec.idx_labels is None:
        raise IdxFormatError("idx-digits requires idx_images and idx_labels paths")
    images = read_idx_images(spec.idx_images)
    labels = read_idx_labels(spec.idx_labels)
    if len(images) != len(labels):
        raise IdxFormatError("image and label counts differ")
    keep_classes = spec.classes if spec.classes is not None else tuple(range(spec.n_classes))
    if len(keep_classes) != spec.n_classes:
        raise ValueError("classes filter must list n_classes labels")
    mask = np.isin(labels, keep_classes)
    images, labels = images[mask], labels[mask]
    if len(images) < spec.n_samples:
        raise ValueError(f"only {len(images)} samples available after class filtering")
    idx = rng.permutation(len(images))[: spec.n_samples]
    images, labels = images[idx], labels[idx]
    x = _avg_pool(images.astype(float) / 255.0, side).reshape(len(images), -1)
    remap = {c: i for i, c in enumerate(keep_classes)}
    y = np.array([remap[int(v)] for v in labels], dtype=np.int64)
    return x, y


def _apply_noise(x: np.ndarray, y: np.ndarray, noise: NoiseSpec, n_classes: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if noise.feature_sigma > 0:
        x = x + rng.normal(0.0, noise.feature_sigma, size=x.shape)
    if noise.label_flip_prob > 0:
        flip = rng.random(len(y)) < noise.label_flip_prob
        shift = rng.integers(1, n_classes, size=len(y))
        y = np.where(flip, (y + shift) % n_classes, y)
    return x, y


def _stratified_split(y: np.ndarray, fractions, rng: np.random.Generator):
    parts: list[list[int]] = [[], [], []]
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        n = len(idx)
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        n_train = min(n_train, n)
        n_val = min(n_val, n - n_train)
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_val])
        parts[2].extend(idx[n_train + n_val:])
    out = []
    for p in parts:
        p = np.array(sorted(p), dtype=np.int64)
        rng.shuffle(p)
        out.append(p)
    return out


def _scale_to_angle(train_x, *others):
    """Min-max scale features to [0, pi] using training statistics."""
    lo = train_x.min(axis=0)
    hi = train_x.max(axis=0)
    span = np.where(hi - lo > 1e-12, hi - lo, 1.0)

    def tx(x):
        return np.clip((x - lo) / span, 0.0, 1.0) * np.pi

    return (tx(train_x), *[tx(x) for x in others])


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Synthesize (or load) the dataset, add the configured noise, split
    stratified, and scale features to [0, pi]. Byte-deterministic per spec."""
    rng = np.random.default_rng(spec.seed)
    x, y = _raw_samples(spec, rng)
    x, y = _apply_noise(x, y, spec.noise, spec.n_classes, rng)
    tr, va, te = _stratified_split(y, spec.splits, rng)
    train_x, val_x, test_x = x[tr], x[va], x[te]
    train_y, val_y, test_y = y[tr], y[va], y[te]
    train_x, val_x, test_x = _scale_to_angle(train_x, val_x, test_x)
    label = spec.source if spec.noise == NoiseSpec() else f"{spec.source}(N)"
    return Dataset(train_x, train_y, val_x, val_y, test_x, test_y,
                   n_classes=spec.n_classes, name=label)
