"""Synthetic benchmark data, CSV/PGM serialization, and the median filter.

In-domain data is K unit-variance Gaussian clusters centered on a
radius-4 circle. The shifted generator reuses the same code path with
translated centers and rescaled features (a mild covariate-shift
analog); the far generator samples a radius-12 ring, well clear of the
clusters. All randomness flows from explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "CLUSTER_RADIUS",
    "RING_RADIUS",
    "RING_NOISE",
    "ExampleSet",
    "DatasetSplit",
    "GrayImage",
    "gen_in_domain",
    "gen_shifted",
    "gen_far_ood",
    "split",
    "load_csv",
    "save_csv",
    "median_filter",
    "load_pgm",
    "save_pgm",
]

CLUSTER_RADIUS = 4.0
RING_RADIUS = 12.0
RING_NOISE = 0.5


@dataclass
class ExampleSet:
    """Feature matrix (n, d) with optional integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        self.features = feats
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (feats.shape[0],):
                raise ValueError("labels must have one entry per example")
            if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
                raise ValueError("labels must be nonnegative integers")
            self.labels = labels.astype(np.int64)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices) -> "ExampleSet":
        idx = np.asarray(indices)
        labels = None if self.labels is None else self.labels[idx]
        return ExampleSet(self.features[idx], labels)


@dataclass
class DatasetSplit:
    train: ExampleSet
    validation: ExampleSet
    test: ExampleSet


def _cluster_centers(classes: int) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(classes) / classes
    return CLUSTER_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])


def _gen_clusters(n: int, classes: int, seed: int, shift: float, scale: float) -> ExampleSet:
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if n < classes:
        raise ValueError("need at least one example per class")
    if not (math.isfinite(shift) and math.isfinite(scale) and scale > 0.0):
        raise ValueError("shift must be finite and scale positive")
    rng = np.random.default_rng(seed)
    centers = _cluster_centers(classes) + shift
    counts = [n // classes + (1 if k < n % classes else 0) for k in range(classes)]
    blocks = [centers[k] + rng.standard_normal((counts[k], 2)) for k in range(classes)]
    features = scale * np.vstack(blocks)
    labels = np.repeat(np.arange(classes), counts)
    return ExampleSet(features, labels)


def gen_in_domain(n: int, classes: int, seed: int) -> ExampleSet:
    """Balanced labeled sample from the in-domain cluster mixture."""
    return _gen_clusters(n, classes, seed, shift=0.0, scale=1.0)


def gen_shifted(n: int, classes: int, seed: int, shift: float, scale: float) -> ExampleSet:
    """Cluster mixture with centers translated by (shift, shift) and features scaled."""
    return _gen_clusters(n, classes, seed, shift=shift, scale=scale)


def gen_far_ood(n: int, seed: int) -> ExampleSet:
    """Unlabeled points on the radius-12 ring with +-0.5 radial noise."""
    if n < 1:
        raise ValueError("need at least one example")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    radius = RING_RADIUS + rng.uniform(-RING_NOISE, RING_NOISE, n)
    return ExampleSet(np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]))


def split(examples: ExampleSet, fractions, seed: int) -> DatasetSplit:
    """Seeded shuffle, then contiguous train/validation/test partition.

    Validation and test sizes are floor-rounded; the remainder goes to
    train.
    """
    fracs = tuple(float(f) for f in fractions)
    if len(fracs) != 3 or any(f <= 0.0 for f in fracs):
        raise ValueError("fractions must be three positive values")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(examples)
    if n < 3:
        raise ValueError("need at least 3 examples to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = math.floor(fracs[1] * n)
    n_test = math.floor(fracs[2] * n)
    n_train = n - n_val - n_test
    return DatasetSplit(
        examples.subset(perm[:n_train]),
        examples.subset(perm[n_train : n_train + n_val]),
        examples.subset(perm[n_train + n_val :]),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_csv(path, examples: ExampleSet) -> None:
    """Write examples with the header ``features:<d>,label:<0|1>``.

    Floats are written with repr so a load round-trips bit-identically.
    """
    labeled = examples.labels is not None
    lines = [f"features:{examples.dim},label:{1 if labeled else 0}"]
    for i in range(len(examples)):
        row = [_fmt(v) for v in examples.features[i]]
        if labeled:
            row.append(str(int(examples.labels[i])))
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line: str, path) -> tuple[int, bool]:
    parts = line.strip().split(",")
    if (
        len(parts) != 2
        or not parts[0].startswith("features:")
        or not parts[1].startswith("label:")
    ):
        raise ValueError(f"{path}:1: expected header 'features:<d>,label:<0|1>'")
    try:
        dim = int(parts[0].removeprefix("features:"))
        flag = int(parts[1].removeprefix("label:"))
    except ValueError:
        raise ValueError(f"{path}:1: malformed header counts") from None
    if dim < 1 or flag not in (0, 1):
        raise ValueError(f"{path}:1: malformed header counts")
    return dim, bool(flag)


def load_csv(path) -> ExampleSet:
    """Parse a dataset CSV; malformed input raises with the line number."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise ValueError(f"{path}:1: missing header")
    dim, labeled = _parse_header(lines[0], path)
    want = dim + (1 if labeled else 0)
    features = []
    labels = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != want:
            raise ValueError(f"{path}:{lineno}: expected {want} fields, got {len(fields)}")
        try:
            row = [float(t) for t in fields[:dim]]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric feature") from None
        if not all(math.isfinite(v) for v in row):
            raise ValueError(f"{path}:{lineno}: non-finite feature")
        if labeled:
            try:
                label = int(fields[dim])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: label must be an integer") from None
            if label < 0:
                raise ValueError(f"{path}:{lineno}: label must be >= 0")
            labels.append(label)
        features.append(row)
    feats = np.array(features, dtype=float).reshape(len(features), dim)
    return ExampleSet(feats, np.array(labels, dtype=np.int64) if labeled else None)


@dataclass
class GrayImage:
    """Grayscale image with pixel intensities in [0, 1], row-major (h, w)."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=float)
        if px.shape != (self.height, self.width) or self.width < 1 or self.height < 1:
            raise ValueError("pixels must have shape (height, width)")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        self.pixels = px


def median_filter(img: GrayImage, window: int) -> GrayImage:
    """Median filter with an odd square window and edge replication."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    if window > min(img.width, img.height):
        raise ValueError("window exceeds image size")
    r = window // 2
    if r == 0:
        return GrayImage(img.width, img.height, img.pixels.copy())
    padded = np.pad(img.pixels, r, mode="edge")
    windows = sliding_window_view(padded, (window, window))
    return GrayImage(img.width, img.height, np.median(windows, axis=(2, 3)))


def save_pgm(img: GrayImage, path) -> None:
    """Write an ASCII (P2) PGM with maxval 255."""
    levels = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(int)
    rows = [" ".join(str(v) for v in row) for row in levels]
    with open(path, "w", newline="\n") as fh:
        fh.write(f"P2\n{img.width} {img.height}\n255\n")
        fh.write("\n".join(rows) + "\n")


def load_pgm(path) -> GrayImage:
    """Read an ASCII (P2) PGM, scaling intensities to [0, 1]."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            body = line.split("#", 1)[0]
            tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM (P2) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
        values = np.array([int(t) for t in tokens[4:]], dtype=float)
    except ValueError:
        raise ValueError(f"{path}: malformed PGM payload") from None
    if width < 1 or height < 1 or maxval < 1:
        raise ValueError(f"{path}: bad PGM dimensions")
    if values.size != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, found {values.size}")
    if values.min() < 0 or values.max() > maxval:
        raise ValueError(f"{path}: pixel outside [0, {maxval}]")
    return GrayImage(width, height, values.reshape(height, width) / maxval)
