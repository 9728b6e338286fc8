"""Datasets: CSV and IDX ingestion plus the synthetic toy geometries."""
from __future__ import annotations

import csv
import gzip
import json
import math
import struct
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError, MissingColumnError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# subtype_truth marker for samples outside the clustered class
NOT_APPLICABLE = -1


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with supervised labels and optional subtype ground truth.

    ``subtype_truth`` uses ``-1`` for samples that carry no subtype (the
    negative class in classification mode).
    """

    features: np.ndarray
    labels: np.ndarray
    subtype_truth: Optional[np.ndarray] = None
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataFormatError(f"features must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataFormatError(f"non-finite feature at row {i}, column {j}")
        y = np.asarray(self.labels)
        if y.shape != (X.shape[0],):
            raise DataFormatError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        if self.subtype_truth is not None:
            t = np.asarray(self.subtype_truth, dtype=int)
            if t.shape != (X.shape[0],):
                raise DataFormatError("subtype_truth length does not match features")
            object.__setattr__(self, "subtype_truth", _frozen(t))
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != X.shape[1]:
                raise DataFormatError("feature_names length does not match feature count")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def is_classification(self) -> bool:
        return bool(np.all(np.isin(self.labels, (-1, 1))))

    def positive_mask(self) -> np.ndarray:
        return self.labels == 1

    def take(self, n: int) -> "Dataset":
        """First ``n`` samples."""
        return Dataset(
            self.features[:n],
            self.labels[:n],
            None if self.subtype_truth is None else self.subtype_truth[:n],
            self.feature_names,
        )


def one_vs_rest(dataset: Dataset, positive_class: int) -> Dataset:
    """Relabel integer classes held in ``subtype_truth`` to +1 / -1."""
    if dataset.subtype_truth is None:
        raise DataFormatError("one_vs_rest needs class ids in subtype_truth")
    y = np.where(dataset.subtype_truth == positive_class, 1, -1)
    return Dataset(dataset.features, y, dataset.subtype_truth, dataset.feature_names)


# -- CSV ---------------------------------------------------------------------

def _parse_float(cell: str, row: int, col: int, name: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataFormatError(f"cannot parse {cell!r} at row {row}, column {col} ({name})") from None
    if not math.isfinite(v):
        raise DataFormatError(f"non-finite value {cell!r} at row {row}, column {col} ({name})")
    return v


def load_csv(path, label_column: str = "y", subtype_column: Optional[str] = None) -> Dataset:
    """Read a header-first CSV; every column except label/subtype is a feature.

    Row indices in error messages count data rows from 0 (header excluded).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingColumnError(label_column)
        if subtype_column is not None and subtype_column not in header:
            raise MissingColumnError(subtype_column)
        li = header.index(label_column)
        si = header.index(subtype_column) if subtype_column is not None else None
        fcols = [j for j in range(len(header)) if j not in (li, si)]

        feats, labels, subtypes = [], [], []
        for r, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"row {r} has {len(row)} cells, header has {len(header)}")
            feats.append([_parse_float(row[j], r, j, header[j]) for j in fcols])
            labels.append(_parse_float(row[li], r, li, header[li]))
            if si is not None:
                cell = row[si].strip()
                subtypes.append(NOT_APPLICABLE if cell == "" else int(_parse_float(cell, r, si, header[si])))

    X = np.array(feats, dtype=float).reshape(len(feats), len(fcols))
    y = np.array(labels, dtype=float)
    if y.size and np.all(np.isin(y, (-1.0, 1.0))):
        y = y.astype(int)
    return Dataset(X, y, np.array(subtypes, dtype=int) if si is not None else None,
                   tuple(header[j] for j in fcols))


def write_csv(dataset: Dataset, path, label_column: str = "y",
              subtype_column: Optional[str] = "subtype") -> None:
    """Inverse of :func:`load_csv`; floats are written with ``repr`` so they round-trip."""
    names = dataset.feature_names or tuple(f"x{j}" for j in range(dataset.n_features))
    header = list(names) + [label_column]
    with_sub = subtype_column is not None and dataset.subtype_truth is not None
    if with_sub:
        header.append(subtype_column)
    int_labels = np.issubdtype(dataset.labels.dtype, np.integer)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n_samples):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(str(int(dataset.labels[i])) if int_labels else repr(float(dataset.labels[i])))
            if with_sub:
                row.append(str(int(dataset.subtype_truth[i])))
            w.writerow(row)


# -- IDX ---------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    if len(raw) - 16 != count * rows * cols:
        raise DataFormatError(
            f"{path}: header declares {count}x{rows}x{cols} pixels, payload has {len(raw) - 16} bytes")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    if len(raw) - 8 != count:
        raise DataFormatError(f"{path}: header declares {count} labels, payload has {len(raw) - 8} bytes")
    return np.frombuffer(raw, dtype=np.uint8, offset=8)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, r, c = images.shape
    for path, payload in (
        (images_path, struct.pack(">IIII", IDX_IMAGES_MAGIC, n, r, c) + images.tobytes()),
        (labels_path, struct.pack(">II", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes()),
    ):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as fh:
            fh.write(payload)


def block_average(images: np.ndarray, side: int) -> np.ndarray:
    """Mean-pool square images (n, s, s) down to (n, side, side)."""
    n, r, c = images.shape
    if r != c or r % side:
        raise DataFormatError(f"cannot block-average {r}x{c} images to {side}x{side}")
    f = r // side
    return images.reshape(n, side, f, side, f).mean(axis=(2, 4))


def load_idx(images_path, labels_path, downsample: Optional[int] = None,
             take_first: Optional[int] = None) -> Dataset:
    """Load an IDX image/label pair, intensities scaled to [0, 1].

    ``downsample`` is the target side length (14 turns 28x28 into 196 features).
    Digit ids go to both ``labels`` and ``subtype_truth``; see :func:`one_vs_rest`.
    """
    images = read_idx_images(images_path)
    digits = read_idx_labels(labels_path)
    if len(images) != len(digits):
        raise DataFormatError(f"{len(images)} images but {len(digits)} labels")
    if take_first is not None:
        images, digits = images[:take_first], digits[:take_first]
    pix = images.astype(float) / 255.0
    if downsample is not None and downsample != pix.shape[1]:
        pix = block_average(pix, downsample)
    X = pix.reshape(len(pix), -1)
    d = digits.astype(int)
    return Dataset(X, d, d)


# -- synthetic toys ----------------------------------------------------------

class ToyConfigId(str, Enum):
    ALONG_BOUNDARY_3 = "along3"
    ALONG_BOUNDARY_2 = "along2"
    PARALLEL_OUTSIDE_4 = "parallel-outside4"
    PARALLEL_INSIDE_2 = "parallel-inside2"


@dataclass(frozen=True)
class ToyConfig:
    config_id: ToyConfigId
    n_per_cluster: int = 250
    noise_dims: int = 0
    cluster_separation: float = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "config_id", ToyConfigId(self.config_id))
        if self.n_per_cluster < 2:
            raise ValueError("n_per_cluster must be >= 2")
        if self.noise_dims < 0:
            raise ValueError("noise_dims must be >= 0")
        if not self.cluster_separation > 0:
            raise ValueError("cluster_separation must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @classmethod
    def from_json(cls, text: str) -> "ToyConfig":
        return cls(**json.loads(text))

    def to_json(self) -> str:
        d = asdict(self)
        d["config_id"] = self.config_id.value
        return json.dumps(d)


def _polar(radius: float, degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    return np.array([radius * math.cos(a), radius * math.sin(a)])


def toy_geometry(config_id, s: float):
    """Positive cluster centres and ``(centre, size_multiplier)`` negative blobs.

    Negatives sit near the origin; positives lie above them. On the "inside"
    panels the negatives are enclosed by the per-cluster hyperplanes, on the
    "outside" panels they lie beyond the positives.
    """
    cid = ToyConfigId(config_id)
    ring = s / (2 * math.sin(math.radians(15)))  # 30 deg apart on this radius => distance s
    if cid is ToyConfigId.ALONG_BOUNDARY_2:
        pos = [_polar(s, 60), _polar(s, 120)]
        neg = [(np.zeros(2), 2)]
    elif cid is ToyConfigId.ALONG_BOUNDARY_3:
        pos = [_polar(ring, a) for a in (60, 90, 120)]
        neg = [(_polar(ring + s, a), 1) for a in (60, 90, 120)]
    elif cid is ToyConfigId.PARALLEL_INSIDE_2:
        pos = [np.array([0.0, s]), np.array([0.0, 2 * s])]
        neg = [(np.zeros(2), 2)]
    else:
        pos = [_polar(r, a) for r in (ring, ring + s) for a in (75, 105)]
        neg = [(_polar(ring + 2 * s, a), 2) for a in (75, 105)]
    return pos, neg


def _assemble(pos, neg, n: int, noise_dims: int, rng: np.random.Generator) -> Dataset:
    blocks, y, t = [], [], []
    for k, c in enumerate(pos):
        blocks.append(c + rng.standard_normal((n, 2)))
        y.append(np.ones(n, dtype=int))
        t.append(np.full(n, k))
    for c, mult in neg:
        m = n * mult
        blocks.append(c + rng.standard_normal((m, 2)))
        y.append(-np.ones(m, dtype=int))
        t.append(np.full(m, NOT_APPLICABLE))
    base = np.vstack(blocks)
    noise = rng.standard_normal((len(base), noise_dims))
    X = np.hstack([base, noise])
    names = ("x0", "x1") + tuple(f"noise{j}" for j in range(noise_dims))
    return Dataset(X, np.concatenate(y), np.concatenate(t), names)


def generate_toy(config: ToyConfig) -> Dataset:
    """Positive blobs and negative blob(s) in 2-D, plus ``noise_dims`` N(0,1) columns.

    Rows are ordered cluster by cluster, positives first.
    """
    rng = np.random.default_rng(int(config.seed))
    pos, neg = toy_geometry(config.config_id, config.cluster_separation)
    return _assemble(pos, neg, config.n_per_cluster, config.noise_dims, rng)


def generate_flanking(n_per_cluster: int = 250, noise_dims: int = 0,
                      separation: float = 5.0, seed: int = 0) -> Dataset:
    """Two adjacent positive clusters, each flanked by its own negative blob.

    The negative blobs sit below-outside each cluster in mirrored directions,
    so a classifier that weights every negative equally sees nearly the same
    negative mass from both clusters, while proximity weighting does not.
    """
    s = separation
    p0, p1 = np.array([-s / 2, 0.0]), np.array([s / 2, 0.0])
    out = np.array([0.8, -0.6]) * s
    neg = [(p0 + out * np.array([-1, 1]), 1), (p1 + out, 1)]
    return _assemble([p0, p1], neg, n_per_cluster, noise_dims, np.random.default_rng(seed))
