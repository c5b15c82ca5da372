"""Region crops to fixed-length feature vectors.

The built-in descriptor concatenates a 256-bin LBP histogram, three 16-bin
per-channel color histograms, and 4x4-cell 8-orientation gradient
histograms (128 dims) for a total of 432 features.  Externally computed
feature vectors (e.g. CNN pooling layers) load through the same
FeatureMatrix container, and matrices over the same samples concatenate
columnwise for mixture features.

Feature file format: header line ``#extractor_id p``, then one line per
sample: ``sample_id v1 ... vp`` (ASCII decimal floats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import as_color, lbp_map, quantize, to_grayscale
from .manifest import DatasetManifest

CROP_SIZE = 64
BUILTIN_DIM = 256 + 3 * 16 + 128
GRADIENT_CELLS = 4
GRADIENT_BINS = 8


@dataclass
class FeatureMatrix:
    """N x p design matrix with labels and sample provenance."""

    x: np.ndarray
    y: np.ndarray
    sample_ids: list[int]
    extractor_id: str

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.intp)
        if self.x.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.isfinite(self.x).all():
            raise ValueError("feature matrix contains non-finite values")
        if len(self.y) != self.x.shape[0] or len(self.sample_ids) != self.x.shape[0]:
            raise ValueError("labels and sample ids must align with rows")
        if self.x.shape[0] and self.y.min() < 0:
            raise ValueError("labels must be non-negative class indices")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def rows(self, ids) -> "FeatureMatrix":
        ids = np.asarray(ids, dtype=int)
        return FeatureMatrix(self.x[ids], self.y[ids],
                             [self.sample_ids[i] for i in ids], self.extractor_id)

    def columns(self, ids) -> "FeatureMatrix":
        ids = np.asarray(ids, dtype=int)
        return FeatureMatrix(self.x[:, ids], self.y.copy(),
                             list(self.sample_ids), self.extractor_id)


@dataclass
class StandardizationParams:
    """Per-column mean and deviation, computed on training rows only."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


def _l1_normalized(hist: np.ndarray) -> np.ndarray:
    total = hist.sum()
    return hist / total if total > 0 else hist


def extract_builtin(crop) -> np.ndarray:
    """432-dim descriptor of a 64x64 color crop.

    Histogram blocks are L1-normalized; the gradient block stays zero on
    constant crops.
    """
    arr = as_color(crop)
    if arr.shape[:2] != (CROP_SIZE, CROP_SIZE):
        raise ValueError(f"crop must be {CROP_SIZE}x{CROP_SIZE}, got {arr.shape[:2]}")
    gray = to_grayscale(arr)

    codes = np.rint(lbp_map(gray) * 255.0).astype(np.intp)
    lbp_hist = _l1_normalized(np.bincount(codes.ravel(), minlength=256).astype(np.float64))

    color_hists = []
    for c in range(3):
        hist = np.bincount(quantize(arr[:, :, c], 16).ravel(), minlength=16)
        color_hists.append(_l1_normalized(hist.astype(np.float64)))

    gy, gx = np.gradient(gray)
    magnitude = np.hypot(gy, gx)
    orientation = np.arctan2(gy, gx)
    obin = np.floor((orientation + math.pi) / (2.0 * math.pi) * GRADIENT_BINS).astype(np.intp)
    obin %= GRADIENT_BINS
    cell = CROP_SIZE // GRADIENT_CELLS
    grad_hist = np.zeros((GRADIENT_CELLS, GRADIENT_CELLS, GRADIENT_BINS))
    for i in range(GRADIENT_CELLS):
        for j in range(GRADIENT_CELLS):
            sl = (slice(i * cell, (i + 1) * cell), slice(j * cell, (j + 1) * cell))
            np.add.at(grad_hist[i, j], obin[sl].ravel(), magnitude[sl].ravel())
    grad_block = _l1_normalized(grad_hist.ravel())

    return np.concatenate([lbp_hist, *color_hists, grad_block])


def extract_features(crops, labels, sample_ids, extractor_id: str = "builtin") -> FeatureMatrix:
    """Run the built-in descriptor over a crop collection."""
    if len(crops) == 0:
        raise ValueError("no crops to extract")
    x = np.stack([extract_builtin(c) for c in crops])
    return FeatureMatrix(x=x, y=np.asarray(labels), sample_ids=list(sample_ids),
                         extractor_id=extractor_id)


def import_external(path, manifest: DatasetManifest) -> FeatureMatrix:
    """Load an external feature file; rows reference manifest record indices."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '#extractor_id p' header")
    header = lines[0][1:].split()
    if len(header) != 2:
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    extractor_id = header[0]
    p = int(header[1])

    ids, rows = [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        sample_id = int(parts[0])
        if not 0 <= sample_id < len(manifest.records):
            raise ValueError(f"{path}: row {number}: unknown sample id {sample_id}")
        values = np.array([float(v) for v in parts[1:]])
        if len(values) != p:
            raise ValueError(
                f"{path}: row {number}: expected {p} values, got {len(values)}")
        if not np.isfinite(values).all():
            raise ValueError(f"{path}: row {number}: non-finite value")
        ids.append(sample_id)
        rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no feature rows")
    y = np.array([manifest.records[i].label.index for i in ids])
    return FeatureMatrix(x=np.stack(rows), y=y, sample_ids=ids, extractor_id=extractor_id)


def save_features(fm: FeatureMatrix, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#{fm.extractor_id} {fm.p}\n")
        for sid, row in zip(fm.sample_ids, fm.x):
            fh.write(f"{sid} " + " ".join(repr(float(v)) for v in row) + "\n")


def load_features(path, y=None) -> FeatureMatrix:
    """Read a feature file without resolving ids against a manifest.

    Used for pipeline dumps, where ids index the crop-sample table; labels
    come from `y` when given, else zeros.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '#extractor_id p' header")
    extractor_id, p = lines[0][1:].split()
    ids, rows = [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        ids.append(int(parts[0]))
        values = np.array([float(v) for v in parts[1:]])
        if len(values) != int(p):
            raise ValueError(f"{path}: row {number}: expected {p} values")
        rows.append(values)
    labels = np.zeros(len(rows), dtype=int) if y is None else np.asarray(y)
    return FeatureMatrix(x=np.stack(rows), y=labels, sample_ids=ids,
                         extractor_id=extractor_id)


def concat_features(parts: list[FeatureMatrix]) -> FeatureMatrix:
    """Columnwise concatenation of feature matrices over identical samples."""
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for part in parts[1:]:
        if part.sample_ids != first.sample_ids or not np.array_equal(part.y, first.y):
            raise ValueError("feature matrices are over different samples")
    return FeatureMatrix(
        x=np.hstack([part.x for part in parts]),
        y=first.y.copy(),
        sample_ids=list(first.sample_ids),
        extractor_id="+".join(part.extractor_id for part in parts),
    )


def standardize(train: FeatureMatrix,
                apply_to: FeatureMatrix) -> tuple[FeatureMatrix, StandardizationParams]:
    """Z-score `apply_to` with statistics of `train` (std floored at 1e-8)."""
    if train.n == 0:
        raise ValueError("cannot standardize with an empty training set")
    mean = train.x.mean(axis=0)
    std = np.maximum(train.x.std(axis=0), 1e-8)
    params = StandardizationParams(mean=mean, std=std)
    out = FeatureMatrix(x=params.transform(apply_to.x), y=apply_to.y.copy(),
                        sample_ids=list(apply_to.sample_ids),
                        extractor_id=apply_to.extractor_id)
    return out, params
