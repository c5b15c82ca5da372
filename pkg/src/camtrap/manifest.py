"""Dataset manifests: genus labels, sample records, balancing, splitting.

A manifest is a JSON-lines file (UTF-8, LF): the first line is a header
object declaring ``label_set`` (ordered class names, "FP" reserved for the
false-positive class) and ``seed``; every following line is one record with
keys image_path, camera_id, frame_index, label and optionally gt_box =
[x, y, width, height] in pixels, origin top-left.

All randomized operations draw from generators derived from the single
manifest seed and an operation name, so repeated runs are bit-identical and
stages can be re-run independently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .regions import BoundingBox
from .rng import SEED_MAX, derive_rng

FP_NAME = "FP"


class ManifestError(ValueError):
    """A manifest file or one of its invariants is invalid."""


@dataclass(frozen=True)
class GenusLabel:
    """A class label: genus name (or the reserved "FP") and its dense index."""

    name: str
    index: int


@dataclass(frozen=True)
class SampleRecord:
    """One image.  gt_box is present exactly when the label is a genus."""

    image_path: str
    camera_id: str
    frame_index: int
    label: GenusLabel
    gt_box: BoundingBox | None = None


@dataclass
class DatasetManifest:
    records: list[SampleRecord]
    label_set: list[GenusLabel] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise ManifestError(f"seed out of unsigned 64-bit range: {self.seed}")
        names = [lab.name for lab in self.label_set]
        if len(set(names)) != len(names):
            raise ManifestError("duplicate label names in label_set")
        indices = sorted(lab.index for lab in self.label_set)
        if indices != list(range(len(self.label_set))):
            raise ManifestError("label indices must be a bijection onto 0..K-1")
        by_name = {lab.name: lab for lab in self.label_set}
        seen = set()
        for rec in self.records:
            if rec.label.name not in by_name or by_name[rec.label.name] != rec.label:
                raise ManifestError(f"unknown label {rec.label.name!r}")
            if (rec.label.name == FP_NAME) == (rec.gt_box is not None):
                raise ManifestError(
                    f"{rec.camera_id}/{rec.frame_index}: gt_box must be present "
                    f"iff the label is a genus (label={rec.label.name})")
            key = (rec.camera_id, rec.frame_index)
            if key in seen:
                raise ManifestError(f"duplicate (camera_id, frame_index): {key}")
            seen.add(key)

    def label_by_name(self, name: str) -> GenusLabel:
        for lab in self.label_set:
            if lab.name == name:
                return lab
        raise ManifestError(f"unknown label {name!r}")

    def class_counts(self) -> dict[str, int]:
        counts = {lab.name: 0 for lab in self.label_set}
        for rec in self.records:
            counts[rec.label.name] += 1
        return counts


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/test record indices covering all retained records."""

    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]

    def __post_init__(self):
        if set(self.train_ids) & set(self.test_ids):
            raise ValueError("train and test ids overlap")


def _sorted_records(records: list[SampleRecord]) -> list[SampleRecord]:
    return sorted(records, key=lambda r: (r.camera_id, r.frame_index))


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a JSON-lines manifest; relative image paths resolve against it."""
    path = Path(path)
    base = path.parent
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty manifest file")

    def parse(number: int, text: str) -> dict:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: line {number}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}: line {number}: expected an object")
        return obj

    header = parse(1, lines[0])
    if "label_set" not in header:
        raise ManifestError(f"{path}: line 1: header must declare label_set")
    label_set = [GenusLabel(str(name), i) for i, name in enumerate(header["label_set"])]
    by_name = {lab.name: lab for lab in label_set}
    seed = int(header.get("seed", 0))

    records = []
    for number, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        obj = parse(number, text)
        try:
            name = obj["label"]
            if name not in by_name:
                raise ManifestError(f"{path}: line {number}: unknown label {name!r}")
            raw_box = obj.get("gt_box")
            box = None if raw_box is None else BoundingBox(*[int(v) for v in raw_box])
            image_path = str(obj["image_path"])
            if image_path and not Path(image_path).is_absolute():
                image_path = str(base / image_path)
            records.append(SampleRecord(
                image_path=image_path,
                camera_id=str(obj["camera_id"]),
                frame_index=int(obj["frame_index"]),
                label=by_name[name],
                gt_box=box,
            ))
        except KeyError as exc:
            raise ManifestError(f"{path}: line {number}: missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ManifestError):
                raise
            raise ManifestError(f"{path}: line {number}: {exc}") from exc

    return DatasetManifest(records=_sorted_records(records), label_set=label_set, seed=seed)


def save_manifest(manifest: DatasetManifest, path: str | Path,
                  relative_to: str | Path | None = None):
    """Write a manifest as JSON lines (UTF-8, LF)."""
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else None
    rows = [json.dumps({"label_set": [lab.name for lab in manifest.label_set],
                        "seed": manifest.seed})]
    for rec in manifest.records:
        image_path = rec.image_path
        if base is not None:
            try:
                image_path = str(Path(image_path).relative_to(base))
            except ValueError:
                pass
        row = {"image_path": image_path, "camera_id": rec.camera_id,
               "frame_index": rec.frame_index, "label": rec.label.name}
        if rec.gt_box is not None:
            row["gt_box"] = list(rec.gt_box.as_tuple())
        rows.append(json.dumps(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def balance_indices(labels: np.ndarray, seed: int, stream: str = "balance") -> np.ndarray:
    """Indices of a seeded-uniform undersampling to the smallest class.

    Survivors keep their relative order.  `labels` is an integer class array.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ManifestError("cannot balance an empty collection")
    rng = derive_rng(seed, stream)
    classes = np.unique(labels)
    target = min(int(np.sum(labels == c)) for c in classes)
    keep: list[int] = []
    for c in classes:
        ids = np.flatnonzero(labels == c)
        if len(ids) > target:
            ids = rng.choice(ids, size=target, replace=False)
        keep.extend(int(i) for i in ids)
    return np.array(sorted(keep), dtype=int)


def balance_classes(manifest: DatasetManifest) -> DatasetManifest:
    """Undersample every class to the smallest class count, seeded-uniform.

    Only classes with records participate; label-set entries without any
    records (e.g. FP before segmentation) are ignored.
    """
    if not manifest.records:
        raise ManifestError("cannot balance an empty manifest")
    labels = np.array([rec.label.index for rec in manifest.records])
    keep = balance_indices(labels, manifest.seed)
    records = [manifest.records[i] for i in keep]
    return DatasetManifest(records=records, label_set=list(manifest.label_set),
                           seed=manifest.seed)


def split_indices(labels: np.ndarray, train_fraction: float, seed: int,
                  stream: str = "split") -> SplitAssignment:
    """Stratified split of an integer label array.

    Per class, train count = round(fraction * class count) with ties rounded
    toward train; the remainder tests.  Deterministic under the seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    rng = derive_rng(seed, stream)
    train: list[int] = []
    test: list[int] = []
    for c in np.unique(labels):
        ids = np.flatnonzero(labels == c)
        if len(ids) < 2:
            raise ValueError(f"class {c} has fewer than 2 records")
        n_train = int(math.floor(train_fraction * len(ids) + 0.5))
        perm = rng.permutation(ids)
        train.extend(int(i) for i in perm[:n_train])
        test.extend(int(i) for i in perm[n_train:])
    return SplitAssignment(train_ids=tuple(sorted(train)), test_ids=tuple(sorted(test)))


def stratified_split(manifest: DatasetManifest, train_fraction: float) -> SplitAssignment:
    """70/30-style stratified split over manifest record indices."""
    labels = np.array([rec.label.index for rec in manifest.records])
    if labels.size == 0:
        raise ManifestError("cannot split an empty manifest")
    return split_indices(labels, train_fraction, manifest.seed)
