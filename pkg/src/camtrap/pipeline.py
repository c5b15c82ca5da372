"""End-to-end experiment orchestration.

Three experiment modes mirror the protocol: ``gt_only`` classifies expert
crops, ``gt_plus_fp`` adds a false-positive class sampled from automatic
regions with zero ground-truth overlap, and ``auto_plus_fp`` classifies the
automatic regions themselves (animal crops only where IoU > 0.5).

Every stage writes its intermediates to the output directory, and every
randomized step derives its stream from the manifest seed, so re-running a
later stage from the dumps reproduces the single-pass result exactly.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import modelio
from .evaluate import (EvaluationReport, confusion_csv, evaluate, report_to_json,
                       sparsity_report, table_report)
from .features import FeatureMatrix, concat_features, extract_builtin, import_external, \
    save_features, standardize
from .imaging import clahe_color, crop_resize, load_image, load_mask, save_mask, \
    to_grayscale
from .lasso import cv_select, save_support, select_support
from .manifest import (FP_NAME, DatasetManifest, GenusLabel, balance_indices,
                       split_indices)
from .mlp import MlpConfig, mlp_predict, mlp_width_search
from .regions import AUTOMATIC, GROUND_TRUTH, BoundingBox, Region, assign_regions, \
    connected_components, merge_rois
from .rng import derive_rng
from .rpca import RpcaConfig, build_data_matrix, foreground_masks, save_matrix, solve_rpca
from .svm import svm_grid_search, svm_predict

MODES = ("gt_only", "gt_plus_fp", "auto_plus_fp")
DESK_TAUS = (2, 5, 10, 20, 40)


class PipelineError(RuntimeError):
    """A stage failed; the message names the stage and the offending item."""


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    output_dir: str
    classifier: str = "svm"                  # "svm" or "ann"
    use_lasso: bool = False
    extractor: str = "builtin"               # "builtin" or "external"
    feature_files: tuple[str, ...] = ()
    beta: float = 0.45
    train_fraction: float = 0.7
    min_area: float = 0.001
    clahe_tiles: tuple[int, int] = (8, 8)
    clahe_clip: float = 0.01
    crop_size: int = 64
    n_lambdas: int = 30
    taus: tuple[int, ...] = DESK_TAUS
    mlp_epochs: int = 300
    rpca: RpcaConfig = field(default_factory=RpcaConfig)
    dump_rpca: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.classifier not in ("svm", "ann"):
            raise ValueError(f"classifier must be 'svm' or 'ann', got {self.classifier!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.extractor == "external" and not self.feature_files:
            raise ValueError("external extractor needs feature files")


@dataclass(frozen=True)
class CropSample:
    """One classifier sample: a labeled crop of a manifest frame."""

    record_id: int
    box: BoundingBox
    label_name: str
    source: str


def _worker_count(spec: ExperimentSpec) -> int:
    if spec.workers is not None:
        return max(1, spec.workers)
    env = os.environ.get("CAMTRAP_WORKERS", "")
    return max(1, int(env)) if env.isdigit() and env else 1


def experiment_labels(manifest: DatasetManifest, mode: str) -> list[GenusLabel]:
    """Class set of an experiment: manifest genera, plus FP unless gt_only."""
    genera = [lab.name for lab in manifest.label_set if lab.name != FP_NAME]
    names = genera if mode == "gt_only" else genera + [FP_NAME]
    return [GenusLabel(name, i) for i, name in enumerate(names)]


def _load_preprocessed(manifest: DatasetManifest, spec: ExperimentSpec, cache: dict,
                       record_id: int) -> np.ndarray:
    rec = manifest.records[record_id]
    if rec.image_path not in cache:
        frame = load_image(rec.image_path)
        cache[rec.image_path] = clahe_color(frame, tiles=spec.clahe_tiles,
                                            clip_limit=spec.clahe_clip)
    return cache[rec.image_path]


# ---------------------------------------------------------------------------
# segmentation stage

def _segment_camera(manifest: DatasetManifest, spec: ExperimentSpec,
                    camera_id: str, record_ids: list[int]) -> list[np.ndarray]:
    frames = []
    for rid in record_ids:
        rec = manifest.records[rid]
        try:
            color = clahe_color(load_image(rec.image_path), tiles=spec.clahe_tiles,
                                clip_limit=spec.clahe_clip)
        except Exception as exc:
            raise PipelineError(
                f"stage segment: camera {camera_id}: frame {rec.frame_index}: {exc}"
            ) from exc
        frames.append(to_grayscale(color))
    data = build_data_matrix(frames, spec.beta, frame_ids=list(record_ids))
    result = solve_rpca(data, spec.rpca)
    if spec.dump_rpca:
        rpca_dir = Path(spec.output_dir) / "rpca"
        rpca_dir.mkdir(parents=True, exist_ok=True)
        save_matrix(rpca_dir / f"{camera_id}_L.mat", result.L)
        save_matrix(rpca_dir / f"{camera_id}_S.mat", result.S)
    h, w = frames[0].shape
    return foreground_masks(result, width=w, height=h)


def segment_stage(manifest: DatasetManifest, spec: ExperimentSpec,
                  cameras: list[str] | None = None) -> dict[int, np.ndarray]:
    """Texture-blended RPCA per camera stack; masks keyed by record index and
    dumped as 1-bit PNGs under <output_dir>/masks/."""
    out = Path(spec.output_dir) / "masks"
    out.mkdir(parents=True, exist_ok=True)

    by_camera: dict[str, list[int]] = {}
    for rid, rec in enumerate(manifest.records):
        by_camera.setdefault(rec.camera_id, []).append(rid)
    if cameras is not None:
        unknown = set(cameras) - set(by_camera)
        if unknown:
            raise PipelineError(f"stage segment: unknown cameras {sorted(unknown)}")
        by_camera = {c: by_camera[c] for c in cameras}

    ordered = sorted(by_camera)
    workers = _worker_count(spec)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda c: _segment_camera(manifest, spec, c, by_camera[c]), ordered))
    else:
        results = [_segment_camera(manifest, spec, c, by_camera[c]) for c in ordered]

    masks: dict[int, np.ndarray] = {}
    for camera_id, camera_masks in zip(ordered, results):
        cam_dir = out / camera_id
        cam_dir.mkdir(exist_ok=True)
        for rid, mask in zip(by_camera[camera_id], camera_masks):
            masks[rid] = mask
            frame_index = manifest.records[rid].frame_index
            save_mask(cam_dir / f"{frame_index:04d}.png", mask)
    return masks


def load_masks(manifest: DatasetManifest, masks_dir) -> dict[int, np.ndarray]:
    masks_dir = Path(masks_dir)
    masks = {}
    for rid, rec in enumerate(manifest.records):
        path = masks_dir / rec.camera_id / f"{rec.frame_index:04d}.png"
        if path.exists():
            masks[rid] = load_mask(path)
    return masks


# ---------------------------------------------------------------------------
# region stage

def regions_stage(manifest: DatasetManifest, masks: dict[int, np.ndarray],
                  spec: ExperimentSpec) -> list[Region]:
    """Connected components, ROI merging, and IoU label assignment per frame."""
    fp = GenusLabel(FP_NAME, len([l for l in manifest.label_set if l.name != FP_NAME]))
    regions: list[Region] = []
    for rid in sorted(masks):
        rec = manifest.records[rid]
        try:
            boxes = merge_rois(connected_components(masks[rid], min_area=spec.min_area))
            frame_regions = [Region(box=b, frame_id=rid, source=AUTOMATIC) for b in boxes]
            regions.extend(assign_regions(frame_regions, rec, fp))
        except Exception as exc:
            raise PipelineError(
                f"stage regions: camera {rec.camera_id}: frame {rec.frame_index}: {exc}"
            ) from exc
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_regions(regions, out / "regions.jsonl")
    return regions


def dump_regions(regions: list[Region], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in regions:
            x, y, w, h = r.box.as_tuple()
            fh.write(json.dumps({
                "frame_id": r.frame_id, "x": x, "y": y, "w": w, "h": h,
                "source": r.source,
                "iou": r.iou_vs_gt,
                "assigned": None if r.assigned is None else r.assigned.name,
            }) + "\n")


def load_regions(path, manifest: DatasetManifest) -> list[Region]:
    fp = GenusLabel(FP_NAME, len([l for l in manifest.label_set if l.name != FP_NAME]))
    by_name = {lab.name: lab for lab in manifest.label_set}
    by_name.setdefault(FP_NAME, fp)
    regions = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        assigned = None if obj["assigned"] is None else by_name[obj["assigned"]]
        regions.append(Region(
            box=BoundingBox(obj["x"], obj["y"], obj["w"], obj["h"]),
            frame_id=obj["frame_id"], source=obj["source"],
            iou_vs_gt=obj["iou"], assigned=assigned))
    return regions


# ---------------------------------------------------------------------------
# crop sampling and feature extraction

def build_samples(manifest: DatasetManifest, mode: str,
                  regions: list[Region] | None, seed: int) -> list[CropSample]:
    """Assemble the labeled crop set of an experiment.

    Animal crops come from ground-truth boxes (gt modes) or automatic
    regions with IoU > 0.5 (auto mode); the FP class is drawn seeded-uniform
    from regions with IoU = 0, matched in size to the smallest animal class.
    """
    samples: list[CropSample] = []
    if mode in ("gt_only", "gt_plus_fp"):
        for rid, rec in enumerate(manifest.records):
            if rec.gt_box is not None:
                samples.append(CropSample(record_id=rid, box=rec.gt_box,
                                          label_name=rec.label.name,
                                          source=GROUND_TRUTH))
    else:
        if regions is None:
            raise PipelineError("stage extract: auto mode requires segmented regions")
        for region in regions:
            if region.assigned is not None and region.assigned.name != FP_NAME:
                samples.append(CropSample(record_id=region.frame_id, box=region.box,
                                          label_name=region.assigned.name,
                                          source=AUTOMATIC))
    if not samples:
        raise PipelineError("stage extract: no animal crops found")

    if mode != "gt_only":
        if regions is None:
            raise PipelineError("stage extract: FP class requires segmented regions")
        pool = [r for r in regions
                if r.assigned is not None and r.assigned.name == FP_NAME]
        if not pool:
            raise PipelineError("stage extract: no IoU=0 regions for the FP class")
        counts: dict[str, int] = {}
        for s in samples:
            counts[s.label_name] = counts.get(s.label_name, 0) + 1
        target = min(min(counts.values()), len(pool))
        rng = derive_rng(seed, "fp-sample")
        chosen = sorted(rng.choice(len(pool), size=target, replace=False))
        samples.extend(CropSample(record_id=pool[i].frame_id, box=pool[i].box,
                                  label_name=FP_NAME, source=AUTOMATIC)
                       for i in chosen)
    return samples


def dump_samples(samples: list[CropSample], labels: list[GenusLabel], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"classes": [lab.name for lab in labels]}) + "\n")
        for i, s in enumerate(samples):
            x, y, w, h = s.box.as_tuple()
            fh.write(json.dumps({
                "sample_id": i, "record_id": s.record_id, "x": x, "y": y,
                "w": w, "h": h, "label": s.label_name, "source": s.source}) + "\n")


def load_samples(path) -> tuple[list[CropSample], list[GenusLabel]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    labels = [GenusLabel(name, i) for i, name in enumerate(json.loads(lines[0])["classes"])]
    samples = []
    for line in lines[1:]:
        if not line.strip():
            continue
        obj = json.loads(line)
        samples.append(CropSample(record_id=obj["record_id"],
                                  box=BoundingBox(obj["x"], obj["y"], obj["w"], obj["h"]),
                                  label_name=obj["label"], source=obj["source"]))
    return samples, labels


def extract_stage(manifest: DatasetManifest, spec: ExperimentSpec,
                  samples: list[CropSample],
                  labels: list[GenusLabel]) -> FeatureMatrix:
    """Feature vectors for every crop sample, dumped in the feature-file
    format.  External features are looked up by the crop's manifest record."""
    index = {lab.name: lab.index for lab in labels}
    y = np.array([index[s.label_name] for s in samples])

    if spec.extractor == "external":
        parts = [import_external(path, manifest) for path in spec.feature_files]
        merged = concat_features(parts) if len(parts) > 1 else parts[0]
        row_of = {sid: i for i, sid in enumerate(merged.sample_ids)}
        missing = [s.record_id for s in samples if s.record_id not in row_of]
        if missing:
            raise PipelineError(
                f"stage extract: records {sorted(set(missing))[:5]} missing from "
                f"external features")
        x = merged.x[[row_of[s.record_id] for s in samples]]
        fm = FeatureMatrix(x=x, y=y, sample_ids=list(range(len(samples))),
                           extractor_id=merged.extractor_id)
    else:
        cache: dict[str, np.ndarray] = {}
        rows = []
        for s in samples:
            rec = manifest.records[s.record_id]
            try:
                frame = _load_preprocessed(manifest, spec, cache, s.record_id)
                crop = crop_resize(frame, s.box, spec.crop_size)
                rows.append(extract_builtin(crop))
            except Exception as exc:
                raise PipelineError(
                    f"stage extract: camera {rec.camera_id}: frame "
                    f"{rec.frame_index}: {exc}") from exc
        fm = FeatureMatrix(x=np.stack(rows), y=y,
                           sample_ids=list(range(len(samples))),
                           extractor_id="builtin")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_features(fm, out / "features.txt")
    dump_samples(samples, labels, out / "samples.jsonl")
    return fm


# ---------------------------------------------------------------------------
# split / selection / training / evaluation

def compute_split(features: FeatureMatrix, seed: int, train_fraction: float,
                  out_dir=None) -> tuple[np.ndarray, np.ndarray]:
    """Balance classes, then split 70/30 stratified.  Returns train and test
    row indices into `features`, dumped to split.json when out_dir is set."""
    keep = balance_indices(features.y, seed)
    split = split_indices(features.y[keep], train_fraction, seed)
    train_ids = keep[list(split.train_ids)]
    test_ids = keep[list(split.test_ids)]
    if out_dir is not None:
        payload = {"balanced_ids": [int(i) for i in keep],
                   "train_ids": [int(i) for i in train_ids],
                   "test_ids": [int(i) for i in test_ids]}
        (Path(out_dir) / "split.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return train_ids, test_ids


def load_split(path) -> tuple[np.ndarray, np.ndarray]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.array(obj["train_ids"], dtype=int), np.array(obj["test_ids"], dtype=int)


def select_stage(features: FeatureMatrix, train_ids: np.ndarray, spec: ExperimentSpec,
                 seed: int):
    """Cross-validated lasso on standardized training rows; returns
    (support, model) and writes support.txt."""
    train = features.rows(train_ids)
    train_std, _ = standardize(train, train)
    model = cv_select(train_std, n_lambdas=spec.n_lambdas, seed=seed)
    support = select_support(model)
    save_support(support, model.lam, Path(spec.output_dir) / "support.txt")
    return support, model


def train_stage(features: FeatureMatrix, train_ids: np.ndarray, spec: ExperimentSpec,
                seed: int, support=None):
    """Standardize, optionally restrict to the lasso support, carve a 20%
    validation set, and run the configured hyperparameter search."""
    train = features.rows(train_ids)
    train_std, params = standardize(train, train)
    if support is not None:
        train_std = train_std.columns(support.selected)

    carve = split_indices(train_std.y, 0.8, seed, stream="val-split")
    fit = train_std.rows(list(carve.train_ids))
    val = train_std.rows(list(carve.test_ids))

    if spec.classifier == "svm":
        cfg, model = svm_grid_search(fit, val)
        modelio.save_svm(model, Path(spec.output_dir) / "model.bin")
        hyper = {"C": cfg.C, "gamma": cfg.gamma}
    else:
        base = MlpConfig(tau=spec.taus[0], epochs=spec.mlp_epochs,
                         seed=derive_rng(seed, "mlp-seed").integers(2**32))
        cfg, model = mlp_width_search(fit, val, taus=spec.taus, base=base)
        modelio.save_mlp(model, Path(spec.output_dir) / "model.bin")
        hyper = {"tau": cfg.tau, "epochs": cfg.epochs}
    return model, hyper, params


def evaluate_stage(features: FeatureMatrix, model, train_ids: np.ndarray,
                   test_ids: np.ndarray, spec: ExperimentSpec,
                   labels: list[GenusLabel], seed: int, support=None,
                   sparsity: float | None = None,
                   hyper: dict | None = None) -> EvaluationReport:
    train = features.rows(train_ids)
    _, params = standardize(train, train)
    test = features.rows(test_ids)
    x = params.transform(test.x)
    if support is not None:
        x = x[:, support.selected]

    if spec.classifier == "svm":
        pred = svm_predict(model, x)
    else:
        pred = mlp_predict(model, x)

    report = evaluate(pred, test.y, n_classes=len(labels))
    report = replace(report, sparsity=sparsity, extractor_id=features.extractor_id,
                     classifier=spec.classifier, hyperparameters=hyper or {},
                     seed=seed)

    out = Path(spec.output_dir)
    (out / "report.json").write_text(report_to_json(report), encoding="utf-8")
    (out / "report.txt").write_text(table_report([report]), encoding="utf-8")
    (out / "confusion.csv").write_text(
        confusion_csv(report, [lab.name for lab in labels]), encoding="utf-8")
    if sparsity is not None:
        (out / "sparsity.txt").write_text(
            sparsity_report([(features.extractor_id, sparsity)]), encoding="utf-8")
    return report


def run_experiment(spec: ExperimentSpec, manifest: DatasetManifest) -> EvaluationReport:
    """Execute one full experiment; every intermediate lands in output_dir."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = manifest.seed
    labels = experiment_labels(manifest, spec.mode)

    regions = None
    if spec.mode in ("gt_plus_fp", "auto_plus_fp"):
        masks = segment_stage(manifest, spec)
        regions = regions_stage(manifest, masks, spec)

    samples = build_samples(manifest, spec.mode, regions, seed)
    features = extract_stage(manifest, spec, samples, labels)

    train_ids, test_ids = compute_split(features, seed, spec.train_fraction, out_dir=out)

    support = None
    sparsity = None
    if spec.use_lasso:
        support, lasso_model = select_stage(features, train_ids, spec, seed)
        sparsity = select_support(lasso_model).sparsity

    model, hyper, _ = train_stage(features, train_ids, spec, seed, support=support)
    return evaluate_stage(features, model, train_ids, test_ids, spec, labels, seed,
                          support=support, sparsity=sparsity, hyper=hyper)
