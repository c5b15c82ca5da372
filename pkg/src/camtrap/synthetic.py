"""Synthetic camera-trap sequences for desk-scale experiments.

Each camera watches a static textured background; its resident animal is a
textured rectangle doing a random walk, present per frame with probability
p_animal.  Classes differ by procedural coat texture (stripes, spots,
ramp) and tint.  Frames without the animal are false-positive-only and the
manifest records the blob extent as the ground-truth box everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import bilinear_resize, save_image
from .manifest import FP_NAME, DatasetManifest, GenusLabel, SampleRecord, save_manifest
from .regions import BoundingBox
from .rng import derive_rng

TEXTURES = ("stripes", "spots", "ramp")


@dataclass(frozen=True)
class SceneConfig:
    width: int = 96
    height: int = 96
    cameras: int = 5
    frames_per_camera: int = 120
    genus_names: tuple[str, ...] = ("Striped", "Spotted", "Graded")
    p_animal: float = 0.75
    blob_size: tuple[int, int] = (20, 30)     # min/max edge in pixels
    walk_step: float = 6.0
    p_relocate: float = 0.15                  # chance of jumping to a new spot
    illumination_jitter: float = 0.04
    noise_sigma: float = 0.004

    def __post_init__(self):
        if self.cameras < 1 or self.frames_per_camera < 10:
            raise ValueError("need at least 1 camera and 10 frames per camera")
        if len(self.genus_names) < 2:
            raise ValueError("need at least 2 genus classes")
        if self.blob_size[1] >= min(self.width, self.height):
            raise ValueError("blob larger than frame")
        if not 0.0 <= self.p_animal <= 1.0:
            raise ValueError("p_animal must lie in [0, 1]")


# near-unit-luminance tints so coats stay brighter than any background
_TINTS = [(1.0, 0.9, 0.8), (0.85, 1.0, 0.85), (0.9, 0.9, 1.0),
          (1.0, 1.0, 0.82), (0.95, 0.85, 1.0)]


def _background(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    # rough enough that LBP codes stay stable under the additive noise
    coarse = rng.uniform(0.15, 0.45, size=(24, 24))
    base = bilinear_resize(coarse, h, w)
    planes = [np.clip(base * s, 0.0, 1.0) for s in (1.0, 0.96, 0.9)]
    return np.stack(planes, axis=-1)


def _coat(kind: str, h: int, w: int, freq: float, phase: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if kind == "stripes":
        tex = 0.5 + 0.5 * np.sin(2.0 * np.pi * freq * (xx + yy) / 2.0 + phase)
    elif kind == "spots":
        tex = (0.5 + 0.5 * np.sin(2.0 * np.pi * freq * xx + phase)
               * np.sin(2.0 * np.pi * freq * yy + phase))
    else:  # ramp
        tex = (freq * (xx + yy) + phase) % 1.0
    return 0.7 + 0.25 * tex


@dataclass
class SyntheticDataset:
    frames: dict[str, list[np.ndarray]]       # camera id -> color frames
    manifest: DatasetManifest
    config: SceneConfig = field(default=SceneConfig())


def gen_synthetic(config: SceneConfig = SceneConfig(), seed: int = 0) -> SyntheticDataset:
    """Deterministic scene generation: same config and seed, same dataset."""
    labels = [GenusLabel(name, i) for i, name in enumerate(config.genus_names)]
    labels.append(GenusLabel(FP_NAME, len(labels)))
    fp = labels[-1]

    frames: dict[str, list[np.ndarray]] = {}
    records: list[SampleRecord] = []
    h, w = config.height, config.width

    for cam in range(config.cameras):
        camera_id = f"cam{cam:02d}"
        rng = derive_rng(seed, "synthetic", cam)
        genus = labels[cam % len(config.genus_names)]
        texture = TEXTURES[genus.index % len(TEXTURES)]
        freq = 0.08 + 0.07 * genus.index
        tint = np.array(_TINTS[genus.index % len(_TINTS)])

        background = _background(rng, h, w)
        bw = int(rng.integers(config.blob_size[0], config.blob_size[1] + 1))
        bh = int(rng.integers(config.blob_size[0], config.blob_size[1] + 1))
        coat = _coat(texture, bh, bw, freq, float(rng.uniform(0, 2 * np.pi)))
        blob = np.clip(coat[:, :, None] * tint[None, None, :], 0.0, 1.0)

        cx = float(rng.uniform(0, w - bw))
        cy = float(rng.uniform(0, h - bh))
        camera_frames = []
        for t in range(config.frames_per_camera):
            if rng.uniform() < config.p_relocate:
                # the animal re-enters elsewhere; keeps any one pixel from
                # being occluded often enough to leak into the background
                cx = float(rng.uniform(0, w - bw))
                cy = float(rng.uniform(0, h - bh))
            else:
                cx = float(np.clip(cx + rng.normal(0.0, config.walk_step), 0, w - bw))
                cy = float(np.clip(cy + rng.normal(0.0, config.walk_step), 0, h - bh))
            present = rng.uniform() < config.p_animal

            frame = background.copy()
            box = None
            if present:
                x0, y0 = int(round(cx)), int(round(cy))
                x0 = min(x0, w - bw)
                y0 = min(y0, h - bh)
                frame[y0:y0 + bh, x0:x0 + bw] = blob
                box = BoundingBox(x0, y0, bw, bh)

            gain = 1.0 + config.illumination_jitter * float(rng.uniform(-1, 1))
            frame = frame * gain + rng.normal(0.0, config.noise_sigma, size=frame.shape)
            camera_frames.append(np.clip(frame, 0.0, 1.0))

            records.append(SampleRecord(
                image_path=f"{camera_id}/{t:04d}.png",
                camera_id=camera_id,
                frame_index=t,
                label=genus if present else fp,
                gt_box=box,
            ))
        frames[camera_id] = camera_frames

    manifest = DatasetManifest(records=sorted(records, key=lambda r: (r.camera_id, r.frame_index)),
                               label_set=labels, seed=seed)
    return SyntheticDataset(frames=frames, manifest=manifest, config=config)


def save_synthetic(dataset: SyntheticDataset, out_dir) -> Path:
    """Write frames as PNGs plus a manifest.jsonl; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for camera_id, camera_frames in dataset.frames.items():
        cam_dir = out / camera_id
        cam_dir.mkdir(exist_ok=True)
        for t, frame in enumerate(camera_frames):
            save_image(cam_dir / f"{t:04d}.png", frame)
    resolved = DatasetManifest(
        records=[SampleRecord(image_path=str(out / rec.image_path),
                              camera_id=rec.camera_id, frame_index=rec.frame_index,
                              label=rec.label, gt_box=rec.gt_box)
                 for rec in dataset.manifest.records],
        label_set=list(dataset.manifest.label_set),
        seed=dataset.manifest.seed,
    )
    manifest_path = out / "manifest.jsonl"
    save_manifest(resolved, manifest_path, relative_to=out)
    return manifest_path
