"""Bounding boxes, region extraction from masks, merging, IoU, label assignment.

Boxes are axis-aligned with integer pixel coordinates: (x, y) is the top-left
pixel, the box covers columns [x, x+w) and rows [y, y+h).  Areas are pixel
counts, so IoU matches a rasterize-and-count oracle exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

if TYPE_CHECKING:
    from .manifest import GenusLabel, SampleRecord

GROUND_TRUTH = "ground_truth"
AUTOMATIC = "automatic"

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for f in ("x", "y", "w", "h"):
            v = getattr(self, f)
            if not isinstance(v, (int, np.integer)):
                raise ValueError(f"box {f} must be an integer, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extent must be positive, got w={self.w} h={self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (int(self.x), int(self.y), int(self.w), int(self.h))


@dataclass
class Region:
    """A detected or annotated region in one frame.

    `frame_id` is the index of the frame's record in the dataset manifest.
    `iou_vs_gt` is set when the region came from automatic segmentation and
    the frame has a ground-truth box; `assigned` follows the IoU rule of
    `assign_regions`.
    """

    box: BoundingBox
    frame_id: int
    source: str = AUTOMATIC
    iou_vs_gt: float | None = None
    assigned: "GenusLabel | None" = None


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0
    return iw * ih


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    x0 = min(a.x, b.x)
    y0 = min(a.y, b.y)
    x1 = max(a.x + a.w, b.x + b.w)
    y1 = max(a.y + a.h, b.y + b.h)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Pixel-area intersection over union; 0 for disjoint boxes."""
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def connected_components(mask: np.ndarray, min_area: float = 0.001) -> list[BoundingBox]:
    """Tight boxes of the 8-connected components of a binary mask.

    Components with fewer than min_area * (width * height) pixels are
    discarded.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("mask must be a 2-D array")
    m = m.astype(bool)
    h, w = m.shape
    labels, count = ndimage.label(m, structure=_EIGHT_CONNECTED)
    threshold = min_area * (w * h)
    boxes = []
    if count == 0:
        return boxes
    sizes = ndimage.sum_labels(m, labels, index=np.arange(1, count + 1))
    for k, sl in enumerate(ndimage.find_objects(labels)):
        if sizes[k] < threshold:
            continue
        ys, xs = sl
        boxes.append(BoundingBox(int(xs.start), int(ys.start),
                                 int(xs.stop - xs.start), int(ys.stop - ys.start)))
    return boxes


def merge_rois(boxes: list[BoundingBox]) -> list[BoundingBox]:
    """Merge boxes whose intersection area is strictly positive.

    Any intersecting pair is replaced by its bounding union, repeated to a
    fixpoint, so chains of overlaps collapse into one box.  Edge-touching
    boxes (zero intersection area) do not merge.  Output is sorted by
    (x, y, w, h).
    """
    out = list(boxes)
    changed = True
    while changed:
        changed = False
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                if intersection_area(out[i], out[j]) > 0:
                    out[i] = union_box(out[i], out[j])
                    del out[j]
                    changed = True
                    break
            if changed:
                break
    return sorted(out, key=lambda b: b.as_tuple())


def assign_regions(regions: list[Region], gt: "SampleRecord",
                   fp_label: "GenusLabel") -> list[Region]:
    """Assign regions of one frame to a genus or the false-positive class.

    IoU > 0.5 against the ground-truth box assigns the frame's genus label;
    IoU = 0 assigns the false-positive label; anything in between is left
    unassigned (excluded downstream).  Frames without a ground-truth box
    make every region a false positive.
    """
    frame_ids = {r.frame_id for r in regions}
    if len(frame_ids) > 1:
        raise ValueError(f"regions span multiple frames: {sorted(frame_ids)}")
    out = []
    for region in regions:
        if gt.gt_box is None:
            out.append(replace(region, iou_vs_gt=None, assigned=fp_label))
            continue
        overlap = iou(region.box, gt.gt_box)
        if overlap > 0.5:
            assigned = gt.label
        elif overlap == 0.0:
            assigned = fp_label
        else:
            assigned = None
        out.append(replace(region, iou_vs_gt=overlap, assigned=assigned))
    return out
