"""Pixel-level preprocessing.

Images are float64 numpy arrays with values in [0, 1]: grayscale arrays are
(H, W), color arrays are (H, W, 3).  Every histogram operation quantizes
with bin = floor(value * (bins - 0.001)), i.e. floor(v * 255.999) for the
256-bin ops, so 1.0 lands in the top bin.

Operations are pure and never mutate their inputs; all outputs stay in
[0, 1].
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from .regions import BoundingBox

_LUMA = np.array([0.299, 0.587, 0.114])

# clockwise from the top-left neighbor; first offset is the most
# significant bit of the 8-bit code
_LBP_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty image")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return arr


def as_color(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"color image must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("empty image")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return arr


def quantize(values: np.ndarray, bins: int = 256) -> np.ndarray:
    """Bin indices floor(v * (bins - 0.001)), clipped into 0..bins-1."""
    idx = np.floor(np.asarray(values) * (bins - 0.001)).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def to_grayscale(img) -> np.ndarray:
    """Luminance 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1]."""
    arr = as_color(img)
    return np.clip(arr @ _LUMA, 0.0, 1.0)


def clahe(img, tiles: tuple[int, int] = (8, 8), clip_limit: float = 0.01) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    The image is padded by edge replication so the tile grid divides it
    exactly.  Each tile's 256-bin histogram is clipped at
    clip_limit * tile_pixels / 256 (clip_limit is in units of the uniform
    bin height; large values disable clipping) and the clipped mass is
    redistributed uniformly in a single pass.  The tile mapping sends bin b
    to cdf(b) - 1/512, and each pixel bilinearly interpolates the mappings
    of its four surrounding tile centers.
    """
    arr = as_gray(img)
    h, w = arr.shape
    ty, tx = int(tiles[0]), int(tiles[1])
    if clip_limit <= 0:
        raise ValueError(f"clip limit must be positive, got {clip_limit}")
    if ty < 1 or tx < 1 or ty > h or tx > w:
        raise ValueError(f"tile grid {tiles} does not fit a {h}x{w} image")

    tile_h = -(-h // ty)
    tile_w = -(-w // tx)
    padded = np.pad(arr, ((0, ty * tile_h - h), (0, tx * tile_w - w)), mode="edge")
    bins = quantize(padded)

    tile_pixels = tile_h * tile_w
    limit = clip_limit * tile_pixels / 256.0
    maps = np.empty((ty, tx, 256))
    for i in range(ty):
        for j in range(tx):
            block = bins[i * tile_h:(i + 1) * tile_h, j * tile_w:(j + 1) * tile_w]
            hist = np.bincount(block.ravel(), minlength=256).astype(np.float64)
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / 256.0
            maps[i, j] = np.cumsum(hist) / tile_pixels - 1.0 / 512.0
    np.clip(maps, 0.0, 1.0, out=maps)

    # fractional tile-grid coordinates of each original pixel; index
    # clamping at the borders collapses the interpolation to the edge tile
    gy = (np.arange(h) - (tile_h - 1) / 2.0) / tile_h
    gx = (np.arange(w) - (tile_w - 1) / 2.0) / tile_w
    y0 = np.floor(gy).astype(int)
    x0 = np.floor(gx).astype(int)
    fy = (gy - y0)[:, None]
    fx = (gx - x0)[None, :]
    y0c = np.clip(y0, 0, ty - 1)[:, None]
    y1c = np.clip(y0 + 1, 0, ty - 1)[:, None]
    x0c = np.clip(x0, 0, tx - 1)[None, :]
    x1c = np.clip(x0 + 1, 0, tx - 1)[None, :]

    b = bins[:h, :w]
    out = ((1 - fy) * (1 - fx) * maps[y0c, x0c, b]
           + (1 - fy) * fx * maps[y0c, x1c, b]
           + fy * (1 - fx) * maps[y1c, x0c, b]
           + fy * fx * maps[y1c, x1c, b])
    return np.clip(out, 0.0, 1.0)


def lbp_map(img) -> np.ndarray:
    """Radius-1, 8-neighbor local binary pattern codes, scaled to [0, 1].

    A neighbor >= center sets its bit; bits run clockwise from the top-left
    neighbor with the first as most significant.  Codes divide by 255;
    border pixels replicate the nearest interior code.
    """
    arr = as_gray(img)
    h, w = arr.shape
    if h < 3 or w < 3:
        raise ValueError(f"image must be at least 3x3 for LBP, got {h}x{w}")
    center = arr[1:-1, 1:-1]
    code = np.zeros(center.shape, dtype=np.int64)
    for dy, dx in _LBP_OFFSETS:
        neighbor = arr[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        code = (code << 1) | (neighbor >= center)
    return np.pad(code / 255.0, 1, mode="edge")


def otsu_threshold(img) -> float:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Degenerate histograms (single occupied bin) return the image's single
    value.  The returned scalar is the upper edge of the chosen bin, so
    `img > threshold` separates the classes.
    """
    arr = as_gray(img)
    hist = np.bincount(quantize(arr).ravel(), minlength=256).astype(np.float64)
    occupied = np.flatnonzero(hist)
    if len(occupied) < 2:
        return float(arr.mean())
    p = hist / hist.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(p)
    mu = np.cumsum(p * levels)
    mu_total = mu[-1]
    valid = (w0 > 0.0) & (w0 < 1.0)
    sigma_b = np.zeros(256)
    sigma_b[valid] = (mu_total * w0[valid] - mu[valid]) ** 2 / (w0[valid] * (1.0 - w0[valid]))
    t = int(np.argmax(sigma_b))
    return (t + 1) / 256.0


def _check_binary(mask) -> np.ndarray:
    arr = np.asarray(mask, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("mask must be a 2-D array")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError("mask must be binary (values 0 and 1)")
    return arr.astype(bool)


def binary_open(mask) -> np.ndarray:
    """One binary opening (erosion then dilation) with a 3x3 square element.

    The erosion treats pixels outside the image as foreground, so solid
    regions touching the border survive; a solid 5x5 square is unchanged.
    """
    m = _check_binary(mask)
    square = np.ones((3, 3), dtype=bool)
    m = ndimage.binary_erosion(m, structure=square, border_value=1)
    m = ndimage.binary_dilation(m, structure=square, border_value=0)
    return m.astype(np.float64)


def morph_clean(mask) -> np.ndarray:
    """3x3 median filter (nearest-edge padding), then one binary opening.

    Salt noise disappears under the median; note the median also shaves the
    four corner pixels off convex right-angled blobs.
    """
    m = _check_binary(mask)
    m = ndimage.median_filter(m.astype(np.uint8), size=3, mode="nearest").astype(bool)
    return binary_open(m.astype(np.float64))


def _bilinear_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel-center mapping: output i samples input (i + 0.5) * scale - 0.5
    coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_in - 1.0)
    i0 = np.floor(coords).astype(int)
    i0 = np.minimum(i0, n_in - 2) if n_in > 1 else np.zeros(n_out, dtype=int)
    frac = coords - i0
    return i0, i0 + (1 if n_in > 1 else 0), frac


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of a gray or color array (half-pixel centers)."""
    arr = np.asarray(img, dtype=np.float64)
    in_h, in_w = arr.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    y0, y1, fy = _bilinear_coords(out_h, in_h)
    x0, x1, fx = _bilinear_coords(out_w, in_w)
    fy = fy[:, None] if arr.ndim == 2 else fy[:, None, None]
    fx = fx[None, :] if arr.ndim == 2 else fx[None, :, None]
    top = arr[np.ix_(y0, x0)] * (1 - fx) + arr[np.ix_(y0, x1)] * fx
    bottom = arr[np.ix_(y1, x0)] * (1 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def crop_resize(img, box: BoundingBox, out_size: int) -> np.ndarray:
    """Crop a color image at `box` (clamped to bounds) and bilinearly resize
    to out_size x out_size."""
    arr = as_color(img)
    h, w = arr.shape[:2]
    x0 = max(box.x, 0)
    y0 = max(box.y, 0)
    x1 = min(box.x + box.w, w)
    y1 = min(box.y + box.h, h)
    if x0 >= x1 or y0 >= y1:
        raise ValueError(f"box {box.as_tuple()} lies outside the {h}x{w} image")
    crop = arr[y0:y1, x0:x1]
    return np.clip(bilinear_resize(crop, out_size, out_size), 0.0, 1.0)


def clahe_color(img, tiles: tuple[int, int] = (8, 8), clip_limit: float = 0.01) -> np.ndarray:
    """CLAHE on the luminance channel of a color image; chroma untouched.

    Uses a YCbCr-style transform: the equalized luminance replaces the
    original, the two chroma differences are carried over unchanged.
    """
    arr = as_color(img)
    luma = to_grayscale(arr)
    eq = clahe(luma, tiles=tiles, clip_limit=clip_limit)
    out = arr + (eq - luma)[:, :, None]
    return np.clip(out, 0.0, 1.0)


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG or binary PPM/PGM as a color array in [0, 1]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    return arr


def load_image_gray(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return arr


def save_image(path, img):
    """Write a gray or color array as an 8-bit image (format from suffix)."""
    arr = np.asarray(img, dtype=np.float64)
    data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path)


def save_mask(path, mask):
    """Write a binary mask as a 1-bit PNG."""
    arr = np.asarray(mask).astype(bool)
    Image.fromarray(arr).convert("1").save(path)


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("1"), dtype=bool)
    return arr.astype(np.float64)
