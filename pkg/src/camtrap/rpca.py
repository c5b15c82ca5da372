"""Robust PCA by inexact augmented Lagrangian principal component pursuit.

Decomposes a frame-stack data matrix M into a low-rank background L and a
sparse foreground S by minimizing ||L||_* + lambda * ||S||_1 subject to
L + S = M.  The data matrix blends each frame's intensities with its local
binary pattern texture map using a weight beta, so the decomposition sees
both appearance and texture change.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import svds

from .imaging import as_gray, lbp_map, morph_clean, otsu_threshold

MAGIC_MATRIX = b"RPCAMAT\x00"


@dataclass
class DataMatrix:
    """m x n stack of vectorized frames (columns), one camera per stack."""

    values: np.ndarray
    beta: float
    frame_ids: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RpcaConfig:
    lam: float | None = None      # sparsity weight; None = 1/sqrt(max(m, n))
    mu0: float | None = None      # initial penalty; None = 1.25 / sigma_1(M)
    rho: float = 1.5              # penalty growth
    tol: float = 1e-7             # relative residual tolerance
    max_iter: int = 500

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.mu0 is not None and self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class RpcaResult:
    L: np.ndarray
    S: np.ndarray
    iterations: int
    final_residual: float


def default_lambda(m: int, n: int) -> float:
    return 1.0 / np.sqrt(max(m, n))


def soft_threshold(x: np.ndarray, kappa: float) -> np.ndarray:
    """Elementwise shrink: sign(x) * max(|x| - kappa, 0)."""
    return np.sign(x) * np.maximum(np.abs(x) - kappa, 0.0)


def svt(a: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink the singular values of `a` by tau.

    Proximal operator of tau * nuclear norm.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (u[:, keep] * s[keep]) @ vt[keep]


def _top_svd(a: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # partial SVD for small predicted ranks; deterministic start vector
    min_dim = min(a.shape)
    if 0 < k < min_dim // 4 and min_dim > 8:
        v0 = np.full(min(a.shape), 1.0 / np.sqrt(min(a.shape)))
        u, s, vt = svds(a, k=k, v0=v0)
        order = np.argsort(s)[::-1]
        return u[:, order], s[order], vt[order]
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u, s, vt


def build_data_matrix(frames: list[np.ndarray], beta: float,
                      frame_ids: list[int] | None = None) -> DataMatrix:
    """Column j = beta * vec(lbp_map(frame_j)) + (1 - beta) * vec(frame_j).

    Vectorization is row-major.  All frames must share one geometry.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    arrays = [as_gray(f) for f in frames]
    shape = arrays[0].shape
    for k, arr in enumerate(arrays):
        if arr.shape != shape:
            raise ValueError(f"frame {k} has shape {arr.shape}, expected {shape}")
    cols = [beta * lbp_map(arr).ravel() + (1.0 - beta) * arr.ravel() for arr in arrays]
    ids = list(frame_ids) if frame_ids is not None else list(range(len(frames)))
    return DataMatrix(values=np.column_stack(cols), beta=beta, frame_ids=ids)


def solve_rpca(m: DataMatrix | np.ndarray, cfg: RpcaConfig = RpcaConfig()) -> RpcaResult:
    """Inexact-ALM principal component pursuit.

    Iterates L <- SVT_{1/mu}(M - S + Y/mu), S <- shrink_{lam/mu}(M - L + Y/mu),
    Y <- Y + mu (M - L - S), mu <- min(rho mu, mu_max) until the relative
    residual ||M - L - S||_F / ||M||_F reaches cfg.tol or cfg.max_iter.
    """
    M = m.values if isinstance(m, DataMatrix) else np.asarray(m, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("data matrix must be 2-D")
    if not np.isfinite(M).all():
        raise ValueError("data matrix contains non-finite entries")

    norm_m = np.linalg.norm(M)
    if norm_m == 0.0:
        return RpcaResult(L=np.zeros_like(M), S=np.zeros_like(M),
                          iterations=0, final_residual=0.0)

    rows, cols = M.shape
    lam = cfg.lam if cfg.lam is not None else default_lambda(rows, cols)
    sigma1 = np.linalg.norm(M, 2)
    mu = cfg.mu0 if cfg.mu0 is not None else 1.25 / sigma1
    mu_max = mu * 1e7

    # scaled dual start (Lin et al. style): Y = M / max(sigma_1, ||M||_inf / lam)
    Y = M / max(sigma1, np.abs(M).max() / lam)
    L = np.zeros_like(M)
    S = np.zeros_like(M)
    sv = 10 if min(rows, cols) >= 10 else min(rows, cols)

    iterations = 0
    residual = np.inf
    for iterations in range(1, cfg.max_iter + 1):
        try:
            u, s, vt = _top_svd(M - S + Y / mu, sv)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"SVD failed at iteration {iterations}: {exc}") from exc
        shrunk = np.maximum(s - 1.0 / mu, 0.0)
        svp = int(np.count_nonzero(shrunk))
        if svp >= len(s) and len(s) < min(rows, cols):
            # predicted rank too small; redo with a full decomposition
            u, s, vt = np.linalg.svd(M - S + Y / mu, full_matrices=False)
            shrunk = np.maximum(s - 1.0 / mu, 0.0)
            svp = int(np.count_nonzero(shrunk))
        L = (u[:, :svp] * shrunk[:svp]) @ vt[:svp]
        sv = min(svp + 1, min(rows, cols)) if svp < sv else \
            min(svp + int(round(0.05 * min(rows, cols))) + 1, min(rows, cols))

        S = soft_threshold(M - L + Y / mu, lam / mu)
        R = M - L - S
        Y = Y + mu * R
        mu = min(cfg.rho * mu, mu_max)
        residual = np.linalg.norm(R) / norm_m
        if residual <= cfg.tol:
            break

    return RpcaResult(L=L, S=S, iterations=iterations, final_residual=float(residual))


def foreground_masks(result: RpcaResult, width: int, height: int) -> list[np.ndarray]:
    """Binary masks from the sparse component, one per column.

    Per column: the absolute values are reshaped to the frame, min-max
    rescaled to [0, 1], thresholded by Otsu, and cleaned morphologically.
    """
    if result.S.shape[0] != width * height:
        raise ValueError(
            f"geometry {width}x{height} does not match {result.S.shape[0]} rows")
    masks = []
    for j in range(result.S.shape[1]):
        a = np.abs(result.S[:, j]).reshape(height, width)
        lo, hi = a.min(), a.max()
        scaled = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
        threshold = otsu_threshold(scaled)
        masks.append(morph_clean((scaled > threshold).astype(np.float64)))
    return masks


def save_matrix(path, matrix: np.ndarray):
    """Flat binary dump: magic, u64 m, u64 n, little-endian f64 column-major."""
    arr = np.asarray(matrix, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC_MATRIX)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(np.asfortranarray(arr).tobytes(order="F"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC_MATRIX:
            raise ValueError(f"{path}: not a matrix dump (bad magic {magic!r})")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape((rows, cols), order="F").copy()
