"""Soft-margin SVM with an RBF kernel, trained by sequential minimal
optimization.

Multi-class problems decompose one-vs-one; prediction is majority vote with
ties broken toward the lowest class index.  Hyperparameters follow an
exhaustive power-of-ten grid: C in 10^-2..10^4, gamma in 10^-2..10^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix

GRID_C = tuple(10.0 ** k for k in range(-2, 5))
GRID_GAMMA = tuple(10.0 ** k for k in range(-2, 4))
KKT_TOL = 1e-3


@dataclass(frozen=True)
class SvmConfig:
    C: float
    gamma: float

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive")


def grid_pairs() -> list[SvmConfig]:
    """The 42 (C, gamma) pairs of the exhaustive power-of-ten search."""
    return [SvmConfig(c, g) for c in GRID_C for g in GRID_GAMMA]


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K(x, z) = exp(-gamma * ||x - z||^2)."""
    sq = (np.sum(a ** 2, axis=1)[:, None] + np.sum(b ** 2, axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class BinarySvm:
    """One trained class pair: class `pos` maps to +1, `neg` to -1."""

    pos: int
    neg: int
    sv_x: np.ndarray          # support-vector coordinates
    sv_idx: np.ndarray        # their row indices in the training matrix
    alpha: np.ndarray         # dual coefficients, in [0, C]
    signs: np.ndarray         # +-1 labels of the support vectors
    bias: float

    def decision(self, x: np.ndarray, gamma: float) -> np.ndarray:
        k = rbf_kernel(x, self.sv_x, gamma)
        return k @ (self.alpha * self.signs) + self.bias


@dataclass
class SvmModel:
    config: SvmConfig
    n_classes: int
    pairs: list[BinarySvm] = field(default_factory=list)


def _smo(kernel: np.ndarray, signs: np.ndarray, c: float,
         tol: float = KKT_TOL, max_iter: int = 1_000_000) -> tuple[np.ndarray, float]:
    """Two-variable SMO on the dual, maximal-violating-pair selection with a
    second-order working-set choice.  Stops when the KKT gap m - M <= tol."""
    n = len(signs)
    alpha = np.zeros(n)
    grad = -np.ones(n)                     # gradient of 0.5 a^T Q a - e^T a
    diag = np.diag(kernel)

    for _ in range(max_iter):
        yg = -signs * grad
        up = ((signs > 0) & (alpha < c)) | ((signs < 0) & (alpha > 0))
        low = ((signs > 0) & (alpha > 0)) | ((signs < 0) & (alpha < c))
        if not up.any() or not low.any():
            break
        up_ids = np.flatnonzero(up)
        i = int(up_ids[np.argmax(yg[up_ids])])
        m_up = yg[i]
        low_ids = np.flatnonzero(low)
        m_low = yg[low_ids].min()
        if m_up - m_low <= tol:
            break

        # second-order choice of j: largest decrease along the (i, j) pair
        cand = low_ids[yg[low_ids] < m_up]
        quad = np.maximum(diag[i] + diag[cand] - 2.0 * kernel[i, cand], 1e-12)
        gain = (m_up - yg[cand]) ** 2 / quad
        j = int(cand[np.argmax(gain)])

        # minimize along alpha_i += y_i * d, alpha_j -= y_j * d
        denom = max(diag[i] + diag[j] - 2.0 * kernel[i, j], 1e-12)
        d = (m_up - yg[j]) / denom
        if signs[i] > 0:
            lo_i, hi_i = -alpha[i], c - alpha[i]
        else:
            lo_i, hi_i = alpha[i] - c, alpha[i]
        if signs[j] > 0:
            lo_j, hi_j = alpha[j] - c, alpha[j]
        else:
            lo_j, hi_j = -alpha[j], c - alpha[j]
        d = float(np.clip(d, max(lo_i, lo_j), min(hi_i, hi_j)))
        if d == 0.0:
            break

        delta_i = signs[i] * d
        delta_j = -signs[j] * d
        alpha[i] += delta_i
        alpha[j] += delta_j
        grad += (signs * kernel[:, i]) * (signs[i] * delta_i) \
            + (signs * kernel[:, j]) * (signs[j] * delta_j)

    yg = -signs * grad
    up = ((signs > 0) & (alpha < c)) | ((signs < 0) & (alpha > 0))
    low = ((signs > 0) & (alpha > 0)) | ((signs < 0) & (alpha < c))
    free = (alpha > 0) & (alpha < c)
    if free.any():
        bias = float(yg[free].mean())
    elif up.any() and low.any():
        bias = float((yg[up].max() + yg[low].min()) / 2.0)
    else:
        bias = 0.0
    return alpha, bias


def dual_objective(kernel: np.ndarray, signs: np.ndarray, alpha: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 0.5 * alpha^T Q alpha (the maximized dual)."""
    q = (signs[:, None] * signs[None, :]) * kernel
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def svm_train(train: FeatureMatrix, cfg: SvmConfig) -> SvmModel:
    """Train one-vs-one RBF SVMs over every class pair present in `train`."""
    classes = np.unique(train.y)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes to train an SVM")
    n_classes = int(train.y.max() + 1)
    model = SvmModel(config=cfg, n_classes=n_classes)
    for ai in range(len(classes)):
        for bi in range(ai + 1, len(classes)):
            a, b = int(classes[ai]), int(classes[bi])
            rows = np.flatnonzero((train.y == a) | (train.y == b))
            x = train.x[rows]
            signs = np.where(train.y[rows] == a, 1.0, -1.0)
            kernel = rbf_kernel(x, x, cfg.gamma)
            alpha, bias = _smo(kernel, signs, cfg.C)
            sv = alpha > 0
            model.pairs.append(BinarySvm(
                pos=a, neg=b, sv_x=x[sv].copy(), sv_idx=rows[sv],
                alpha=alpha[sv], signs=signs[sv], bias=bias))
    return model


def svm_predict(model: SvmModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """One-vs-one majority vote; vote ties go to the lowest class index."""
    data = x.x if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2 or (model.pairs and data.shape[1] != model.pairs[0].sv_x.shape[1]):
        raise ValueError("feature dimension does not match the trained model")
    votes = np.zeros((data.shape[0], model.n_classes), dtype=int)
    for pair in model.pairs:
        dec = pair.decision(data, model.config.gamma)
        votes[np.arange(len(dec)), np.where(dec > 0, pair.pos, pair.neg)] += 1
    return np.argmax(votes, axis=1)


def svm_grid_search(train: FeatureMatrix,
                    val: FeatureMatrix) -> tuple[SvmConfig, SvmModel]:
    """Exhaustive search over the 42 power-of-ten (C, gamma) pairs.

    Returns the configuration with the best validation accuracy; ties keep
    the smaller C, then the smaller gamma.
    """
    if val.n == 0:
        raise ValueError("validation set is empty")
    if set(val.sample_ids) & set(train.sample_ids):
        raise ValueError("train and validation sets overlap")
    best: tuple[float, SvmConfig, SvmModel] | None = None
    for cfg in grid_pairs():
        model = svm_train(train, cfg)
        acc = float(np.mean(svm_predict(model, val) == val.y))
        if best is None or acc > best[0]:
            best = (acc, cfg, model)
    return best[1], best[2]
