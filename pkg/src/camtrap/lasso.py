"""L1-penalized least squares as a feature selector.

Multi-class targets are one-hot encoded and each class column is fit by an
independent lasso regression sharing the design matrix; the selected subset
is the union of nonzero coefficients across classes.  The solved objective
per class is

    (1 / 2N) * ||y - b0 - X beta||^2  +  lam * ||beta||_1

with the intercept b0 unpenalized (equal to the target mean for centered
designs).  Under this scaling all coefficients vanish at
lam_max = max_j |x_j^T (y - ybar)| / N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from .rng import derive_rng

ZERO_COEF = 1e-10


@dataclass
class LassoModel:
    coefficients: np.ndarray            # (p, K)
    intercepts: np.ndarray              # (K,)
    lam: float
    path: list[tuple[float, float]]     # (lambda, cv mse), descending lambdas

    def __post_init__(self):
        if not np.isfinite(self.coefficients).all():
            raise ValueError("coefficients contain non-finite values")
        lams = [l for l, _ in self.path]
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("path lambdas must be strictly decreasing")

    @property
    def constraint_budget(self) -> float:
        """Sum of |coefficients|: the constraint-form budget of the solution."""
        return float(np.abs(self.coefficients).sum())

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.coefficients + self.intercepts


@dataclass
class FeatureSupport:
    selected: list[int]
    sparsity: float                     # percent of features zeroed

    def __post_init__(self):
        if not self.selected:
            raise ValueError("empty support; decrease lambda")


def one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def lambda_max(x: np.ndarray, targets: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is zero."""
    centered = targets - targets.mean(axis=0)
    return float(np.abs(x.T @ centered).max() / x.shape[0])


class _Workspace:
    """Design-matrix quantities shared by every fit along a path."""

    def __init__(self, x: np.ndarray):
        self.x = x
        self.n, self.p = x.shape
        self.z = np.einsum("ij,ij->j", x, x) / self.n   # ||x_j||^2 / N
        self.use_gram = self.p <= 1024
        self.gram = (x.T @ x) / self.n if self.use_gram else None


def _cd_fit(x: np.ndarray, targets: np.ndarray, lam: float,
            coef: np.ndarray | None = None, tol: float = 1e-7,
            max_sweeps: int = 100_000,
            work: _Workspace | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate descent on all target columns at once.

    Returns (coefficients (p, K), intercepts (K,)).  Sweeps alternate
    between the full coordinate set and the active (nonzero) set, the usual
    lasso speedup; convergence is max coefficient change <= tol over a full
    sweep.  A Gram-matrix update serves moderate p, a residual update the
    rest; both maintain rho_j = x_j^T r_{-j} / N exactly.
    """
    if work is None:
        work = _Workspace(x)
    n, p = work.n, work.p
    z, gram = work.z, work.gram
    intercepts = targets.mean(axis=0)
    yc = targets - intercepts
    beta = np.zeros((p, targets.shape[1])) if coef is None else coef.copy()

    if work.use_gram:
        c = (x.T @ yc) / n
        q = gram @ beta        # running gram @ beta, updated in place
        resid = None
    else:
        c = q = None
        resid = yc - x @ beta  # running residual, updated in place

    def sweep(indices) -> float:
        nonlocal q, resid
        delta_max = 0.0
        for j in indices:
            if z[j] <= 0.0:
                beta[j] = 0.0
                continue
            old = beta[j].copy()
            if work.use_gram:
                rho = c[j] - q[j] + gram[j, j] * old
            else:
                rho = (x[:, j] @ resid) / n + z[j] * old
            new = np.sign(rho) * np.maximum(np.abs(rho) - lam, 0.0) / z[j]
            step = new - old
            if np.any(step != 0.0):
                beta[j] = new
                if work.use_gram:
                    q += np.outer(gram[:, j], step)
                else:
                    resid -= np.outer(x[:, j], step)
                delta_max = max(delta_max, float(np.abs(step).max()))
        return delta_max

    everything = range(p)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if sweep(everything) <= tol:
            break
        active = np.flatnonzero(np.any(beta != 0.0, axis=1))
        while sweeps < max_sweeps and len(active):
            sweeps += 1
            if sweep(active) <= tol:
                break
    return beta, intercepts


def lasso_fit(train: FeatureMatrix, lam: float, n_classes: int | None = None,
              tol: float = 1e-7, warm: np.ndarray | None = None) -> LassoModel:
    """Fit the one-hot multi-target lasso at a single penalty."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    k = int(n_classes if n_classes is not None else train.y.max() + 1)
    targets = one_hot(train.y, k)
    coef, intercepts = _cd_fit(train.x, targets, lam, coef=warm, tol=tol)
    return LassoModel(coefficients=coef, intercepts=intercepts, lam=lam, path=[])


def kkt_violation(model: LassoModel, x: np.ndarray, y: np.ndarray) -> float:
    """Worst-case optimality violation of a fitted model.

    Zero coefficients require |x_j^T r| / N <= lam; nonzero ones require
    x_j^T r / N = lam * sign(beta).  Returns the maximum excess.
    """
    n = x.shape[0]
    targets = one_hot(y, model.coefficients.shape[1])
    resid = targets - model.intercepts - x @ model.coefficients
    grad = x.T @ resid / n
    zero = np.abs(model.coefficients) <= ZERO_COEF
    viol_zero = np.maximum(np.abs(grad[zero]) - model.lam, 0.0)
    viol_active = np.abs(grad[~zero] - model.lam * np.sign(model.coefficients[~zero]))
    candidates = [v.max() for v in (viol_zero, viol_active) if v.size]
    return float(max(candidates)) if candidates else 0.0


def objective(x: np.ndarray, y: np.ndarray, model: LassoModel) -> float:
    """Penalized objective summed over the class regressions."""
    n = x.shape[0]
    targets = one_hot(y, model.coefficients.shape[1])
    resid = targets - model.intercepts - x @ model.coefficients
    return float((resid ** 2).sum() / (2 * n) + model.lam * np.abs(model.coefficients).sum())


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deal each class round-robin into folds after a seeded shuffle."""
    y = np.asarray(y)
    if len(y) < folds:
        raise ValueError(f"fewer samples ({len(y)}) than folds ({folds})")
    rng = derive_rng(seed, "lasso-cv")
    assignment = np.zeros(len(y), dtype=int)
    offset = 0
    for c in np.unique(y):
        ids = rng.permutation(np.flatnonzero(y == c))
        assignment[ids] = (np.arange(len(ids)) + offset) % folds
        offset += len(ids)
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def cv_select(train: FeatureMatrix, n_lambdas: int = 30, folds: int = 5,
              seed: int = 0) -> LassoModel:
    """Pick the penalty by k-fold cross-validated one-hot MSE.

    The grid runs geometrically from lam_max down to lam_max / 1000 with
    warm starts.  Fold fits are scoring-only and run at a capped, loose
    tolerance (deep-path solutions are dense and slow, and their exact
    coefficients cannot change the argmin in the overfit region); the
    returned model is refit on all rows at the winning penalty, warm-started
    along the path and fully converged.  Carries the (lambda, cv_mse) path.
    """
    k = int(train.y.max() + 1)
    targets = one_hot(train.y, k)
    lam_hi = lambda_max(train.x, targets)
    if lam_hi <= 0:
        raise ValueError("degenerate problem: lambda_max is zero")
    grid = np.geomspace(lam_hi, lam_hi * 1e-3, n_lambdas)

    fold_ids = stratified_folds(train.y, folds, seed)
    mse = np.zeros(n_lambdas)
    for val_ids in fold_ids:
        mask = np.ones(train.n, dtype=bool)
        mask[val_ids] = False
        x_fit, y_fit = train.x[mask], targets[mask]
        x_val, y_val = train.x[val_ids], targets[val_ids]
        work = _Workspace(x_fit)
        coef = None
        for i, lam in enumerate(grid):
            coef, intercepts = _cd_fit(x_fit, y_fit, float(lam), coef=coef,
                                       tol=1e-5, max_sweeps=20, work=work)
            if len(val_ids):
                pred = x_val @ coef + intercepts
                mse[i] += ((y_val - pred) ** 2).mean()
    mse /= folds

    best = int(np.argmin(mse))
    work = _Workspace(train.x)
    coef = None
    for lam in grid[:best]:
        coef, _ = _cd_fit(train.x, targets, float(lam), coef=coef,
                          tol=1e-5, max_sweeps=20, work=work)
    coef, intercepts = _cd_fit(train.x, targets, float(grid[best]), coef=coef,
                               tol=1e-7, max_sweeps=50_000, work=work)
    model = LassoModel(coefficients=coef, intercepts=intercepts,
                       lam=float(grid[best]), path=[])
    model.path = [(float(l), float(m)) for l, m in zip(grid, mse)]
    return model


def select_support(model: LassoModel) -> FeatureSupport:
    """Feature indices with any nonzero coefficient across the regressions."""
    p = model.coefficients.shape[0]
    nonzero = np.abs(model.coefficients).max(axis=1) > ZERO_COEF
    selected = [int(j) for j in np.flatnonzero(nonzero)]
    sparsity = 100.0 * (p - len(selected)) / p
    return FeatureSupport(selected=selected, sparsity=sparsity)


def save_support(support: FeatureSupport, lam: float, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# sparsity {support.sparsity:.2f} lambda {lam!r}\n")
        for j in support.selected:
            fh.write(f"{j}\n")


def load_support(path) -> tuple[FeatureSupport, float]:
    lines = open(path, encoding="utf-8").read().splitlines()
    header = lines[0].split()
    sparsity, lam = float(header[2]), float(header[4])
    selected = [int(line) for line in lines[1:] if line.strip()]
    return FeatureSupport(selected=selected, sparsity=sparsity), lam
