"""The two classifier heads on toy problems.

An RBF SVM learns an XOR pattern (linearly inseparable) and a grid search
picks (C, gamma) on held-out data; the three-hidden-layer network trains on
Gaussian blobs and a width search picks its tau.
"""

import numpy as np

from camtrap.features import FeatureMatrix
from camtrap.mlp import MlpConfig, mlp_predict, mlp_width_search
from camtrap.svm import svm_grid_search, svm_predict

rng = np.random.default_rng(0)


def fmat(x, y, offset=0):
    return FeatureMatrix(x=x, y=y, sample_ids=list(range(offset, offset + len(y))),
                         extractor_id="toy")


# --- SVM on XOR ------------------------------------------------------------
corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
x = np.repeat(corners, 30, axis=0) + rng.normal(0, 0.08, size=(120, 2))
y = np.repeat([0, 1, 1, 0], 30)
perm = rng.permutation(120)
x, y = x[perm], y[perm]

train, val, test = fmat(x[:60], y[:60]), fmat(x[60:90], y[60:90], 60), (x[90:], y[90:])
config, model = svm_grid_search(train, val)
acc = 100.0 * np.mean(svm_predict(model, test[0]) == test[1])
print(f"SVM on XOR: C={config.C:g}, gamma={config.gamma:g}, "
      f"test accuracy {acc:.1f}%")

# --- MLP on blobs ----------------------------------------------------------
centers = [(-2, -2), (2, 2), (-2, 2)]
bx = np.vstack([rng.normal(c, 0.5, size=(50, 2)) for c in centers])
by = np.repeat(np.arange(3), 50)
perm = rng.permutation(150)
bx, by = bx[perm], by[perm]

train = fmat(bx[:90], by[:90])
val = fmat(bx[90:120], by[90:120], 90)
config, model = mlp_width_search(train, val, taus=(1, 2, 4, 8, 16),
                                 base=MlpConfig(tau=1, epochs=150, seed=0))
acc = 100.0 * np.mean(mlp_predict(model, bx[120:]) == by[120:])
print(f"MLP on blobs: tau={config.tau}, test accuracy {acc:.1f}%")
