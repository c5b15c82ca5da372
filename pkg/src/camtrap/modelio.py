"""Self-describing binary model files.

Layout: 8-byte magic, u32 version, then shape metadata and little-endian
8-byte floats.  One format per classifier family.
"""

from __future__ import annotations

import struct

import numpy as np

from .mlp import MlpConfig, MlpModel
from .svm import BinarySvm, SvmConfig, SvmModel

MAGIC_SVM = b"CTSVMMDL"
MAGIC_MLP = b"CTMLPMDL"
VERSION = 1


def _write_array(fh, arr: np.ndarray):
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(fh, count: int) -> np.ndarray:
    return np.frombuffer(fh.read(count * 8), dtype="<f8").copy()


def save_svm(model: SvmModel, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC_SVM)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<ddII", model.config.C, model.config.gamma,
                             model.n_classes, len(model.pairs)))
        for pair in model.pairs:
            n_sv, p = pair.sv_x.shape
            fh.write(struct.pack("<iiQQd", pair.pos, pair.neg, n_sv, p, pair.bias))
            _write_array(fh, pair.sv_x)
            fh.write(np.ascontiguousarray(pair.sv_idx, dtype="<u8").tobytes())
            _write_array(fh, pair.alpha)
            _write_array(fh, pair.signs)


def load_svm(path) -> SvmModel:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC_SVM:
            raise ValueError(f"{path}: not an SVM model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        c, gamma, n_classes, n_pairs = struct.unpack("<ddII", fh.read(24))
        model = SvmModel(config=SvmConfig(C=c, gamma=gamma), n_classes=n_classes)
        for _ in range(n_pairs):
            pos, neg, n_sv, p, bias = struct.unpack("<iiQQd", fh.read(32))
            sv_x = _read_array(fh, n_sv * p).reshape(n_sv, p)
            sv_idx = np.frombuffer(fh.read(n_sv * 8), dtype="<u8").astype(np.intp)
            alpha = _read_array(fh, n_sv)
            signs = _read_array(fh, n_sv)
            model.pairs.append(BinarySvm(pos=pos, neg=neg, sv_x=sv_x, sv_idx=sv_idx,
                                         alpha=alpha, signs=signs, bias=bias))
    return model


def save_mlp(model: MlpModel, path):
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(MAGIC_MLP)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<IIddIQ", cfg.tau, cfg.epochs, cfg.learning_rate,
                             cfg.momentum, cfg.batch_size, cfg.seed))
        fh.write(struct.pack("<I", len(model.weights)))
        for w, b in zip(model.weights, model.biases):
            fh.write(struct.pack("<QQ", *w.shape))
            _write_array(fh, w)
            _write_array(fh, b)


def load_mlp(path) -> MlpModel:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC_MLP:
            raise ValueError(f"{path}: not an MLP model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        tau, epochs, lr, momentum, batch, seed = struct.unpack("<IIddIQ", fh.read(36))
        cfg = MlpConfig(tau=tau, epochs=epochs, learning_rate=lr, momentum=momentum,
                        batch_size=batch, seed=seed)
        (n_layers,) = struct.unpack("<I", fh.read(4))
        weights, biases = [], []
        for _ in range(n_layers):
            rows, cols = struct.unpack("<QQ", fh.read(16))
            weights.append(_read_array(fh, rows * cols).reshape(rows, cols))
            biases.append(_read_array(fh, cols))
    return MlpModel(weights=weights, biases=biases, config=cfg)
