import numpy as np
import pytest

from camtrap.imaging import lbp_map
from camtrap.rpca import (RpcaConfig, build_data_matrix, default_lambda,
                          foreground_masks, load_matrix, save_matrix,
                          soft_threshold, solve_rpca, svt)


def rank_k_plus_spikes(rng, m, n, k, frac, spike=1.0):
    low = rng.normal(size=(m, k)) @ rng.normal(size=(k, n))
    sparse = np.zeros((m, n))
    idx = rng.choice(m * n, size=int(frac * m * n), replace=False)
    sparse.flat[idx] = rng.choice([-spike, spike], size=len(idx))
    return low, sparse


class TestOperators:
    def test_soft_threshold_formula(self):
        x = np.array([-2.0, -0.1, 0.0, 0.1, 2.0])
        assert np.allclose(soft_threshold(x, 0.5), [-1.5, 0.0, 0.0, 0.0, 1.5])

    def test_soft_threshold_contracts_and_keeps_sign(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 40))
        out = soft_threshold(x, 0.3)
        assert np.all(np.abs(out) <= np.abs(x) + 1e-15)
        assert np.all((out == 0) | (np.sign(out) == np.sign(x)))

    def test_svt_matches_analytic_shrinkage(self):
        # proximal operator of the nuclear norm: shrink singular values
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = rng.normal(size=(5, 5))
            tau = float(rng.uniform(0.05, 2.0))
            u, s, vt = np.linalg.svd(a, full_matrices=False)
            ref = (u * np.maximum(s - tau, 0.0)) @ vt
            assert np.abs(svt(a, tau) - ref).max() <= 1e-10


class TestBuildDataMatrix:
    def test_beta_zero_raw_frames(self):
        rng = np.random.default_rng(2)
        frames = [rng.uniform(size=(6, 7)) for _ in range(3)]
        dm = build_data_matrix(frames, 0.0)
        for j, f in enumerate(frames):
            assert np.array_equal(dm.values[:, j], f.ravel())

    def test_beta_one_lbp_frames(self):
        rng = np.random.default_rng(3)
        frames = [rng.uniform(size=(6, 7)) for _ in range(3)]
        dm = build_data_matrix(frames, 1.0)
        for j, f in enumerate(frames):
            assert np.array_equal(dm.values[:, j], lbp_map(f).ravel())

    def test_default_beta_blend_elementwise(self):
        # 0.45 is the pipeline default texture weight
        rng = np.random.default_rng(4)
        frames = [rng.uniform(size=(5, 5)) for _ in range(4)]
        dm = build_data_matrix(frames, 0.45)
        for j, f in enumerate(frames):
            expected = 0.45 * lbp_map(f).ravel() + 0.55 * f.ravel()
            assert np.allclose(dm.values[:, j], expected, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            build_data_matrix([np.zeros((4, 4)), np.zeros((5, 4))], 0.5)

    def test_too_few_frames(self):
        with pytest.raises(ValueError, match="2 frames"):
            build_data_matrix([np.zeros((4, 4))], 0.5)


class TestSolveRpca:
    def test_rank1_uncorrupted(self):
        rng = np.random.default_rng(5)
        m = np.outer(rng.normal(size=60), rng.normal(size=40))
        res = solve_rpca(m, RpcaConfig(lam=default_lambda(60, 40)))
        assert np.linalg.norm(res.S) / np.linalg.norm(m) <= 10 * 1e-7
        assert np.linalg.norm(res.L - m) / np.linalg.norm(m) <= 1e-6

    def test_rank5_sparse_recovery(self):
        rng = np.random.default_rng(6)
        low, sparse = rank_k_plus_spikes(rng, 100, 100, 5, 0.05)
        res = solve_rpca(low + sparse, RpcaConfig(lam=0.1))
        rel = np.linalg.norm(res.L - low) / np.linalg.norm(low)
        assert rel <= 1e-5
        assert res.iterations <= 500

    def test_zero_matrix(self):
        res = solve_rpca(np.zeros((8, 8)))
        assert res.iterations <= 1
        assert np.all(res.L == 0) and np.all(res.S == 0)

    def test_final_residual_consistent(self):
        rng = np.random.default_rng(7)
        low, sparse = rank_k_plus_spikes(rng, 40, 30, 3, 0.05)
        m = low + sparse
        res = solve_rpca(m)
        recomputed = np.linalg.norm(m - res.L - res.S) / np.linalg.norm(m)
        assert abs(res.final_residual - recomputed) <= 1e-12

    def test_scaling_covariance(self):
        rng = np.random.default_rng(8)
        low, sparse = rank_k_plus_spikes(rng, 40, 30, 3, 0.05)
        m = low + sparse
        r1 = solve_rpca(m)
        r2 = solve_rpca(2.0 * m)
        assert np.linalg.norm(r2.L - 2 * r1.L) / np.linalg.norm(2 * r1.L) <= 1e-6
        assert np.linalg.norm(r2.S - 2 * r1.S) / max(np.linalg.norm(2 * r1.S), 1e-12) <= 1e-6

    def test_nonfinite_rejected(self):
        m = np.zeros((4, 4))
        m[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            solve_rpca(m)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RpcaConfig(rho=0.9)
        with pytest.raises(ValueError):
            RpcaConfig(tol=2.0)
        with pytest.raises(ValueError):
            RpcaConfig(lam=-1.0)


class TestForegroundMasks:
    def test_zero_s_gives_empty_masks(self):
        from camtrap.rpca import RpcaResult
        res = RpcaResult(L=np.zeros((24, 3)), S=np.zeros((24, 3)),
                         iterations=1, final_residual=0.0)
        masks = foreground_masks(res, width=6, height=4)
        assert all(np.all(m == 0) for m in masks)

    def test_solid_block_recovered(self):
        from camtrap.rpca import RpcaResult
        h = w = 32
        s = np.zeros((h * w, 2))
        img = np.zeros((h, w))
        img[10:20, 12:22] = 1.0
        s[:, 0] = img.ravel()
        res = RpcaResult(L=np.zeros_like(s), S=s, iterations=1, final_residual=0.0)
        masks = foreground_masks(res, width=w, height=h)
        expected = img.copy()
        for r, c in ((10, 12), (10, 21), (19, 12), (19, 21)):
            expected[r, c] = 0.0          # median rounds the block corners
        assert np.array_equal(masks[0], expected)
        assert np.all(masks[1] == 0)

    def test_sign_flip_invariant(self):
        from camtrap.rpca import RpcaResult
        rng = np.random.default_rng(9)
        s = rng.normal(size=(64, 3)) * (rng.uniform(size=(64, 3)) < 0.2)
        r1 = RpcaResult(L=np.zeros_like(s), S=s, iterations=1, final_residual=0.0)
        r2 = RpcaResult(L=np.zeros_like(s), S=-s, iterations=1, final_residual=0.0)
        m1 = foreground_masks(r1, width=8, height=8)
        m2 = foreground_masks(r2, width=8, height=8)
        assert all(np.array_equal(a, b) for a, b in zip(m1, m2))

    def test_geometry_mismatch(self):
        from camtrap.rpca import RpcaResult
        res = RpcaResult(L=np.zeros((10, 2)), S=np.zeros((10, 2)),
                         iterations=0, final_residual=0.0)
        with pytest.raises(ValueError, match="geometry"):
            foreground_masks(res, width=3, height=5)


class TestMatrixDump:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        m = rng.normal(size=(7, 5))
        path = tmp_path / "m.mat"
        save_matrix(path, m)
        assert np.array_equal(load_matrix(path), m)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mat"
        path.write_bytes(b"NOTAMAT!" + b"\0" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_matrix(path)
