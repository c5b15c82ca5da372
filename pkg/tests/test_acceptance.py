"""Acceptance gate: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion.  The end-to-end criteria drive the default synthetic scene
(5 cameras x 120 frames, 3 genus classes plus FP) through the full
pipeline, so this module takes a few minutes.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from camtrap.features import FeatureMatrix
from camtrap.lasso import kkt_violation, lasso_fit, objective, one_hot
from camtrap.manifest import FP_NAME, load_manifest
from camtrap.mlp import MlpConfig, init_model, loss_and_gradients
from camtrap.pipeline import ExperimentSpec, load_regions, load_samples, \
    load_split, run_experiment
from camtrap.regions import BoundingBox, iou
from camtrap.rpca import RpcaConfig, soft_threshold, solve_rpca, svt
from camtrap.svm import (GRID_C, GRID_GAMMA, SvmConfig, _smo, dual_objective,
                         grid_pairs, rbf_kernel, svm_predict, svm_train)
from camtrap.synthetic import SceneConfig, gen_synthetic, save_synthetic

E2E_SEED = 2024


def report_line(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[criterion {number}] {name}: {status}{suffix}")
    assert ok, f"criterion {number} {name}: {detail}"


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """One full auto_plus_fp experiment on the default synthetic scene."""
    root = tmp_path_factory.mktemp("e2e")
    started = time.monotonic()
    dataset = gen_synthetic(SceneConfig(), seed=E2E_SEED)
    manifest = load_manifest(save_synthetic(dataset, root / "data"))
    spec = ExperimentSpec(mode="auto_plus_fp", output_dir=str(root / "out"),
                          classifier="svm", use_lasso=True)
    report = run_experiment(spec, manifest)
    elapsed = time.monotonic() - started
    return manifest, spec, report, elapsed


class TestCriterion1Rpca:
    def test_rank5_recovery_over_ten_seeds(self):
        worst_err, worst_iter, worst_time = 0.0, 0, 0.0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            low = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 100))
            sparse = np.zeros((100, 100))
            idx = rng.choice(10_000, size=500, replace=False)
            sparse.flat[idx] = rng.choice([-1.0, 1.0], size=500)
            started = time.monotonic()
            result = solve_rpca(low + sparse, RpcaConfig(lam=1.0 / np.sqrt(100)))
            worst_time = max(worst_time, time.monotonic() - started)
            worst_iter = max(worst_iter, result.iterations)
            rel = np.linalg.norm(result.L - low) / np.linalg.norm(low)
            worst_err = max(worst_err, rel)
        ok = worst_err <= 1e-5 and worst_iter <= 500 and worst_time <= 10.0
        report_line(1, "RPCA rank-5 recovery, 10 seeds", ok,
                    f"err {worst_err:.2e}, iters {worst_iter}, {worst_time:.2f}s")


class TestCriterion2Operators:
    def test_svt_and_shrink_oracles(self):
        rng = np.random.default_rng(0)
        started = time.monotonic()
        worst = 0.0
        for _ in range(100):
            a = rng.normal(size=(5, 5))
            tau = float(rng.uniform(0.01, 2.0))
            u, s, vt = np.linalg.svd(a, full_matrices=False)
            analytic = (u * np.maximum(s - tau, 0.0)) @ vt
            worst = max(worst, float(np.abs(svt(a, tau) - analytic).max()))
            x = rng.normal(size=64)
            analytic_shrink = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
            worst = max(worst, float(np.abs(soft_threshold(x, tau)
                                            - analytic_shrink).max()))
        elapsed = time.monotonic() - started
        ok = worst <= 1e-10 and elapsed <= 1.0
        report_line(2, "SVT and soft-threshold oracles", ok,
                    f"max dev {worst:.2e}, {elapsed:.2f}s")


class TestCriterion3Lasso:
    def test_kkt_closed_form_and_prox_parity(self):
        rng = np.random.default_rng(1)
        started = time.monotonic()

        worst_kkt = 0.0

        # orthonormal closed form (columns orthogonal, ||x_j||^2 = N)
        n, p = 40, 8
        q, _ = np.linalg.qr(rng.normal(size=(n, p)))
        x = q * np.sqrt(n)
        y = rng.integers(0, 2, size=n)
        fm = FeatureMatrix(x=x, y=y, sample_ids=list(range(n)), extractor_id="a")
        lam = 0.05
        model = lasso_fit(fm, lam, n_classes=2)
        worst_kkt = max(worst_kkt, kkt_violation(model, x, y))
        targets = one_hot(y, 2)
        ols = x.T @ (targets - targets.mean(axis=0)) / n
        closed = np.sign(ols) * np.maximum(np.abs(ols) - lam, 0.0)
        closed_err = float(np.abs(model.coefficients - closed).max())

        # objective parity with an independent proximal-gradient solver
        def fista(x, ycol, lam):
            n_r, p_r = x.shape
            yc = ycol - ycol.mean()
            step = n_r / np.linalg.norm(x, 2) ** 2
            beta = np.zeros(p_r)
            z = beta.copy()
            t_k = 1.0
            prev = np.inf
            for _ in range(200_000):
                grad = -x.T @ (yc - x @ z) / n_r
                new = z - step * grad
                new = np.sign(new) * np.maximum(np.abs(new) - lam * step, 0.0)
                t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
                z = new + ((t_k - 1.0) / t_next) * (new - beta)
                obj = ((yc - x @ new) ** 2).sum() / (2 * n_r) \
                    + lam * np.abs(new).sum()
                if abs(prev - obj) < 1e-14 and np.abs(new - beta).max() < 1e-9:
                    beta = new
                    break
                beta, t_k, prev = new, t_next, obj
            return ((yc - x @ beta) ** 2).sum() / (2 * n_r) + lam * np.abs(beta).sum()

        worst_gap = 0.0
        for _ in range(50):
            n_r = int(rng.integers(25, 60))
            p_r = int(rng.integers(5, 21))
            xr = rng.normal(size=(n_r, p_r))
            xr = (xr - xr.mean(axis=0)) / np.maximum(xr.std(axis=0), 1e-8)
            yr = rng.integers(0, 2, size=n_r)
            lam_r = float(10 ** rng.uniform(-3, -1))
            fmr = FeatureMatrix(x=xr, y=yr, sample_ids=list(range(n_r)),
                                extractor_id="b")
            mr = lasso_fit(fmr, lam_r, n_classes=2)
            worst_kkt = max(worst_kkt, kkt_violation(mr, xr, yr))
            obj_cd = objective(xr, yr, mr)
            obj_pg = sum(fista(xr, col, lam_r) for col in one_hot(yr, 2).T)
            worst_gap = max(worst_gap, abs(obj_cd - obj_pg))

        elapsed = time.monotonic() - started
        ok = (worst_kkt <= 1e-6 and closed_err <= 1e-8
              and worst_gap <= 1e-7 and elapsed <= 30.0)
        report_line(3, "LASSO KKT / closed form / prox-grad parity", ok,
                    f"kkt {worst_kkt:.2e}, closed {closed_err:.2e}, "
                    f"gap {worst_gap:.2e}, {elapsed:.1f}s")


class TestCriterion4Iou:
    def test_exhaustive_bitboard_oracle(self):
        started = time.monotonic()
        boxes = [(x, y, w, h)
                 for x in range(8) for y in range(8)
                 for w in range(1, 9 - x) for h in range(1, 9 - y)]
        # rasterize every box as a 64-bit occupancy mask of the 8x8 grid
        bits = np.zeros(len(boxes), dtype=np.uint64)
        for k, (x, y, w, h) in enumerate(boxes):
            row = ((1 << w) - 1) << x
            val = 0
            for r in range(y, y + h):
                val |= row << (8 * r)
            bits[k] = val
        arr = np.array(boxes, dtype=np.int64)
        x0, y0 = arr[:, 0], arr[:, 1]
        x1, y1 = arr[:, 0] + arr[:, 2], arr[:, 1] + arr[:, 3]
        area = arr[:, 2] * arr[:, 3]

        iw = np.minimum(x1[:, None], x1[None, :]) - np.maximum(x0[:, None], x0[None, :])
        ih = np.minimum(y1[:, None], y1[None, :]) - np.maximum(y0[:, None], y0[None, :])
        inter_formula = np.maximum(iw, 0) * np.maximum(ih, 0)
        union_formula = area[:, None] + area[None, :] - inter_formula

        inter_pixels = np.bitwise_count(bits[:, None] & bits[None, :]).astype(np.int64)
        union_pixels = np.bitwise_count(bits[:, None] | bits[None, :]).astype(np.int64)

        formula_matches = (np.array_equal(inter_formula, inter_pixels)
                           and np.array_equal(union_formula, union_pixels))
        exact_third = iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10)) == 1 / 3
        # spot-check the scalar op against the counted pairs
        rng = np.random.default_rng(2)
        sampled_ok = True
        for i, j in rng.integers(0, len(boxes), size=(500, 2)):
            a, b = BoundingBox(*boxes[i]), BoundingBox(*boxes[j])
            expected = (inter_pixels[i, j] / union_pixels[i, j]
                        if union_pixels[i, j] else 0.0)
            sampled_ok &= iou(a, b) == expected
        elapsed = time.monotonic() - started
        ok = formula_matches and exact_third and sampled_ok and elapsed <= 5.0
        report_line(4, f"IoU pixel oracle, all {len(boxes)}^2 pairs in 8x8", ok,
                    f"{elapsed:.2f}s")


class TestCriterion5Svm:
    def test_dual_parity_kkt_and_separable(self):
        rng = np.random.default_rng(3)

        def project(alpha, signs, c):
            lo, hi = -1e8, 1e8
            for _ in range(300):
                mid = (lo + hi) / 2.0
                if np.clip(alpha - mid * signs, 0.0, c) @ signs > 0:
                    lo = mid
                else:
                    hi = mid
            return np.clip(alpha - ((lo + hi) / 2.0) * signs, 0.0, c)

        def brute_force(kernel, signs, c):
            q = (signs[:, None] * signs[None, :]) * kernel
            step = 1.0 / max(np.linalg.norm(q, 2), 1e-12)
            alpha = project(np.zeros(len(signs)), signs, c)
            for _ in range(300_000):
                new = project(alpha + step * (np.ones_like(alpha) - q @ alpha),
                              signs, c)
                if np.abs(new - alpha).max() < 1e-9:
                    return new
                alpha = new
            return alpha

        worst_gap = 0.0
        feasible = True
        for _ in range(10):
            n = int(rng.integers(8, 21))
            x = rng.normal(size=(n, 2))
            signs = rng.choice([-1.0, 1.0], size=n)
            signs[0] = -signs[1]
            c = float(rng.choice([0.5, 1.0, 10.0]))
            kernel = rbf_kernel(x, x, float(rng.choice([0.5, 1.0, 2.0])))
            alpha, _ = _smo(kernel, signs, c)
            feasible &= bool(alpha.min() >= -1e-12 and alpha.max() <= c + 1e-12
                             and abs(alpha @ signs) <= 1e-8)
            gap = abs(dual_objective(kernel, signs, alpha)
                      - dual_objective(kernel, signs, brute_force(kernel, signs, c)))
            worst_gap = max(worst_gap, gap)

        blob_x = np.vstack([rng.normal([-2, -2], 0.3, size=(20, 2)),
                            rng.normal([2, 2], 0.3, size=(20, 2))])
        blob_y = np.array([0] * 20 + [1] * 20)
        fm = FeatureMatrix(x=blob_x, y=blob_y, sample_ids=list(range(40)),
                           extractor_id="t")
        model = svm_train(fm, SvmConfig(C=10.0, gamma=1.0))
        for pair in model.pairs:
            feasible &= bool(pair.alpha.min() >= -1e-12
                             and pair.alpha.max() <= 10.0 + 1e-12
                             and abs(pair.alpha @ pair.signs) <= 1e-8)
        separable_acc = float(np.mean(svm_predict(model, blob_x) == blob_y))

        ok = worst_gap <= 1e-4 and feasible and separable_acc == 1.0
        report_line(5, "SVM dual parity / KKT feasibility / separable blobs", ok,
                    f"gap {worst_gap:.2e}, acc {separable_acc:.2f}")


class TestCriterion6MlpGradients:
    def test_twenty_random_configurations(self):
        rng = np.random.default_rng(4)
        started = time.monotonic()
        worst = 0.0
        for trial in range(20):
            p = int(rng.integers(3, 10))
            k = int(rng.integers(2, 5))
            model = init_model(p, k, MlpConfig(tau=int(rng.integers(1, 7)),
                                               seed=trial))
            x = rng.normal(size=(10, p))
            y = rng.integers(0, k, size=10)
            _, grads_w, grads_b = loss_and_gradients(model, x, y)
            eps = 1e-5
            for arrs, grads in ((model.weights, grads_w), (model.biases, grads_b)):
                for arr, grad in zip(arrs, grads):
                    fd = np.zeros_like(arr)
                    it = np.nditer(arr, flags=["multi_index"])
                    for _ in it:
                        idx = it.multi_index
                        orig = arr[idx]
                        arr[idx] = orig + eps
                        up, _, _ = loss_and_gradients(model, x, y)
                        arr[idx] = orig - eps
                        down, _, _ = loss_and_gradients(model, x, y)
                        arr[idx] = orig
                        fd[idx] = (up - down) / (2 * eps)
                    rel = np.linalg.norm(grad - fd) / max(
                        np.linalg.norm(grad) + np.linalg.norm(fd), 1e-10)
                    worst = max(worst, rel)
        elapsed = time.monotonic() - started
        ok = worst <= 1e-4 and elapsed <= 30.0
        report_line(6, "MLP finite-difference gradient check", ok,
                    f"max rel {worst:.2e}, {elapsed:.1f}s")


class TestCriterion7EndToEnd:
    def test_segmentation_hit_rate(self, e2e):
        manifest, spec, _, _ = e2e
        regions = load_regions(Path(spec.output_dir) / "regions.jsonl", manifest)
        animal_frames = {i for i, rec in enumerate(manifest.records)
                         if rec.gt_box is not None}
        hit = {r.frame_id for r in regions
               if r.iou_vs_gt is not None and r.iou_vs_gt > 0.5}
        rate = len(hit & animal_frames) / len(animal_frames)
        report_line(7, "end-to-end (a) merged-region hit rate >= 80%",
                    rate >= 0.80, f"{100 * rate:.1f}%")

    def test_accuracy_over_four_classes(self, e2e):
        _, _, report, _ = e2e
        ok = report.confusion.shape == (4, 4) and report.accuracy >= 90.0
        report_line(7, "end-to-end (b) SVM-grid test accuracy >= 90%", ok,
                    f"{report.accuracy:.2f}% over {report.confusion.shape[0]} classes")

    def test_sparsity_report_emitted(self, e2e):
        _, spec, report, _ = e2e
        text = (Path(spec.output_dir) / "sparsity.txt").read_text()
        ok = ("Sparsity [%]" in text and report.sparsity is not None
              and f"{report.sparsity:.2f}" in text)
        report_line(7, "end-to-end (c) sparsity table emitted", ok,
                    text.strip().splitlines()[-1])

    def test_runtime_within_budget(self, e2e):
        *_, elapsed = e2e
        report_line(7, "end-to-end runtime <= 5 min", elapsed <= 300.0,
                    f"{elapsed:.0f}s")


class TestCriterion8Determinism:
    def test_two_cli_runs_byte_identical(self, tmp_path):
        import subprocess
        import sys
        scene = SceneConfig(width=64, height=64, cameras=2, frames_per_camera=30,
                            genus_names=("Striped", "Spotted"), blob_size=(14, 20))
        dataset = gen_synthetic(scene, seed=7)
        manifest_path = save_synthetic(dataset, tmp_path / "data")
        payloads = []
        for name in ("one", "two"):
            out = tmp_path / name
            proc = subprocess.run(
                [sys.executable, "-m", "camtrap.cli", "run",
                 "--manifest", str(manifest_path), "--out", str(out),
                 "--mode", "auto_plus_fp", "--classifier", "svm"],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            payloads.append((out / "report.json").read_bytes())
        ok = payloads[0] == payloads[1]
        report_line(8, "byte-identical reports across two full runs", ok,
                    f"{len(payloads[0])} bytes")


class TestCriterion9Protocol:
    def test_grid_is_the_42_pairs(self):
        pairs = grid_pairs()
        ok = (len(pairs) == 42
              and {p.C for p in pairs} == {10.0 ** k for k in range(-2, 5)}
              and {p.gamma for p in pairs} == {10.0 ** k for k in range(-2, 4)}
              and GRID_C == tuple(10.0 ** k for k in range(-2, 5))
              and GRID_GAMMA == tuple(10.0 ** k for k in range(-2, 4)))
        report_line(9, "hyperparameter grid is exactly the 42 pairs", ok)

    def test_split_fractions_and_iou_rules(self, e2e):
        manifest, spec, _, _ = e2e
        out = Path(spec.output_dir)
        samples, labels = load_samples(out / "samples.jsonl")
        index = {lab.name: lab.index for lab in labels}
        y = np.array([index[s.label_name] for s in samples])
        train_ids, test_ids = load_split(out / "split.json")

        split_ok = not set(train_ids) & set(test_ids)
        kept = np.concatenate([train_ids, test_ids])
        for c in np.unique(y[kept]):
            n_class = int(np.sum(y[kept] == c))
            n_train = int(np.sum(y[train_ids] == c))
            split_ok &= n_train == int(np.floor(0.7 * n_class + 0.5))

        regions = load_regions(out / "regions.jsonl", manifest)
        by_key = {(r.frame_id, r.box.as_tuple()): r for r in regions}
        iou_ok = True
        for s in samples:
            region = by_key.get((s.record_id, s.box.as_tuple()))
            if s.label_name == FP_NAME:
                iou_ok &= region is not None and (region.iou_vs_gt in (None, 0.0))
            elif s.source == "automatic":
                iou_ok &= region is not None and region.iou_vs_gt > 0.5
        excluded_never_sampled = all(
            by_key[(s.record_id, s.box.as_tuple())].assigned is not None
            for s in samples if (s.record_id, s.box.as_tuple()) in by_key)

        ok = split_ok and iou_ok and excluded_never_sampled
        report_line(9, "70/30 stratified split and IoU assignment rules", ok)
