"""Command-line interface.

Subcommands mirror the pipeline stages (`synth`, `segment`, `regions`,
`extract`, `select`, `train`, `evaluate`) plus `run` for a full experiment.
Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.

`--config FILE` supplies defaults as flat `key = value` lines; explicit
flags win over the file, the file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import modelio, pipeline
from .evaluate import report_to_json, table_report
from .manifest import load_manifest
from .pipeline import DESK_TAUS, ExperimentSpec, PipelineError
from .synthetic import SceneConfig, gen_synthetic, save_synthetic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_config(path) -> dict[str, str]:
    config = {}
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {number}: expected 'key = value'")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _parse_taus(text: str) -> tuple[int, ...]:
    taus = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            taus.extend(range(int(lo), int(hi) + 1))
        elif part:
            taus.append(int(part))
    if not taus:
        raise UsageError(f"no widths in {text!r}")
    return tuple(taus)


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the manifest seed")
    common.add_argument("--beta", type=float, default=None,
                        help="texture weight in [0, 1] (default 0.45)")
    common.add_argument("--config", default=None,
                        help="flat key = value file supplying defaults")

    parser = _Parser(prog="camtrap",
                     description="camera-trap segmentation and classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--cameras", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--p-animal", type=float, default=None)

    p = sub.add_parser("segment", parents=[common],
                       help="RPCA foreground masks per camera")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--camera", action="append", default=None,
                   help="restrict to a camera id (repeatable)")
    p.add_argument("--dump-rpca", action="store_true",
                   help="also dump the L and S matrices per camera")

    p = sub.add_parser("regions", parents=[common],
                       help="regions and IoU assignment from dumped masks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-area", type=float, default=None)

    p = sub.add_parser("extract", parents=[common], help="crop feature extraction")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=pipeline.MODES, default=None)
    p.add_argument("--regions", default=None, help="regions.jsonl from the regions stage")
    p.add_argument("--features", default=None,
                   help="comma-separated external feature files")

    p = sub.add_parser("select", parents=[common],
                       help="balance, split, and cross-validated lasso selection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="features.txt from extract")
    p.add_argument("--samples", required=True, help="samples.jsonl from extract")
    p.add_argument("--out", required=True)
    p.add_argument("--n-lambdas", type=int, default=None)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--classifier", choices=("svm", "ann"), default=None)
    p.add_argument("--support", default=None, help="support.txt from select")
    p.add_argument("--split", default=None, help="split.json (recomputed if absent)")
    p.add_argument("--taus", default=None, help="MLP widths, e.g. 2,5,10 or 1-100")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a trained model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--support", default=None)
    p.add_argument("--split", default=None)

    p = sub.add_parser("run", parents=[common], help="full experiment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=pipeline.MODES, default=None)
    p.add_argument("--classifier", choices=("svm", "ann"), default=None)
    p.add_argument("--lasso", action="store_true", default=None)
    p.add_argument("--features", default=None,
                   help="comma-separated external feature files")
    p.add_argument("--taus", default=None)
    p.add_argument("--workers", type=int, default=None)

    return parser


def _resolve(args, config, key, default, cast=str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        raw = config[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _load_manifest(args, config):
    manifest = load_manifest(args.manifest)
    seed = _resolve(args, config, "seed", None, int)
    if seed is not None:
        manifest = replace(manifest, seed=seed)
    return manifest


def _spec(args, config, mode, out) -> ExperimentSpec:
    beta = _resolve(args, config, "beta", 0.45, float)
    if not 0.0 <= beta <= 1.0:
        raise UsageError(f"--beta must lie in [0, 1], got {beta}")
    feature_arg = _resolve(args, config, "features", None)
    taus_arg = _resolve(args, config, "taus", None)
    return ExperimentSpec(
        mode=mode,
        output_dir=str(out),
        classifier=_resolve(args, config, "classifier", "svm"),
        use_lasso=bool(_resolve(args, config, "lasso", False, bool)),
        extractor="external" if feature_arg else "builtin",
        feature_files=tuple(feature_arg.split(",")) if feature_arg else (),
        beta=beta,
        min_area=_resolve(args, config, "min_area", 0.001, float),
        n_lambdas=_resolve(args, config, "n_lambdas", 30, int),
        taus=_parse_taus(taus_arg) if taus_arg else DESK_TAUS,
        workers=_resolve(args, config, "workers", None, int),
    )


def _cmd_synth(args, config):
    seed = _resolve(args, config, "seed", 0, int)
    scene = SceneConfig(
        width=_resolve(args, config, "width", 96, int),
        height=_resolve(args, config, "height", 96, int),
        cameras=_resolve(args, config, "cameras", 5, int),
        frames_per_camera=_resolve(args, config, "frames", 120, int),
        p_animal=_resolve(args, config, "p_animal", 0.75, float),
    )
    dataset = gen_synthetic(scene, seed=seed)
    manifest_path = save_synthetic(dataset, args.out)
    print(f"wrote {len(dataset.manifest.records)} frames, manifest {manifest_path}")
    return 0


def _cmd_segment(args, config):
    manifest = _load_manifest(args, config)
    spec = replace(_spec(args, config, "auto_plus_fp", args.out),
                   dump_rpca=bool(args.dump_rpca))
    masks = pipeline.segment_stage(manifest, spec, cameras=args.camera)
    print(f"wrote {len(masks)} masks under {args.out}/masks")
    return 0


def _cmd_regions(args, config):
    manifest = _load_manifest(args, config)
    spec = _spec(args, config, "auto_plus_fp", args.out)
    masks = pipeline.load_masks(manifest, args.masks)
    regions = pipeline.regions_stage(manifest, masks, spec)
    print(f"wrote {len(regions)} regions to {args.out}/regions.jsonl")
    return 0


def _cmd_extract(args, config):
    manifest = _load_manifest(args, config)
    mode = _resolve(args, config, "mode", "gt_only")
    spec = _spec(args, config, mode, args.out)
    regions = pipeline.load_regions(args.regions, manifest) if args.regions else None
    labels = pipeline.experiment_labels(manifest, mode)
    samples = pipeline.build_samples(manifest, mode, regions, manifest.seed)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    fm = pipeline.extract_stage(manifest, spec, samples, labels)
    print(f"extracted {fm.n} x {fm.p} features to {args.out}/features.txt")
    return 0


def _load_feature_rows(args):
    from .features import load_features
    samples, labels = pipeline.load_samples(args.samples)
    index = {lab.name: lab.index for lab in labels}
    y = np.array([index[s.label_name] for s in samples])
    fm = load_features(args.features, y=y)
    if len(y) != fm.n:
        raise PipelineError("features and samples disagree on row count")
    return fm, labels


def _cmd_select(args, config):
    manifest = _load_manifest(args, config)
    spec = _spec(args, config, "gt_only", args.out)
    fm, _ = _load_feature_rows(args)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    train_ids, _ = pipeline.compute_split(fm, manifest.seed, spec.train_fraction,
                                          out_dir=args.out)
    support, model = pipeline.select_stage(fm, train_ids, spec, manifest.seed)
    print(f"selected {len(support.selected)} features "
          f"(sparsity {support.sparsity:.2f}%), lambda {model.lam:.6g}")
    return 0


def _cmd_train(args, config):
    manifest = _load_manifest(args, config)
    fm, _ = _load_feature_rows(args)
    spec = _spec(args, config, "gt_only", args.out)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    if args.split:
        train_ids, _ = pipeline.load_split(args.split)
    else:
        train_ids, _ = pipeline.compute_split(fm, manifest.seed, spec.train_fraction,
                                              out_dir=args.out)
    support = None
    if args.support:
        from .lasso import load_support
        support, _ = load_support(args.support)
    _, hyper, _ = pipeline.train_stage(fm, train_ids, spec, manifest.seed,
                                       support=support)
    print(f"trained {spec.classifier} model {args.out}/model.bin ({hyper})")
    return 0


def _cmd_evaluate(args, config):
    manifest = _load_manifest(args, config)
    fm, labels = _load_feature_rows(args)
    with open(args.model, "rb") as fh:
        magic = fh.read(8)
    classifier = "svm" if magic == modelio.MAGIC_SVM else "ann"
    spec = replace(_spec(args, config, "gt_only", args.out), classifier=classifier)
    model = modelio.load_svm(args.model) if classifier == "svm" \
        else modelio.load_mlp(args.model)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    if args.split:
        train_ids, test_ids = pipeline.load_split(args.split)
    else:
        train_ids, test_ids = pipeline.compute_split(fm, manifest.seed,
                                                     spec.train_fraction,
                                                     out_dir=args.out)
    support = None
    if args.support:
        from .lasso import load_support
        support, _ = load_support(args.support)
    report = pipeline.evaluate_stage(fm, model, train_ids, test_ids, spec, labels,
                                     manifest.seed, support=support)
    sys.stdout.write(table_report([report]))
    return 0


def _cmd_run(args, config):
    manifest = _load_manifest(args, config)
    mode = _resolve(args, config, "mode", "gt_only")
    spec = _spec(args, config, mode, args.out)
    report = pipeline.run_experiment(spec, manifest)
    sys.stdout.write(table_report([report]))
    sys.stdout.write(report_to_json(report))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "segment": _cmd_segment,
    "regions": _cmd_regions,
    "extract": _cmd_extract,
    "select": _cmd_select,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _read_config(args.config) if getattr(args, "config", None) else {}
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        code = exc.code if exc.code is not None else 0
        return int(code)
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
