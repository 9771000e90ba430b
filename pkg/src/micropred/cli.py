"""Command-line entry point.

Two modes: `micropred --config run.cfg` executes a full configured pipeline,
and each pipeline stage is also exposed as a standalone subcommand operating
on explicit files so the steps can be scripted individually.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, evaluation, pipeline, plots, preprocess, reduction, spatialstats, synth
from .features import FeatureSet, aggregate_sets, append_composition
from .pipeline import PipelineStageError, parse_dims, parse_grid, parse_range
from .regression import SvrParams, save_model

__all__ = ["main", "build_parser"]


def _add_segment_args(p):
    p.add_argument("--segment", choices=("auto", "always", "never"),
                   default="auto", help="segment grayscale inputs "
                   "(auto: only when not already binary)")
    p.add_argument("--segment-h", type=float, default=10.0)
    p.add_argument("--segment-template", type=int, default=7)
    p.add_argument("--segment-search", type=int, default=21)
    p.add_argument("--segment-block", type=int, default=11)
    p.add_argument("--segment-offset", type=float, default=2.0)


def _add_model_args(p):
    p.add_argument("--model", choices=("lr", "pr", "svr"), default="pr")
    p.add_argument("--pc-grid", default=None,
                   help="PC counts to scan: 'a:b:s' or 'k1,k2,...'")
    p.add_argument("--standardize", action="store_true",
                   help="standardize features inside each training split")
    p.add_argument("--svr-kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--svr-c", type=float, default=10.0)
    p.add_argument("--svr-epsilon", type=float, default=None)
    p.add_argument("--svr-gamma", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micropred",
        description="two-point statistics features and property regression "
                    "for two-phase microstructure images")
    parser.add_argument("--config", help="run a configured pipeline")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a synthetic two-phase dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--dims", default="32", help="voxels per axis: N or NX,NY,NZ")
    p.add_argument("--vf", default="0.25:0.75", help="volume fraction range a:b")
    p.add_argument("--corr-len", default="1:4", help="correlation length range a:b")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--isotropic", action="store_true")
    p.add_argument("--write-volumes", action="store_true")

    p = sub.add_parser("preprocess", help="prepare manifest images for a backend")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--backend", choices=("none", "dinov2", "clip", "sam"),
                   default="none")
    p.add_argument("--patch", type=int, default=None)
    _add_segment_args(p)

    p = sub.add_parser("twopoint", help="two-point correlation features per image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True,
                   help="output directory for features_sec<i>.mpfv")
    p.add_argument("--kind", choices=("auto", "cross"), default="auto")
    p.add_argument("--boundary", choices=("periodic", "nonperiodic"),
                   default="periodic")
    p.add_argument("--crop", type=int, default=0,
                   help="center-crop the correlation map to this odd side")
    _add_segment_args(p)

    p = sub.add_parser("aggregate", help="combine per-section feature files")
    p.add_argument("inputs", nargs="+", help="per-section feature files")
    p.add_argument("--method", choices=("concat", "mean"), default="concat")
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="append manifest composition columns")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pca", help="fit a PCA basis and write diagnostics")
    p.add_argument("--features", required=True)
    p.add_argument("--components", type=int, default=None)
    p.add_argument("--scree", default=None, help="write scree CSV here")
    p.add_argument("--scores", default=None, help="write PC scores here")

    p = sub.add_parser("train", help="holdout protocol: split, tune k, test")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--report", default=None)
    p.add_argument("--parity", default=None)
    p.add_argument("--save-model", dest="save_model", default=None)
    _add_model_args(p)

    p = sub.add_parser("cv", help="nested cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.add_argument("--parity", default=None)
    _add_model_args(p)

    p = sub.add_parser("report", help="summarize a report JSON")
    p.add_argument("--in", dest="in_path", required=True)

    p = sub.add_parser("plot", help="render a parity CSV as SVG")
    p.add_argument("--parity", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=480)
    p.add_argument("--margin", type=int, default=56)
    return parser


def _segment_params(args) -> preprocess.SegmentParams:
    return preprocess.SegmentParams(
        denoise_h=args.segment_h, template=args.segment_template,
        search=args.segment_search, block=args.segment_block,
        offset=args.segment_offset)


def _svr_params(args) -> SvrParams:
    return SvrParams(kernel=args.svr_kernel, c=args.svr_c,
                     epsilon=args.svr_epsilon, gamma=args.svr_gamma)


def _targets_from_manifest(path) -> dict:
    samples = dataio.normalize_targets(dataio.load_manifest(path), "kgf_mm2")
    return {m.sample_id: m.target_value for m in samples}


def _cmd_synth(args) -> int:
    config = {
        "stages": "synth",
        "out": args.out,
        "seed": str(args.seed),
        "synth.count": str(args.count),
        "synth.dims": args.dims,
        "synth.vf": args.vf,
        "synth.corr_len": args.corr_len,
        "synth.isotropic": "true" if args.isotropic else "false",
        "synth.write_volumes": "true" if args.write_volumes else "false",
    }
    state = pipeline.run_pipeline(config)
    print(f"wrote {state['manifest']}")
    return 0


def _cmd_preprocess(args) -> int:
    backend = args.backend.upper()
    patch = args.patch if args.patch is not None else (16 if backend == "CLIP" else 14)
    spec = preprocess.PreprocessSpec(backend, patch)
    params = _segment_params(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    new_manifests = []
    for sample in dataio.load_manifest(args.manifest):
        out_paths = []
        for idx, p in enumerate(sample.image_paths, start=1):
            gray = preprocess.load_gray_image(p)
            binary = np.isin(gray.pixels, (0.0, 1.0)).all()
            if args.segment == "always" or (args.segment == "auto" and not binary):
                img = preprocess.segment(gray, params)
            elif binary:
                img = preprocess.phase_map_from_gray(gray)
            else:
                img = gray
            out_path = out_dir / f"{sample.sample_id}_{idx}.png"
            if backend == "NONE":
                if isinstance(img, preprocess.PhaseMap):
                    preprocess.save_phase_map(img, out_path)
                else:
                    preprocess.save_gray_image(img, out_path)
            else:
                preprocess.save_rgb_image(
                    preprocess.preprocess_for_backend(img, spec), out_path)
            out_paths.append(out_path)
        new_manifests.append(dataio.SampleManifest(
            sample.sample_id, tuple(out_paths), sample.target_value,
            sample.target_unit, sample.composition))
    manifest_path = out_dir / "manifest.csv"
    dataio.write_manifest(new_manifests, manifest_path)
    print(f"wrote {manifest_path}")
    return 0


def _cmd_twopoint(args) -> int:
    params = _segment_params(args)
    samples = dataio.load_manifest(args.manifest)
    if not samples:
        raise ValueError("empty manifest")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_sections = len(samples[0].image_paths)
    per_section = [[] for _ in range(n_sections)]
    for sample in samples:
        for idx, p in enumerate(sample.image_paths):
            gray = preprocess.load_gray_image(p)
            binary = np.isin(gray.pixels, (0.0, 1.0)).all()
            if args.segment == "always" or (args.segment == "auto" and not binary):
                pm = preprocess.segment(gray, params)
            else:
                pm = preprocess.phase_map_from_gray(gray)
            corr = spatialstats.two_point(pm, kind=args.kind,
                                          boundary=args.boundary)
            if args.crop:
                corr = spatialstats.center_crop_map(corr, args.crop)
            per_section[idx].append(
                spatialstats.vectorize(corr, sample.sample_id))
    for idx, vectors in enumerate(per_section, start=1):
        out = out_dir / f"features_sec{idx}.mpfv"
        dataio.write_features(FeatureSet.from_vectors(vectors), out)
        print(f"wrote {out}")
    return 0


def _cmd_aggregate(args) -> int:
    sets = [dataio.read_features(p) for p in args.inputs]
    dataio.write_features(aggregate_sets(sets, args.method), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_augment(args) -> int:
    fset = dataio.read_features(args.features)
    comp = {m.sample_id: m.composition
            for m in dataio.load_manifest(args.manifest)}
    missing = [sid for sid in fset.ids if comp.get(sid) is None]
    if missing:
        raise ValueError(f"manifest has no composition for sample {missing[0]!r}")
    vectors = [append_composition(fset.vector(sid), comp[sid])
               for sid in fset.ids]
    dataio.write_features(FeatureSet.from_vectors(vectors), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_pca(args) -> int:
    fset = dataio.read_features(args.features)
    cap = min(len(fset.ids) - 1, fset.dim)
    k = min(args.components or cap, cap)
    model = reduction.fit_pca(fset, k)
    for comp, ratio, cum in reduction.scree(model):
        print(f"PC{comp}: variance ratio {ratio:.6f}, cumulative {cum:.6f}")
    if args.scree:
        with open(args.scree, "w", encoding="utf-8") as fh:
            fh.write("component,variance_ratio,cumulative\n")
            for comp, ratio, cum in reduction.scree(model):
                fh.write(f"{comp},{ratio!r},{cum!r}\n")
        print(f"wrote {args.scree}")
    if args.scores:
        dataio.write_features(reduction.transform(model, fset), args.scores)
        print(f"wrote {args.scores}")
    return 0


def _cmd_train(args) -> int:
    fset = dataio.read_features(args.features)
    targets = _targets_from_manifest(args.manifest)
    grid = parse_grid(args.pc_grid) if args.pc_grid else None
    result = evaluation.evaluate_holdout(
        fset, targets, args.model, args.seed, pc_grid=grid,
        standardize=args.standardize, test_fraction=args.test_fraction,
        val_fraction=args.val_fraction, svr_params=_svr_params(args))
    print(f"best k: {result.best_k}")
    print(f"validation MAPE: {result.val_mape:.4f}%")
    print(f"test MAPE: {result.test_mape:.4f}%")
    for flag in result.grid.leakage:
        print(f"leakage: {flag}", file=sys.stderr)
    if args.report:
        evaluation.write_report(result, args.report)
        print(f"wrote {args.report}")
    if args.parity:
        evaluation.write_parity_csv(result.parity_rows, args.parity)
        print(f"wrote {args.parity}")
    if args.save_model:
        save_model(result.grid.model, args.save_model)
        print(f"wrote {args.save_model}")
    return 0


def _cmd_cv(args) -> int:
    fset = dataio.read_features(args.features)
    targets = _targets_from_manifest(args.manifest)
    grid = parse_grid(args.pc_grid) if args.pc_grid else None
    report = evaluation.nested_cv(
        fset, targets, args.model, folds=args.folds,
        inner_folds=args.inner_folds, pc_grid=grid, seed=args.seed,
        standardize=args.standardize, svr_params=_svr_params(args))
    for idx, fold in enumerate(report.folds):
        print(f"fold {idx}: k={fold.k} MAPE={fold.mape:.4f}%")
    print(f"mean MAPE: {report.mean:.4f}%  (std {report.std:.4f})")
    for flag in report.leakage:
        print(f"leakage: {flag}", file=sys.stderr)
    if args.report:
        evaluation.write_report(report, args.report)
        print(f"wrote {args.report}")
    if args.parity:
        rows = [(sid, t, p, "test") for sid, t, p, _f in report.predictions]
        evaluation.write_parity_csv(rows, args.parity)
        print(f"wrote {args.parity}")
    return 0


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.in_path).read_text(encoding="utf-8"))
    for key in ("model", "extractor_id", "protocol"):
        if key in doc:
            print(f"{key}: {doc[key]}")
    for idx, fold in enumerate(doc.get("folds", [])):
        print(f"fold {idx}: k={fold['k']} MAPE={fold['mape']:.4f}%")
    print(f"mean MAPE: {doc['mean']:.4f}%  (std {doc['std']:.4f})")
    for flag in doc.get("leakage", []):
        print(f"leakage: {flag}")
    return 0


def _cmd_plot(args) -> int:
    plots.render_parity_svg(args.parity, args.out, size=args.size,
                            margin=args.margin)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "twopoint": _cmd_twopoint,
    "aggregate": _cmd_aggregate,
    "augment": _cmd_augment,
    "pca": _cmd_pca,
    "train": _cmd_train,
    "cv": _cmd_cv,
    "report": _cmd_report,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command is None:
            if not args.config:
                parser.print_usage(sys.stderr)
                print("error: provide a subcommand or --config", file=sys.stderr)
                return 2
            state = pipeline.run_pipeline(args.config, seed=args.seed)
            for key in ("report_path", "parity_csv", "plot_path"):
                if key in state:
                    print(f"wrote {state[key]}")
            return 0
        return _COMMANDS[args.command](args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, dataio.FeatureFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
