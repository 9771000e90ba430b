"""Config-driven end-to-end runs.

A pipeline config is a flat text file of `key = value` lines ('#' starts a
comment). `stages` lists the stage names to run in order; stage options are
namespaced with the stage name (`synth.count = 40`). Every artifact lands
under the `out` directory, and re-running an identical config produces
byte-identical reports.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dataio, evaluation, plots, preprocess, reduction, spatialstats, synth
from .dataio import SampleManifest
from .features import FeatureSet, aggregate_sets, append_composition
from .regression import SvrParams, save_model

__all__ = ["PipelineStageError", "parse_config", "load_config", "run_pipeline",
           "STAGES", "parse_grid", "parse_dims", "parse_range"]

STAGES = ("synth", "preprocess", "twopoint", "aggregate", "augment",
          "pca", "train", "cv", "report", "plot")


class PipelineStageError(RuntimeError):
    """A stage failed (or was unknown); the message names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


def parse_config(text: str) -> dict:
    """Flat key = value parser; later duplicates override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def parse_dims(text: str) -> tuple:
    parts = [int(p) for p in str(text).replace("x", ",").split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"expected 1 or 3 dims, got {text!r}")
    return tuple(parts)


def parse_range(text: str) -> tuple:
    lo, hi = (float(p) for p in str(text).split(":"))
    return lo, hi


def parse_grid(text: str):
    """PC grids: 'a:b:s' (inclusive of b when the step lands) or 'k1,k2,...'."""
    text = str(text).strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return tuple(range(start, stop + 1, step))
    return tuple(int(p) for p in text.split(","))


class _Options:
    """Typed access to one stage's namespaced config keys."""

    def __init__(self, config: dict, stage: str):
        self._config = config
        self._stage = stage

    def get(self, key: str, default=None):
        return self._config.get(f"{self._stage}.{key}", default)

    def str(self, key, default=None):
        v = self.get(key)
        return default if v is None else str(v)

    def int(self, key, default=None):
        v = self.get(key)
        return default if v is None else int(v)

    def float(self, key, default=None):
        v = self.get(key)
        return default if v is None else float(v)

    def bool(self, key, default=False):
        v = self.get(key)
        if v is None:
            return default
        if str(v).lower() in ("1", "true", "yes", "on"):
            return True
        if str(v).lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{self._stage}.{key}: expected a boolean, got {v!r}")


def _seed(config: dict, opts: _Options) -> int:
    return opts.int("seed", int(config.get("seed", 0)))


def _load_phase_maps(sample: SampleManifest, seg_mode: str,
                     params: preprocess.SegmentParams):
    maps = []
    for p in sample.image_paths:
        gray = preprocess.load_gray_image(p)
        binary = np.isin(gray.pixels, (0.0, 1.0)).all()
        if seg_mode == "always" or (seg_mode == "auto" and not binary):
            maps.append(preprocess.segment(gray, params))
        else:
            maps.append(preprocess.phase_map_from_gray(gray))
    return maps


def _segment_params(opts: _Options) -> preprocess.SegmentParams:
    return preprocess.SegmentParams(
        denoise_h=opts.float("segment_h", 10.0),
        template=opts.int("segment_template", 7),
        search=opts.int("segment_search", 21),
        block=opts.int("segment_block", 11),
        offset=opts.float("segment_offset", 2.0),
    )


def _targets(state: dict) -> dict:
    samples = state.get("samples")
    if not samples:
        raise ValueError("no manifest loaded; run synth or point the config "
                         "at one with `manifest = path`")
    normalized = dataio.normalize_targets(samples, "kgf_mm2")
    return {m.sample_id: m.target_value for m in normalized}


def _stage_synth(state, config, opts):
    workdir = state["workdir"]
    count = opts.int("count", 40)
    dims = parse_dims(opts.str("dims", "32"))
    vf_lo, vf_hi = parse_range(opts.str("vf", "0.25:0.75"))
    cl_lo, cl_hi = parse_range(opts.str("corr_len", "1:4"))
    seed = _seed(config, opts)
    data_dir = workdir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    triples = synth.gen_ensemble(count, dims, (vf_lo, vf_hi), (cl_lo, cl_hi),
                                 seed, anisotropic=not opts.bool("isotropic"))
    manifests = []
    for sid, vol, target in triples:
        sections = preprocess.extract_sections(vol)
        paths = []
        for axis, sec in zip("xyz", sections):
            img_path = data_dir / f"{sid}_{axis}.png"
            preprocess.save_phase_map(sec, img_path)
            paths.append(img_path)
        if opts.bool("write_volumes"):
            dataio.write_volume(vol, data_dir / f"{sid}.bin")
        manifests.append(SampleManifest(sid, tuple(paths), target,
                                        "dimensionless"))
    manifest_path = data_dir / "manifest.csv"
    dataio.write_manifest(manifests, manifest_path)
    state["manifest"] = manifest_path
    state["samples"] = dataio.load_manifest(manifest_path)


def _stage_preprocess(state, config, opts):
    workdir = state["workdir"]
    backend = opts.str("backend", "none").upper()
    patch = opts.int("patch", 16 if backend == "CLIP" else 14)
    spec = preprocess.PreprocessSpec(backend, patch)
    seg_mode = opts.str("segment", "auto")
    params = _segment_params(opts)
    out_dir = workdir / "preprocessed"
    out_dir.mkdir(parents=True, exist_ok=True)
    new_manifests = []
    for sample in state["samples"]:
        out_paths = []
        for idx, p in enumerate(sample.image_paths, start=1):
            gray = preprocess.load_gray_image(p)
            binary = np.isin(gray.pixels, (0.0, 1.0)).all()
            if seg_mode == "always" or (seg_mode == "auto" and not binary):
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
                rgb = preprocess.preprocess_for_backend(img, spec)
                preprocess.save_rgb_image(rgb, out_path)
            out_paths.append(out_path)
        new_manifests.append(SampleManifest(
            sample.sample_id, tuple(out_paths), sample.target_value,
            sample.target_unit, sample.composition))
    manifest_path = out_dir / "manifest.csv"
    dataio.write_manifest(new_manifests, manifest_path)
    state["manifest"] = manifest_path
    state["samples"] = dataio.load_manifest(manifest_path)


def _stage_twopoint(state, config, opts):
    workdir = state["workdir"]
    source = opts.str("source")
    if source:
        # ingest externally computed features (e.g. a pretrained-network
        # extractor); one file, or a comma list of per-section files
        paths = [Path(p.strip()) for p in source.split(",")]
        state["section_sets"] = [dataio.read_features(p) for p in paths]
        return
    kind = opts.str("kind", "auto")
    boundary = opts.str("boundary", "periodic")
    crop = opts.int("crop", 0)
    seg_mode = opts.str("segment", "auto")
    params = _segment_params(opts)
    samples = state["samples"]
    if not samples:
        raise ValueError("no samples to featurize")
    n_sections = len(samples[0].image_paths)
    per_section = [[] for _ in range(n_sections)]
    for sample in samples:
        maps = _load_phase_maps(sample, seg_mode, params)
        if len(maps) != n_sections:
            raise ValueError(f"sample {sample.sample_id!r} has "
                             f"{len(maps)} images, expected {n_sections}")
        for idx, pm in enumerate(maps):
            corr = spatialstats.two_point(pm, kind=kind, boundary=boundary)
            if crop:
                corr = spatialstats.center_crop_map(corr, crop)
            per_section[idx].append(
                spatialstats.vectorize(corr, sample.sample_id))
    sets = [FeatureSet.from_vectors(vectors) for vectors in per_section]
    for idx, fset in enumerate(sets, start=1):
        dataio.write_features(fset, workdir / f"features_sec{idx}.mpfv")
    state["section_sets"] = sets


def _stage_aggregate(state, config, opts):
    method = opts.str("method", "concat")
    sets = state.get("section_sets")
    if not sets:
        raise ValueError("no per-section features; run twopoint first")
    fset = aggregate_sets(sets, method)
    out = state["workdir"] / "features.mpfv"
    dataio.write_features(fset, out)
    state["features"] = fset
    state["features_path"] = out


def _stage_augment(state, config, opts):
    fset = state.get("features")
    if fset is None:
        raise ValueError("no aggregated features; run aggregate first")
    if opts.bool("composition", True):
        comp = {m.sample_id: m.composition for m in state["samples"]}
        missing = [sid for sid in fset.ids if comp.get(sid) is None]
        if missing:
            raise ValueError(f"manifest has no composition for sample "
                             f"{missing[0]!r}")
        vectors = [append_composition(fset.vector(sid), comp[sid])
                   for sid in fset.ids]
        fset = FeatureSet.from_vectors(vectors)
        out = state["workdir"] / "features_augmented.mpfv"
        dataio.write_features(fset, out)
        state["features"] = fset
        state["features_path"] = out
    if opts.bool("standardize", True):
        # deferred: standardizers are fit per training split in train/cv
        state["standardize"] = True


def _stage_pca(state, config, opts):
    fset = state.get("features")
    if fset is None:
        raise ValueError("no aggregated features; run aggregate first")
    cap = min(len(fset.ids) - 1, fset.dim)
    k = min(opts.int("components", cap), cap)
    model = reduction.fit_pca(fset, k)
    rows = reduction.scree(model)
    scree_path = state["workdir"] / "scree.csv"
    with open(scree_path, "w", encoding="utf-8") as fh:
        fh.write("component,variance_ratio,cumulative\n")
        for comp, ratio, cum in rows:
            fh.write(f"{comp},{ratio!r},{cum!r}\n")
    if opts.bool("scores"):
        scores = reduction.transform(model, fset)
        dataio.write_features(scores, state["workdir"] / "scores.mpfv")
    state["pca"] = model


def _svr_params(opts: _Options) -> SvrParams:
    return SvrParams(
        kernel=opts.str("svr_kernel", "rbf"),
        c=opts.float("svr_c", 10.0),
        epsilon=opts.float("svr_epsilon"),
        gamma=opts.float("svr_gamma"),
        tol=opts.float("svr_tol", 1e-3),
        max_iter=opts.int("svr_max_iter", 200_000),
    )


def _stage_train(state, config, opts):
    fset = state.get("features")
    if fset is None:
        raise ValueError("no aggregated features; run aggregate first")
    targets = _targets(state)
    grid = parse_grid(opts.str("pc_grid")) if opts.get("pc_grid") else None
    result = evaluation.evaluate_holdout(
        fset, targets, opts.str("model", "pr"), _seed(config, opts),
        pc_grid=grid,
        standardize=opts.bool("standardize", state.get("standardize", False)),
        test_fraction=opts.float("test_fraction", 0.1),
        val_fraction=opts.float("val_fraction", 0.2),
        svr_params=_svr_params(opts))
    save_model(result.grid.model, state["workdir"] / "model.json")
    parity_path = state["workdir"] / "parity.csv"
    evaluation.write_parity_csv(result.parity_rows, parity_path)
    state["report"] = result
    state["parity_csv"] = parity_path


def _stage_cv(state, config, opts):
    fset = state.get("features")
    if fset is None:
        raise ValueError("no aggregated features; run aggregate first")
    targets = _targets(state)
    grid = parse_grid(opts.str("pc_grid")) if opts.get("pc_grid") else None
    report = evaluation.nested_cv(
        fset, targets, opts.str("model", "pr"),
        folds=opts.int("folds", 10), inner_folds=opts.int("inner_folds", 5),
        pc_grid=grid, seed=_seed(config, opts),
        standardize=opts.bool("standardize", state.get("standardize", False)),
        svr_params=_svr_params(opts))
    parity_path = state["workdir"] / "parity.csv"
    rows = [(sid, truth, pred, "test")
            for sid, truth, pred, _fold in report.predictions]
    evaluation.write_parity_csv(rows, parity_path)
    state["report"] = report
    state["parity_csv"] = parity_path


def _stage_report(state, config, opts):
    report = state.get("report")
    if report is None:
        raise ValueError("nothing to report; run train or cv first")
    out = Path(opts.str("out", state["workdir"] / "report.json"))
    evaluation.write_report(report, out)
    state["report_path"] = out


def _stage_plot(state, config, opts):
    parity = opts.str("parity", state.get("parity_csv"))
    if parity is None:
        raise ValueError("no parity data; run train or cv first")
    out = Path(opts.str("out", state["workdir"] / "parity.svg"))
    plots.render_parity_svg(parity, out, size=opts.int("size", 480),
                            margin=opts.int("margin", 56))
    state["plot_path"] = out


_STAGE_FNS = {
    "synth": _stage_synth,
    "preprocess": _stage_preprocess,
    "twopoint": _stage_twopoint,
    "aggregate": _stage_aggregate,
    "augment": _stage_augment,
    "pca": _stage_pca,
    "train": _stage_train,
    "cv": _stage_cv,
    "report": _stage_report,
    "plot": _stage_plot,
}


def run_pipeline(config, seed=None) -> dict:
    """Run the configured stages in order; returns the final state dict.

    `config` is a path or an already-parsed dict. A failing stage raises
    PipelineStageError naming that stage, chained to the original error.
    """
    if not isinstance(config, dict):
        config = load_config(config)
    if seed is not None:
        config = dict(config, seed=str(seed))
    stage_list = [s.strip() for s in config.get("stages", "").split(",")
                  if s.strip()]
    if not stage_list:
        raise ValueError("config declares no stages")
    workdir = Path(config.get("out", ".")).resolve()
    workdir.mkdir(parents=True, exist_ok=True)
    state = {"workdir": workdir}
    if "manifest" in config:
        state["manifest"] = Path(config["manifest"])
        state["samples"] = dataio.load_manifest(state["manifest"])
    for stage in stage_list:
        fn = _STAGE_FNS.get(stage)
        if fn is None:
            raise PipelineStageError(stage, "unknown pipeline stage")
        try:
            fn(state, config, _Options(config, stage))
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(stage, str(exc)) from exc
    return state
