"""Split plans, model selection, nested cross-validation, and reporting.

Every fit of a PCA basis or a standardizer happens strictly inside the
training portion of whatever split is active; an optional fit log records
(stage, fold, sample ids, mean vector) for each such fit so tests can verify
the discipline. Nested CV also scans for duplicate feature vectors that span
outer folds and reports them as leakage flags rather than silently dropping
anything.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureSet, fit_standardizer, Standardizer
from .reduction import fit_pca, PCAModel
from . import regression
from .regression import SvrParams

__all__ = [
    "mape",
    "SplitPlan",
    "holdout_split",
    "kfold_ids",
    "GridResult",
    "grid_search_pcs",
    "train_model",
    "FoldResult",
    "CVReport",
    "nested_cv",
    "evaluate_holdout",
    "HoldoutResult",
    "report_to_json",
    "write_report",
    "write_parity_csv",
    "read_parity_csv",
    "DEFAULT_PC_GRID",
]

DEFAULT_PC_GRID = tuple(range(2, 61, 2))


def mape(y_true, y_pred) -> float:
    """Mean absolute percentage error, in percent. Requires |y_true| > 0."""
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y_true.size != y_pred.size:
        raise ValueError("length mismatch")
    if y_true.size == 0:
        raise ValueError("empty input")
    if np.any(y_true == 0):
        raise ValueError("MAPE undefined for zero targets")
    return float(100.0 * np.mean(np.abs((y_true - y_pred) / y_true)))


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple
    val_ids: tuple
    test_ids: tuple

    def __post_init__(self):
        all_ids = self.train_ids + self.val_ids + self.test_ids
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("split subsets overlap")


def holdout_split(ids: Sequence[str], seed: int = 0,
                  test_fraction: float = 0.1,
                  val_fraction: float = 0.2) -> SplitPlan:
    """Shuffle ids, carve off floor(test_fraction * n) for test, then
    floor(val_fraction * remainder) for validation; the rest trains.
    """
    ids = list(ids)
    n = len(ids)
    if n < 3:
        raise ValueError("need at least 3 samples to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(n * test_fraction)
    n_val = int((n - n_test) * val_fraction)
    test = tuple(ids[i] for i in perm[:n_test])
    val = tuple(ids[i] for i in perm[n_test:n_test + n_val])
    train = tuple(ids[i] for i in perm[n_test + n_val:])
    if not train or not val or not test:
        raise ValueError("split fractions leave an empty subset")
    return SplitPlan(train, val, test)


def kfold_ids(ids: Sequence[str], folds: int, seed: int = 0) -> list:
    """Deterministic shuffled k-fold partition of ids (sizes differ by <= 1)."""
    ids = list(ids)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(ids):
        raise ValueError("more folds than samples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    return [tuple(ids[i] for i in chunk) for chunk in np.array_split(perm, folds)]


def _aligned_targets(fset: FeatureSet, targets) -> np.ndarray:
    if isinstance(targets, Mapping):
        missing = [sid for sid in fset.ids if sid not in targets]
        if missing:
            raise KeyError(f"no target for sample '{missing[0]}'")
        y = np.array([float(targets[sid]) for sid in fset.ids])
    else:
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        if y.size != len(fset.ids):
            raise ValueError("target length does not match feature set")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite target")
    return y


def train_model(model_type: str, x, y, svr_params: SvrParams | None = None):
    if model_type == "lr":
        return regression.fit_lr(x, y)
    if model_type == "pr":
        return regression.fit_pr(x, y)
    if model_type == "svr":
        return regression.fit_svr(x, y, svr_params or SvrParams())
    raise ValueError(f"unknown model type {model_type!r}")


def _log_fit(fit_log, stage, fold, ids, mean):
    if fit_log is not None:
        fit_log.append({"stage": stage, "fold": fold, "ids": tuple(ids),
                        "mean": np.array(mean, copy=True)})


def _fit_transforms(train_set: FeatureSet, k: int, standardize: bool,
                    fit_log, fold):
    """Fit standardizer (optional) then PCA on the training set only."""
    work = train_set
    scaler = None
    if standardize:
        scaler = fit_standardizer(work)
        _log_fit(fit_log, "standardizer", fold, work.ids, scaler.means)
        work = _apply_scaler(work, scaler)
    pca = fit_pca(work, k)
    _log_fit(fit_log, "pca", fold, work.ids, pca.mean)
    return scaler, pca, _transform_matrix(work, scaler=None, pca=pca)


def _apply_scaler(fset: FeatureSet, scaler: Standardizer) -> FeatureSet:
    mat = (fset.matrix - scaler.means) / np.where(scaler.stds > 0, scaler.stds, 1.0)
    mat[:, scaler.stds == 0] = 0.0
    return fset.with_matrix(mat, fset.extractor_id)


def _transform_matrix(fset: FeatureSet, scaler, pca: PCAModel) -> np.ndarray:
    mat = fset.matrix
    if scaler is not None:
        mat = (mat - scaler.means) / np.where(scaler.stds > 0, scaler.stds, 1.0)
        mat[:, scaler.stds == 0] = 0.0
    return (mat - pca.mean) @ pca.components.T


def _feasible_grid(pc_grid, n_train, dim):
    cap = min(n_train - 1, dim)
    grid = sorted({int(k) for k in pc_grid if 1 <= int(k) <= cap})
    return grid if grid else [cap]


def _duplicate_flags(fset: FeatureSet, assignment: Mapping) -> list:
    """Flag identical feature vectors whose ids sit in different subsets."""
    groups = {}
    for idx, sid in enumerate(fset.ids):
        groups.setdefault(fset.matrix[idx].tobytes(), []).append(sid)
    flags = []
    for members in groups.values():
        subsets = sorted({str(assignment[sid]) for sid in members})
        if len(subsets) > 1:
            flags.append("duplicate feature vectors span subsets "
                         f"{subsets}: samples {sorted(members)}")
    return sorted(flags)


@dataclass(frozen=True)
class GridResult:
    best_k: int
    scores: tuple          # ((k, val_mape), ...) in grid order
    model: object
    scaler: object
    pca: PCAModel
    val_mape: float
    leakage: tuple = ()


def grid_search_pcs(train, val, model_type: str = "pr", pc_grid=None,
                    standardize: bool = False,
                    svr_params: SvrParams | None = None,
                    fit_log=None) -> GridResult:
    """Pick the PC count minimizing validation MAPE (ties go to the smallest k).

    `train` and `val` are (FeatureSet, targets) pairs; targets may be a
    mapping keyed by sample id or an aligned array. All transforms are fit
    on the training pair only.
    """
    train_set, train_targets = train
    val_set, val_targets = val
    y_train = _aligned_targets(train_set, train_targets)
    y_val = _aligned_targets(val_set, val_targets)
    grid = _feasible_grid(pc_grid or DEFAULT_PC_GRID,
                          len(train_set.ids), train_set.dim)

    assignment = {sid: "train" for sid in train_set.ids}
    assignment.update({sid: "val" for sid in val_set.ids})
    merged = FeatureSet(train_set.ids + val_set.ids,
                        np.concatenate([train_set.matrix, val_set.matrix]),
                        train_set.extractor_id)
    leakage = _duplicate_flags(merged, assignment)

    k_max = max(grid)
    scaler, pca_full, _ = _fit_transforms(train_set, k_max, standardize,
                                          fit_log, fold=None)
    z_train_full = _transform_matrix(train_set, scaler, pca_full)
    z_val_full = _transform_matrix(val_set, scaler, pca_full)

    scores = []
    best = None
    for k in grid:
        model_k = train_model(model_type, z_train_full[:, :k], y_train, svr_params)
        err = mape(y_val, regression.predict(model_k, z_val_full[:, :k]))
        scores.append((k, err))
        if best is None or err < best[1]:
            best = (k, err, model_k)
    best_k, best_err, best_model = best
    pca = fit_pca(_apply_scaler(train_set, scaler) if scaler else train_set, best_k)
    return GridResult(best_k, tuple(scores), best_model, scaler, pca,
                      best_err, tuple(leakage))


@dataclass(frozen=True)
class FoldResult:
    k: int
    mape: float


@dataclass(frozen=True)
class CVReport:
    model: str
    extractor_id: str
    folds: tuple           # FoldResult per outer fold
    mean: float
    std: float
    loo_std: tuple
    leakage: tuple
    seed: int
    predictions: tuple = ()   # (sample_id, truth, prediction, outer_fold)


def nested_cv(features: FeatureSet, targets, model_type: str = "pr",
              folds: int = 10, inner_folds: int = 5, pc_grid=None,
              seed: int = 0, standardize: bool = False,
              svr_params: SvrParams | None = None,
              fit_log=None) -> CVReport:
    """Nested k-fold CV: inner CV on each outer-train block picks the PC
    count, the refit model is scored on the held-out outer fold. Returns
    per-fold (k, MAPE), their mean/std (population std), a leave-one-fold-out
    std diagnostic, and any duplicate-vector leakage flags.
    """
    y_all = _aligned_targets(features, targets)
    target_map = dict(zip(features.ids, y_all))
    fold_ids = kfold_ids(features.ids, folds, seed)

    assignment = {}
    for f_idx, chunk in enumerate(fold_ids):
        for sid in chunk:
            assignment[sid] = f_idx
    leakage = _duplicate_flags(features, assignment)

    grid = pc_grid or DEFAULT_PC_GRID
    results = []
    predictions = []
    for f_idx, test_chunk in enumerate(fold_ids):
        test_set = features.subset(test_chunk)
        train_ids = [sid for sid in features.ids if sid not in set(test_chunk)]
        train_set = features.subset(train_ids)
        y_train = _aligned_targets(train_set, target_map)

        inner_chunks = kfold_ids(train_ids, inner_folds, seed=[seed, f_idx])
        inner_grid = None
        inner_scores = {}
        for inner_chunk in inner_chunks:
            inner_val = train_set.subset(inner_chunk)
            inner_train_ids = [sid for sid in train_ids
                               if sid not in set(inner_chunk)]
            inner_train = train_set.subset(inner_train_ids)
            feasible = _feasible_grid(grid, len(inner_train_ids), features.dim)
            inner_grid = feasible if inner_grid is None else \
                [k for k in inner_grid if k in set(feasible)]
            scaler, pca_full, _ = _fit_transforms(
                inner_train, max(feasible), standardize, fit_log, fold=f_idx)
            z_tr = _transform_matrix(inner_train, scaler, pca_full)
            z_va = _transform_matrix(inner_val, scaler, pca_full)
            y_tr = _aligned_targets(inner_train, target_map)
            y_va = _aligned_targets(inner_val, target_map)
            for k in feasible:
                model_k = train_model(model_type, z_tr[:, :k], y_tr, svr_params)
                err = mape(y_va, regression.predict(model_k, z_va[:, :k]))
                inner_scores.setdefault(k, []).append(err)

        usable = inner_grid or sorted(inner_scores)
        mean_scores = [(k, float(np.mean(inner_scores[k]))) for k in usable]
        best_k = min(mean_scores, key=lambda kv: (kv[1], kv[0]))[0]
        best_k = min(best_k, len(train_ids) - 1, features.dim)

        scaler, pca, z_train = _fit_transforms(train_set, best_k, standardize,
                                               fit_log, fold=f_idx)
        model = train_model(model_type, z_train, y_train, svr_params)
        z_test = _transform_matrix(test_set, scaler, pca)
        y_test = _aligned_targets(test_set, target_map)
        y_hat = regression.predict(model, z_test)
        results.append(FoldResult(best_k, mape(y_test, y_hat)))
        predictions.extend((sid, float(t), float(p), f_idx)
                           for sid, t, p in zip(test_set.ids, y_test, y_hat))

    mapes = np.array([r.mape for r in results])
    loo = tuple(float(np.std(np.delete(mapes, i))) for i in range(len(mapes)))
    return CVReport(model_type, features.extractor_id, tuple(results),
                    float(np.mean(mapes)), float(np.std(mapes)), loo,
                    tuple(leakage), seed, tuple(predictions))


@dataclass(frozen=True)
class HoldoutResult:
    model: str
    extractor_id: str
    best_k: int
    val_mape: float
    test_mape: float
    plan: SplitPlan
    grid: GridResult
    seed: int
    parity_rows: tuple     # (sample_id, truth, prediction, subset)


def evaluate_holdout(features: FeatureSet, targets, model_type: str = "pr",
                     seed: int = 0, pc_grid=None, standardize: bool = False,
                     test_fraction: float = 0.1, val_fraction: float = 0.2,
                     svr_params: SvrParams | None = None,
                     fit_log=None) -> HoldoutResult:
    """Holdout protocol: shuffle split, grid-search the PC count on the
    validation subset, then score the train-fit model on the test subset.
    """
    y_map = dict(zip(features.ids, _aligned_targets(features, targets)))
    plan = holdout_split(features.ids, seed, test_fraction, val_fraction)
    train_set = features.subset(plan.train_ids)
    val_set = features.subset(plan.val_ids)
    test_set = features.subset(plan.test_ids)

    grid = grid_search_pcs((train_set, y_map), (val_set, y_map), model_type,
                           pc_grid, standardize, svr_params, fit_log)

    rows = []
    for subset, fset in (("train", train_set), ("val", val_set),
                         ("test", test_set)):
        z = _transform_matrix(fset, grid.scaler, grid.pca)
        y_hat = regression.predict(grid.model, z)
        rows.extend((sid, float(y_map[sid]), float(p), subset)
                    for sid, p in zip(fset.ids, y_hat))
    test_rows = [r for r in rows if r[3] == "test"]
    test_mape = mape([r[1] for r in test_rows], [r[2] for r in test_rows])
    return HoldoutResult(model_type, features.extractor_id, grid.best_k,
                         grid.val_mape, test_mape, plan, grid, seed,
                         tuple(rows))


def report_to_json(report) -> str:
    """Canonical JSON text for a CV or holdout report (sorted keys, repr floats)."""
    if isinstance(report, CVReport):
        doc = {
            "model": report.model,
            "extractor_id": report.extractor_id,
            "protocol": "nested_cv",
            "folds": [{"k": r.k, "mape": r.mape} for r in report.folds],
            "mean": report.mean,
            "std": report.std,
            "loo_std": list(report.loo_std),
            "leakage": list(report.leakage),
            "seed": report.seed,
        }
    elif isinstance(report, HoldoutResult):
        doc = {
            "model": report.model,
            "extractor_id": report.extractor_id,
            "protocol": "holdout",
            "folds": [{"k": report.best_k, "mape": report.test_mape}],
            "mean": report.test_mape,
            "std": 0.0,
            "val_mape": report.val_mape,
            "best_k": report.best_k,
            "counts": {"train": len(report.plan.train_ids),
                       "val": len(report.plan.val_ids),
                       "test": len(report.plan.test_ids)},
            "leakage": list(report.grid.leakage),
            "seed": report.seed,
        }
    else:
        raise TypeError(f"unknown report type {type(report).__name__}")
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_report(report, path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def write_parity_csv(rows, path) -> None:
    """Rows of (sample_id, truth, prediction, subset); floats via repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "truth", "prediction", "subset"])
        for sid, truth, pred, subset in rows:
            writer.writerow([sid, repr(float(truth)), repr(float(pred)),
                             str(subset)])


def read_parity_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "truth", "prediction", "subset"]:
            raise ValueError("not a parity file")
        return [(sid, float(truth), float(pred), subset)
                for sid, truth, pred, subset in reader]
