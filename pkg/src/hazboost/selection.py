"""Hyperparameter selection and variable importance.

Cross-validation exploits that boosting is prefix-stable: one fit at the
largest tree count per (max_splits, fold) serves every smaller candidate,
with held-out risk read off along the boosting path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .boosting import BoostedHazardModel, fit, init_f0, split_records
from .data import DataError, Dataset
from .segments import build_arrays, risk_value
from .tree import evaluate_tree

log = logging.getLogger(__name__)


@dataclass
class CvReport:
    l_values: tuple[int, ...]
    m_values: tuple[int, ...]
    mean_risk: np.ndarray    # (len(l_values), len(m_values)); NaN when too few folds
    fold_risks: np.ndarray   # (len(l_values), len(m_values), k); NaN for skipped folds
    selected_l: int
    selected_m: int

    def csv_rows(self) -> list[list]:
        rows = [["max_splits", "num_trees", "mean_heldout_risk"]
                + [f"fold{f}" for f in range(self.fold_risks.shape[2])]]
        for i, l in enumerate(self.l_values):
            for j, m in enumerate(self.m_values):
                rows.append([l, m, self.mean_risk[i, j]] + list(self.fold_risks[i, j]))
        return rows


def heldout_risk_path(model: BoostedHazardModel, dataset: Dataset, m_values) -> list[float]:
    """Held-out likelihood risk after each requested number of trees."""
    wanted = sorted(set(int(m) for m in m_values))
    if wanted and wanted[-1] > model.num_trees:
        raise ValueError(f"model has {model.num_trees} trees, requested {wanted[-1]}")
    arrays = build_arrays(dataset, model.grid.time_cuts)
    f_seg = np.full(arrays.n_segments, model.f0)
    f_ev = np.full(arrays.n_events, model.f0)
    risks = {}
    if 0 in wanted:
        risks[0] = risk_value(arrays, f_seg, f_ev)
    for m, root in enumerate(model.trees, start=1):
        f_seg -= model.nu * evaluate_tree(root, arrays.seg_time, arrays.seg_values)
        f_ev -= model.nu * evaluate_tree(root, arrays.ev_time, arrays.ev_values)
        if m in wanted:
            risks[m] = risk_value(arrays, f_seg, f_ev)
    return [risks[m] for m in wanted]


def _fold_job(dataset, train_idx, test_idx, l, m_values, m_max, nu, num_quantiles,
              weighted_quantiles):
    train = dataset.subset(train_idx)
    test = dataset.subset(test_idx)
    model = fit(train, m_max, l, nu=nu, num_quantiles=num_quantiles,
                weighted_quantiles=weighted_quantiles)
    return heldout_risk_path(model, test, m_values)


def kfold_cv(dataset: Dataset, l_values=(1, 2, 3, 4), m_values=(100, 150, 200, 250, 300),
             k: int = 5, nu: float = 0.1, seed: int = 0, num_quantiles: int = 10,
             weighted_quantiles: bool = True, threads: int = 1) -> CvReport:
    """Grid search over (max_splits, num_trees) by K-fold cross-validation.

    Subjects (not epochs) are shuffled into folds with the given seed.
    The selected cell minimizes mean held-out likelihood risk; ties break
    to fewer splits, then fewer trees.  A fold whose training part has no
    events is skipped with a warning, and a cell needs at least k/2 valid
    folds to qualify.
    """
    l_values = tuple(sorted(set(int(l) for l in l_values)))
    m_values = tuple(sorted(set(int(m) for m in m_values)))
    if dataset.n < k:
        raise ValueError(f"need at least k={k} subjects, have {dataset.n}")
    if k < 2:
        raise ValueError("k must be at least 2")
    m_max = m_values[-1]

    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    folds = np.array_split(perm, k)

    fold_ok = []
    train_sets, test_sets = [], []
    for f in range(k):
        test_idx = np.sort(folds[f])
        train_idx = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        train_sets.append(train_idx)
        test_sets.append(test_idx)
        ok = any(dataset.samples[i].event for i in train_idx)
        if not ok:
            log.warning("fold %d skipped: training part has no events", f)
        fold_ok.append(ok)

    jobs = [(l, f) for l in l_values for f in range(k) if fold_ok[f]]
    runner = Parallel(n_jobs=threads) if threads != 1 else None
    work = [delayed(_fold_job)(dataset, train_sets[f], test_sets[f], l, m_values,
                               m_max, nu, num_quantiles, weighted_quantiles)
            for l, f in jobs]
    results = runner(work) if runner is not None else [w[0](*w[1], **w[2]) for w in work]

    fold_risks = np.full((len(l_values), len(m_values), k), np.nan)
    for (l, f), risks in zip(jobs, results):
        fold_risks[l_values.index(l), :, f] = risks
    valid = np.sum(~np.isnan(fold_risks), axis=2)
    with np.errstate(invalid="ignore"):
        mean_risk = np.where(valid >= k / 2, np.nanmean(fold_risks, axis=2), np.nan)

    best = None
    for i, l in enumerate(l_values):
        for j, m in enumerate(m_values):
            if math.isnan(mean_risk[i, j]):
                continue
            if best is None or mean_risk[i, j] < mean_risk[best]:
                best = (i, j)
    if best is None:
        raise DataError("cross-validation failed: no cell had enough valid folds")
    return CvReport(l_values, m_values, mean_risk, fold_risks,
                    l_values[best[0]], m_values[best[1]])


@dataclass
class ImportanceReport:
    """Per-variable risk-reduction totals; variable 0 is time."""

    variables: tuple[str, ...]
    raw: np.ndarray
    relative: np.ndarray           # scaled so the largest is 100
    all_zero: bool
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None

    def csv_rows(self) -> list[list]:
        header = ["variable", "importance", "relative"]
        if self.ci_low is not None:
            header += ["ci_low", "ci_high"]
        rows = [header]
        for i, name in enumerate(self.variables):
            row = [name, self.raw[i], self.relative[i]]
            if self.ci_low is not None:
                row += [self.ci_low[i], self.ci_high[i]]
            rows.append(row)
        return rows


def _importance_arrays(model: BoostedHazardModel) -> np.ndarray:
    raw = np.zeros(model.schema.p + 1)
    for records in split_records(model):
        for axis, score in records:
            raw[axis] -= score
    return raw


def variable_importance(model: BoostedHazardModel) -> ImportanceReport:
    """Total likelihood-risk reduction attributed to each split variable,
    scaled so the most important variable scores 100."""
    raw = _importance_arrays(model)
    top = raw.max()
    all_zero = not top > 0
    relative = np.zeros_like(raw) if all_zero else 100.0 * raw / top
    if all_zero:
        log.warning("model has no risk-reducing splits; importance undefined, reported as 0")
    names = ("time",) + model.schema.names
    return ImportanceReport(names, raw, relative, all_zero)


def _resample(dataset: Dataset, rng: np.random.Generator, max_retries: int) -> Dataset:
    for _ in range(max_retries):
        idx = rng.integers(0, dataset.n, size=dataset.n)
        sub = dataset.subset(idx)
        if sub.n_events > 0:
            return sub
    raise DataError(f"could not draw a bootstrap resample with events in {max_retries} tries")


def _bootstrap_job(dataset, seed, r, num_trees, max_splits, nu, num_quantiles,
                   weighted_quantiles, max_retries):
    rng = np.random.default_rng([seed, r])
    sub = _resample(dataset, rng, max_retries)
    model = fit(sub, num_trees, max_splits, nu=nu, num_quantiles=num_quantiles,
                weighted_quantiles=weighted_quantiles)
    return variable_importance(model).relative


def bootstrap_importance(dataset: Dataset, max_splits: int, num_trees: int,
                         nu: float = 0.1, b: int = 50, seed: int = 0,
                         num_quantiles: int = 10, weighted_quantiles: bool = True,
                         threads: int = 1, max_retries: int = 100) -> ImportanceReport:
    """Importance with percentile confidence intervals from subject-level
    bootstrap refits.  Point estimates come from the full-data fit; the
    2.5/97.5 percentiles of the relative scores across resamples give the
    intervals."""
    if b < 2:
        raise ValueError("b must be at least 2")
    base = variable_importance(fit(dataset, num_trees, max_splits, nu=nu,
                                   num_quantiles=num_quantiles,
                                   weighted_quantiles=weighted_quantiles))
    work = [delayed(_bootstrap_job)(dataset, seed, r, num_trees, max_splits, nu,
                                    num_quantiles, weighted_quantiles, max_retries)
            for r in range(b)]
    if threads != 1:
        rel = Parallel(n_jobs=threads)(work)
    else:
        rel = [w[0](*w[1], **w[2]) for w in work]
    rel = np.stack(rel)
    base.ci_low = np.percentile(rel, 2.5, axis=0)
    base.ci_high = np.percentile(rel, 97.5, axis=0)
    return base
