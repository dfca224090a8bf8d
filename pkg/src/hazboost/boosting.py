"""Boosted hazard model: ensemble loop, risk evaluation, prediction, model I/O.

The fitted log-hazard is ``f0 - nu * sum_m g_m(t, x)`` where each ``g_m``
is a regression tree grown by :mod:`hazboost.tree`; the hazard estimate is
its exponential.  Every integral of the piecewise-constant hazard along a
trajectory is an exact finite sum; there is no quadrature anywhere in the
fit or in prediction.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, Dataset, FunctionalSample, Schema, Column, CATEGORICAL, validate
from .grid import SplitCandidateGrid, build_grid
from .segments import build_arrays, risk_value
from .tree import (SearchIndex, TreeNode, evaluate_tree, grow_on_arrays,
                   tree_from_lines, tree_splits, tree_to_lines)

log = logging.getLogger(__name__)

_MODEL_MAGIC = "hazboost-model v1"


@dataclass
class BoostedHazardModel:
    """Fitted ensemble: baseline log-hazard, learning rate, ordered trees."""

    schema: Schema
    grid: SplitCandidateGrid
    f0: float
    nu: float
    trees: list[TreeNode]
    max_splits: int
    risk_trace: list[float] = field(default_factory=list)

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def predict_log_hazard(self, t, x) -> np.ndarray:
        """Log-hazard at encoded points; ``t`` shape (N,), ``x`` (N, p)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(t.shape, self.f0)
        for root in self.trees:
            out -= self.nu * evaluate_tree(root, t, x)
        return out

    def log_hazard_callable(self):
        """Scalar ``(t, x) -> log-hazard`` view of the ensemble."""
        return lambda t, x: float(self.predict_log_hazard([t], [x])[0])


def encode_point(schema: Schema, x) -> np.ndarray:
    """Encode one covariate row that may carry raw categorical labels."""
    if len(x) != schema.p:
        raise DataError(f"expected {schema.p} covariate values, got {len(x)}")
    out = np.empty(schema.p)
    for j, val in enumerate(x):
        if isinstance(val, str):
            out[j] = schema.encode(j, val)
        elif schema.is_categorical(j):
            nlab = len(schema.columns[j].labels)
            if float(val) != int(val) or not 0 <= int(val) < nlab:
                raise DataError(f"column {schema.columns[j].name!r}: unknown categorical code {val!r}")
            out[j] = float(val)
        else:
            out[j] = float(val)
    return out


def init_f0(dataset: Dataset) -> float:
    """Best constant log-hazard: log(total events / total at-risk time)."""
    n_events = dataset.n_events
    if n_events == 0:
        raise DataError("no observed events; baseline log-hazard undefined")
    total_time = math.fsum(s.followup for s in dataset.samples)
    return math.log(n_events / total_time)


def likelihood_risk(log_hazard, dataset: Dataset, time_cuts=()) -> float:
    """Exact likelihood risk of a piecewise-constant log-hazard.

    Average over subjects of the integrated hazard along the trajectory
    minus the event-time log-hazard for subjects with an observed event.
    ``log_hazard(t, x)`` must be constant in time between consecutive
    ``time_cuts`` (and epoch boundaries); evaluated at right endpoints.
    """
    cuts = np.asarray(time_cuts, dtype=float).ravel()
    terms = []
    for s in dataset.samples:
        for e in s.epochs:
            inner = cuts[(cuts > e.start) & (cuts < e.end)]
            bounds = np.concatenate([[e.start], inner, [e.end]])
            for a, b in zip(bounds[:-1], bounds[1:]):
                terms.append(math.exp(log_hazard(b, e.values)) * (b - a))
        if s.event:
            terms.append(-log_hazard(s.followup, s.epochs[-1].values))
    return math.fsum(terms) / dataset.n


def fit(dataset: Dataset, num_trees: int, max_splits: int, nu: float = 0.1,
        grid: SplitCandidateGrid | None = None, num_quantiles: int = 10,
        weighted_quantiles: bool = True) -> BoostedHazardModel:
    """Fit the boosted hazard model.

    The dataset must be validated and have terminal jumps imputed.  The
    fit is deterministic: identical inputs give identical models.  A tree
    whose first split has no admissible risk reduction contributes nothing
    (logged) and boosting continues; training risk is recorded after every
    iteration and checked to be non-increasing.
    """
    if num_trees < 1:
        raise ValueError("num_trees must be at least 1")
    if max_splits < 1:
        raise ValueError("max_splits must be at least 1")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    report = validate(dataset)
    if not report.ok:
        raise DataError("invalid dataset:\n" + str(report))

    if grid is None:
        grid = build_grid(dataset, num_quantiles=num_quantiles, weighted=weighted_quantiles)
    arrays = build_arrays(dataset, grid.time_cuts)
    index = SearchIndex(arrays, dataset.schema, grid)
    f0 = init_f0(dataset)
    f_seg = np.full(arrays.n_segments, f0)
    f_ev = np.full(arrays.n_events, f0)

    risk_trace = [risk_value(arrays, f_seg, f_ev)]
    trees: list[TreeNode] = []
    for m in range(num_trees):
        seg_w = arrays.seg_duration * np.exp(f_seg) / arrays.n_subjects
        grown = grow_on_arrays(arrays, seg_w, dataset.schema, grid, max_splits,
                               index=index)
        trees.append(grown.root)
        if grown.is_zero:
            log.info("iteration %d: no admissible split, tree contributes nothing", m)
        else:
            f_seg -= nu * grown.seg_values
            f_ev -= nu * grown.ev_values
        risk = risk_value(arrays, f_seg, f_ev)
        if risk > risk_trace[-1] + 1e-9 * max(1.0, abs(risk_trace[-1])):
            raise RuntimeError(
                f"training risk increased at iteration {m}: {risk_trace[-1]} -> {risk}")
        risk_trace.append(risk)

    return BoostedHazardModel(dataset.schema, grid, f0, nu, trees, max_splits, risk_trace)


def predict_hazard(model: BoostedHazardModel, t, x):
    """Hazard at one point (raw labels allowed) or a batch of encoded rows.

    Scalar ``t`` with a single covariate row returns a float; array ``t``
    with a 2D encoded ``x`` returns an array.
    """
    if np.ndim(t) == 0:
        row = encode_point(model.schema, x)
        return float(np.exp(model.predict_log_hazard([float(t)], row[None, :]))[0])
    return np.exp(model.predict_log_hazard(t, x))


def predict_survival(model: BoostedHazardModel, sample: FunctionalSample, t: float) -> float:
    """Survival probability at ``t`` along the sample's own trajectory:
    exp of minus the integrated hazard, computed exactly."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    if sample.epochs[-1].end < t:
        raise ValueError(f"trajectory does not reach t={t}")
    cuts = model.grid.time_cuts
    total = 0.0
    for e in sample.epochs:
        if e.start >= t:
            break
        hi = min(e.end, t)
        inner = cuts[(cuts > e.start) & (cuts < hi)]
        bounds = np.concatenate([[e.start], inner, [hi]])
        lam = np.exp(model.predict_log_hazard(bounds[1:], np.tile(e.values, (bounds.size - 1, 1))))
        total += float(np.sum(np.diff(bounds) * lam))
    return math.exp(-total)


def cumulative_hazard_matrix(model: BoostedHazardModel, dataset: Dataset, times) -> np.ndarray:
    """Integrated predicted hazard for every subject at each time.

    Trajectories shorter than max(times) are extended by carrying the last
    observation forward.  Returns shape (n_subjects, len(times)).
    """
    times = np.asarray(times, dtype=float)
    arrays = build_arrays(dataset, model.grid.time_cuts, extend_to=float(times.max()),
                          extra_cuts=times)
    lam = np.exp(model.predict_log_hazard(arrays.seg_time, arrays.seg_values))
    mass = arrays.seg_duration * lam
    out = np.empty((dataset.n, times.size))
    for k, t in enumerate(times):
        sel = arrays.seg_time <= t
        out[:, k] = np.bincount(arrays.seg_subject[sel], weights=mass[sel],
                                minlength=dataset.n)
    return out


def _grid_hash(grid: SplitCandidateGrid) -> str:
    return hashlib.sha256(grid.dump().encode()).hexdigest()[:16]


def save_model(model: BoostedHazardModel, path) -> None:
    """Write the text model file (header, grid, risk trace, trees)."""
    lines = [_MODEL_MAGIC, f"p {model.schema.p}"]
    for j, col in enumerate(model.schema.columns):
        lines.append(f"column {j} {col.kind} {col.name}")
        if col.kind == CATEGORICAL:
            for lab in col.labels:
                lines.append(f"label {j} {lab}")
    lines.append(f"f0 {repr(float(model.f0))}")
    lines.append(f"nu {repr(float(model.nu))}")
    lines.append(f"num_trees {model.num_trees}")
    lines.append(f"max_splits {model.max_splits}")
    lines.append(f"num_quantiles {model.grid.num_quantiles}")
    lines.append(f"weighted_quantiles {int(model.grid.weighted)}")
    lines.append(f"grid_hash {_grid_hash(model.grid)}")
    lines.append("time_cuts " + " ".join(repr(float(c)) for c in model.grid.time_cuts))
    for j, cuts in enumerate(model.grid.covariate_cuts):
        if isinstance(cuts, np.ndarray):
            lines.append(f"cuts {j} " + " ".join(repr(float(c)) for c in cuts))
    lines.append("risk_trace " + " ".join(repr(float(r)) for r in model.risk_trace))
    for root in model.trees:
        lines.append("tree")
        lines.extend(tree_to_lines(root))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> BoostedHazardModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MODEL_MAGIC:
        raise DataError(f"{path}: not a model file")
    pos = 1

    def take(keyword: str) -> str:
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(keyword + " "):
            raise DataError(f"{path}: expected {keyword!r} at line {pos + 1}")
        value = lines[pos][len(keyword) + 1:]
        pos += 1
        return value

    p = int(take("p"))
    columns: list[Column] = []
    for j in range(p):
        head = take("column").split(" ", 2)
        if int(head[0]) != j or len(head) < 3:
            raise DataError(f"{path}: bad column line for column {j}")
        kind, name = head[1], head[2]
        labels: list[str] = []
        while pos < len(lines) and lines[pos].startswith(f"label {j} "):
            labels.append(lines[pos][len(f"label {j} "):])
            pos += 1
        columns.append(Column(name, kind, tuple(labels) if kind == CATEGORICAL else None))
    schema = Schema(tuple(columns))

    f0 = float(take("f0"))
    nu = float(take("nu"))
    num_trees = int(take("num_trees"))
    max_splits = int(take("max_splits"))
    num_quantiles = int(take("num_quantiles"))
    weighted = bool(int(take("weighted_quantiles")))
    stored_hash = take("grid_hash")
    time_cuts = np.array([float(v) for v in take("time_cuts").split()] or [], dtype=float)
    cov_cuts: list = []
    for j in range(p):
        if schema.is_categorical(j):
            cov_cuts.append(schema.columns[j].labels)
        else:
            body = take("cuts").split()
            if int(body[0]) != j:
                raise DataError(f"{path}: cuts for column {body[0]}, expected {j}")
            cov_cuts.append(np.array([float(v) for v in body[1:]], dtype=float))
    grid = SplitCandidateGrid(time_cuts, tuple(cov_cuts), num_quantiles, weighted)
    if _grid_hash(grid) != stored_hash:
        raise DataError(f"{path}: grid hash mismatch")
    risk_trace = [float(v) for v in take("risk_trace").split()]

    trees: list[TreeNode] = []
    while pos < len(lines) and lines[pos] == "tree":
        pos += 1
        body: list[str] = []
        while pos < len(lines) and lines[pos] not in ("tree", "end"):
            body.append(lines[pos])
            pos += 1
        trees.append(tree_from_lines(body))
    if pos >= len(lines) or lines[pos] != "end":
        raise DataError(f"{path}: missing end marker")
    if len(trees) != num_trees:
        raise DataError(f"{path}: header says {num_trees} trees, found {len(trees)}")
    return BoostedHazardModel(schema, grid, f0, nu, trees, max_splits, risk_trace)


def split_records(model: BoostedHazardModel) -> list[list[tuple[int, float]]]:
    """Per tree, the (axis, score) pairs of its splits in preorder."""
    return [[(s.axis, s.score) for s in tree_splits(root)] for root in model.trees]
