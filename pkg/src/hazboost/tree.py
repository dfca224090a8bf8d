"""Regression trees over time-covariate space, grown by exact risk minimization.

A tree partitions (t, x) space into half-open hypercubes.  For a candidate
region A the pair (U, V) holds the hazard-weighted at-risk exposure in A
and the scaled count of observed events in A.  The best constant value on
a leaf is log(U/V), and the exact change in likelihood risk from splitting
a leaf into two optimally-valued halves has the closed form implemented by
:func:`split_score`.  Growth is best-first: the globally lowest-scoring
admissible split is applied until the split budget is exhausted or no
split lowers the risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Schema
from .grid import SplitCandidateGrid
from .segments import TrainingArrays, build_arrays, coordinates

TIME_AXIS = 0


@dataclass(frozen=True)
class TimeCovariateCube:
    """Axis-aligned region: (lower, upper] per continuous axis (axis 0 is
    time), an admissible label set per categorical axis."""

    lower: tuple[float, ...]            # length p+1
    upper: tuple[float, ...]
    labels: tuple[frozenset | None, ...]  # length p+1; None on continuous axes

    def contains(self, t, x) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mask = (self.lower[0] < t) & (t <= self.upper[0])
        for axis in range(1, len(self.lower)):
            v = x[:, axis - 1]
            if self.labels[axis] is not None:
                mask &= np.isin(v, sorted(self.labels[axis]))
            else:
                mask &= (self.lower[axis] < v) & (v <= self.upper[axis])
        return mask

    def split_continuous(self, axis: int, threshold: float):
        lo, hi = list(self.lower), list(self.upper)
        hi[axis] = threshold
        left = TimeCovariateCube(tuple(lo), tuple(hi), self.labels)
        lo2, hi2 = list(self.lower), list(self.upper)
        lo2[axis] = threshold
        right = TimeCovariateCube(tuple(lo2), tuple(hi2), self.labels)
        return left, right

    def split_label(self, axis: int, label: int):
        labs = list(self.labels)
        labs[axis] = frozenset({label})
        left = TimeCovariateCube(self.lower, self.upper, tuple(labs))
        labs2 = list(self.labels)
        labs2[axis] = self.labels[axis] - {label}
        right = TimeCovariateCube(self.lower, self.upper, tuple(labs2))
        return left, right


def full_cube(schema: Schema) -> TimeCovariateCube:
    """The unbounded root region for a covariate schema."""
    p = schema.p
    lower = (-math.inf,) * (p + 1)
    upper = (math.inf,) * (p + 1)
    labels = [None]
    for j in range(p):
        if schema.is_categorical(j):
            labels.append(frozenset(range(len(schema.columns[j].labels))))
        else:
            labels.append(None)
    return TimeCovariateCube(lower, upper, tuple(labels))


@dataclass
class LeafNode:
    value: float
    region: TimeCovariateCube | None = None


@dataclass
class SplitNode:
    axis: int                   # 0 = time, j >= 1 = covariate j-1
    threshold: float | None     # continuous split: left side is value <= threshold
    label: int | None           # categorical split: left side is value == label
    left: "TreeNode"
    right: "TreeNode"
    score: float = math.nan     # risk decrease d recorded at fit time


TreeNode = LeafNode | SplitNode


@dataclass(frozen=True)
class SplitEvaluation:
    """One scored split candidate with its side statistics."""

    leaf_id: int
    axis: int
    threshold: float | None
    label: int | None
    u1: float
    v1: float
    u2: float
    v2: float
    gamma1: float
    gamma2: float
    score: float


def leaf_value(u: float, v: float) -> float:
    """Optimal constant for a leaf: the minimizer log(u/v) of
    exp(-g)*u + g*v."""
    if not (u > 0 and v > 0):
        raise ValueError(f"leaf value needs positive statistics, got u={u}, v={v}")
    return math.log(u / v)


def split_score(u1: float, v1: float, u2: float, v2: float) -> float:
    """Exact likelihood-risk decrease from replacing one optimally-valued
    leaf by two; never positive on valid inputs."""
    for name, val in (("u1", u1), ("v1", v1), ("u2", u2), ("v2", v2)):
        if not val > 0:
            raise ValueError(f"split score needs positive statistics, got {name}={val}")
    return (v1 * (1.0 + math.log(u1 / v1))
            + v2 * (1.0 + math.log(u2 / v2))
            - (v1 + v2) * (1.0 + math.log((u1 + u2) / (v1 + v2))))


def _score_vector(u1, v1, u2, v2):
    with np.errstate(divide="ignore", invalid="ignore"):
        return (v1 * (1.0 + np.log(u1 / v1))
                + v2 * (1.0 + np.log(u2 / v2))
                - (v1 + v2) * (1.0 + np.log((u1 + u2) / (v1 + v2))))


def accumulate_uv(region: TimeCovariateCube, dataset: Dataset, log_hazard,
                  time_cuts=()) -> tuple[float, float]:
    """Exact (U, V) for one region under a piecewise-constant log-hazard.

    ``log_hazard(t, x)`` must be constant in time between consecutive
    entries of ``time_cuts`` (plus the trajectory's own epoch boundaries);
    it is evaluated at the right endpoint of each sub-interval.  Sums use
    compensated accumulation, making this the reference implementation the
    fast fit path is tested against.
    """
    n = dataset.n
    finite_bounds = [b for b in (region.lower[0], region.upper[0]) if math.isfinite(b)]
    cuts = np.unique(np.concatenate([np.asarray(time_cuts, dtype=float).ravel(),
                                     np.asarray(finite_bounds, dtype=float)]))
    u_terms = []
    v_count = 0
    for s in dataset.samples:
        for e in s.epochs:
            inner = cuts[(cuts > e.start) & (cuts < e.end)]
            bounds = np.concatenate([[e.start], inner, [e.end]])
            for a, b in zip(bounds[:-1], bounds[1:]):
                if region.contains(b, [e.values])[0]:
                    u_terms.append(math.exp(log_hazard(b, e.values)) * (b - a))
        if s.event and region.contains(s.followup, [s.epochs[-1].values])[0]:
            v_count += 1
    return math.fsum(u_terms) / n, v_count / n


def best_categorical_split(region: TimeCovariateCube, dataset: Dataset, log_hazard,
                           column: int, time_cuts=()) -> SplitEvaluation | None:
    """Best one-hot split of a categorical column inside a region.

    Tries every singleton label as the left side; returns the lowest-score
    candidate with events and exposure on both sides, ties going to the
    lowest label code (dictionary order).  None when nothing qualifies.
    """
    axis = column + 1
    labels = region.labels[axis]
    if labels is None:
        raise ValueError(f"column {column} is not categorical")
    if len(labels) < 2:
        return None
    best = None
    for label in sorted(labels):
        left, right = region.split_label(axis, label)
        u1, v1 = accumulate_uv(left, dataset, log_hazard, time_cuts)
        u2, v2 = accumulate_uv(right, dataset, log_hazard, time_cuts)
        if min(u1, v1, u2, v2) <= 0:
            continue
        d = split_score(u1, v1, u2, v2)
        if best is None or d < best.score:
            best = SplitEvaluation(-1, axis, None, label, u1, v1, u2, v2,
                                   leaf_value(u1, v1), leaf_value(u2, v2), d)
    return best


@dataclass
class _LeafState:
    leaf_id: int
    seg_idx: np.ndarray
    ev_idx: np.ndarray
    u: float          # hazard-weighted exposure mass, already scaled by 1/n
    events: int       # raw event count in the leaf
    cube: TimeCovariateCube
    node: LeafNode


class SearchIndex:
    """Per-axis candidate bins of every segment and event, computed once.

    Bin indices depend only on the data and the grid, not on the current
    log-hazard, so they are shared by every tree of a fit.
    """

    def __init__(self, arrays: TrainingArrays, schema: Schema, grid: SplitCandidateGrid):
        self.schema = schema
        self.grid = grid
        self.axes = []
        for axis in range(schema.p + 1):
            coord_s = coordinates(arrays, axis)
            coord_e = coordinates(arrays, axis, events=True)
            if axis > 0 and schema.is_categorical(axis - 1):
                nbins = len(schema.columns[axis - 1].labels)
                self.axes.append(("label", coord_s.astype(np.int64),
                                  coord_e.astype(np.int64), nbins, np.arange(nbins)))
            else:
                cuts = grid.cuts_for_axis(axis)
                if cuts.size == 0:
                    self.axes.append(None)
                    continue
                self.axes.append(("cut", np.searchsorted(cuts, coord_s, side="left"),
                                  np.searchsorted(cuts, coord_e, side="left"),
                                  cuts.size + 1, cuts))


@dataclass
class GrownTree:
    """One fitted tree plus its training-time bookkeeping."""

    root: TreeNode
    splits: list[SplitEvaluation]
    seg_values: np.ndarray   # tree value at every training segment
    ev_values: np.ndarray    # tree value at every training event point
    risk_delta: float        # exact risk change if the whole tree were subtracted

    @property
    def is_zero(self) -> bool:
        return not self.splits


def _search_leaf(state: _LeafState, index: SearchIndex, seg_w: np.ndarray,
                 n: int) -> SplitEvaluation | None:
    """Lowest-scoring admissible split of one leaf, or None.

    Ties break to the lowest axis index, then the smallest threshold or
    label code; candidate order below guarantees that.
    """
    best = None
    best_key = None
    w_leaf = seg_w[state.seg_idx]
    for axis, info in enumerate(index.axes):
        if info is None:
            continue
        kind, bins_s, bins_e, nbins, thresholds = info
        if nbins < 2:
            continue
        bs = bins_s[state.seg_idx]
        be = bins_e[state.ev_idx]
        hu = np.bincount(bs, weights=w_leaf, minlength=nbins)
        hc = np.bincount(be, minlength=nbins)
        if kind == "cut":
            u1 = np.cumsum(hu)[:-1]
            c1 = np.cumsum(hc)[:-1]
            # suffix sums of nonnegative weights are exactly positive iff the
            # right side holds a segment; float noise in state.u - u1 is not
            # trusted for emptiness
            right_mass = np.cumsum(hu[::-1])[::-1][1:]
        else:
            u1, c1 = hu, hc
            hs = np.bincount(bs, minlength=nbins)
            right_mass = (state.seg_idx.size - hs).astype(float)
        c2 = state.events - c1
        u2 = state.u - u1
        valid = (c1 > 0) & (c2 > 0) & (u1 > 0) & (right_mass > 0) & (u2 > 0)
        if not valid.any():
            continue
        v1 = c1 / n
        v2 = c2 / n
        d = np.where(valid, _score_vector(u1, v1, u2, v2), np.inf)
        k = int(np.argmin(d))
        key = (float(d[k]), axis, float(thresholds[k]))
        if best_key is None or key < best_key:
            best_key = key
            categorical = kind == "label"
            best = SplitEvaluation(
                state.leaf_id, axis,
                None if categorical else float(thresholds[k]),
                int(thresholds[k]) if categorical else None,
                float(u1[k]), float(v1[k]), float(u2[k]), float(v2[k]),
                math.log(u1[k] / v1[k]), math.log(u2[k] / v2[k]), float(d[k]))
    return best


def grow_on_arrays(arrays: TrainingArrays, seg_w: np.ndarray, schema: Schema,
                   grid: SplitCandidateGrid, max_splits: int,
                   research_all: bool = False,
                   index: SearchIndex | None = None) -> GrownTree:
    """Best-first growth engine over pre-cut segment arrays.

    ``seg_w`` is duration * exp(log-hazard) / n per segment.  Only the two
    leaves created by a split are re-searched on the next iteration; other
    leaves keep their cached best candidate (``research_all=True`` forces a
    full re-search each iteration, for verification).  Pass a prebuilt
    ``index`` when growing many trees over the same arrays.
    """
    if max_splits < 1:
        raise ValueError("max_splits must be at least 1")
    n = arrays.n_subjects
    if index is None:
        index = SearchIndex(arrays, schema, grid)

    root_node = LeafNode(0.0, full_cube(schema))
    root = _LeafState(0, np.arange(arrays.n_segments), np.arange(arrays.n_events),
                      float(np.sum(seg_w)), arrays.n_events, root_node.region, root_node)
    states = {0: root}
    cands = {0: _search_leaf(root, index, seg_w, n)}
    tree_root: TreeNode = root_node
    parent: dict[int, tuple[SplitNode, str]] = {}
    splits: list[SplitEvaluation] = []
    next_id = 1

    while len(splits) < max_splits:
        if research_all:
            cands = {lid: _search_leaf(st, index, seg_w, n)
                     for lid, st in states.items()}
        pick = None
        pick_key = None
        for lid in sorted(cands):
            ev = cands[lid]
            if ev is None:
                continue
            key = (ev.score, ev.axis, ev.label if ev.threshold is None else ev.threshold)
            if pick_key is None or key < pick_key:
                pick_key = key
                pick = ev
        if pick is None or not pick.score < 0:
            break

        state = states.pop(pick.leaf_id)
        cands.pop(pick.leaf_id)
        coord_s = coordinates(arrays, pick.axis)[state.seg_idx]
        coord_e = coordinates(arrays, pick.axis, events=True)[state.ev_idx]
        if pick.label is not None:
            left_s = coord_s == pick.label
            left_e = coord_e == pick.label
            cube_l, cube_r = state.cube.split_label(pick.axis, pick.label)
        else:
            left_s = coord_s <= pick.threshold
            left_e = coord_e <= pick.threshold
            cube_l, cube_r = state.cube.split_continuous(pick.axis, pick.threshold)

        node_l = LeafNode(pick.gamma1, cube_l)
        node_r = LeafNode(pick.gamma2, cube_r)
        split_node = SplitNode(pick.axis, pick.threshold, pick.label, node_l, node_r, pick.score)
        if pick.leaf_id in parent:
            pnode, side = parent.pop(pick.leaf_id)
            setattr(pnode, side, split_node)
        else:
            tree_root = split_node

        st_l = _LeafState(next_id, state.seg_idx[left_s], state.ev_idx[left_e],
                          pick.u1, int(np.sum(left_e)), cube_l, node_l)
        st_r = _LeafState(next_id + 1, state.seg_idx[~left_s], state.ev_idx[~left_e],
                          pick.u2, state.events - st_l.events, cube_r, node_r)
        parent[st_l.leaf_id] = (split_node, "left")
        parent[st_r.leaf_id] = (split_node, "right")
        next_id += 2
        for st in (st_l, st_r):
            states[st.leaf_id] = st
            cands[st.leaf_id] = _search_leaf(st, index, seg_w, n)
        splits.append(pick)

    seg_values = np.zeros(arrays.n_segments)
    ev_values = np.zeros(arrays.n_events)
    for st in states.values():
        seg_values[st.seg_idx] = st.node.value
        ev_values[st.ev_idx] = st.node.value

    risk_delta = 0.0
    if splits:
        v_root = root.events / n
        risk_delta = v_root * (1.0 + math.log(root.u / v_root)) - root.u
        risk_delta += math.fsum(ev.score for ev in splits)
    return GrownTree(tree_root, splits, seg_values, ev_values, risk_delta)


def grow_tree(dataset: Dataset, grid: SplitCandidateGrid, log_hazard,
              max_splits: int) -> GrownTree:
    """Grow one tree against a dataset and a current log-hazard callable.

    ``log_hazard(t, x)`` must be piecewise constant in time with
    breakpoints inside the grid's time cuts.  A dataset admitting no risk-
    reducing first split yields the zero tree (single leaf of value 0).
    """
    arrays = build_arrays(dataset, grid.time_cuts)
    f_seg = np.array([log_hazard(t, x) for t, x in zip(arrays.seg_time, arrays.seg_values)])
    seg_w = arrays.seg_duration * np.exp(f_seg) / arrays.n_subjects
    return grow_on_arrays(arrays, seg_w, dataset.schema, grid, max_splits)


def evaluate_tree(node: TreeNode, t, x) -> np.ndarray:
    """Tree value at each point; ``t`` shape (N,), ``x`` shape (N, p)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(t.shape)
    _evaluate_into(node, t, x, np.arange(t.size), out)
    return out


def _evaluate_into(node, t, x, idx, out):
    if idx.size == 0:
        return
    if isinstance(node, LeafNode):
        out[idx] = node.value
        return
    coord = t[idx] if node.axis == TIME_AXIS else x[idx, node.axis - 1]
    left = coord == node.label if node.label is not None else coord <= node.threshold
    _evaluate_into(node.left, t, x, idx[left], out)
    _evaluate_into(node.right, t, x, idx[~left], out)


def tree_leaves(node: TreeNode) -> list[LeafNode]:
    if isinstance(node, LeafNode):
        return [node]
    return tree_leaves(node.left) + tree_leaves(node.right)


def tree_splits(node: TreeNode) -> list[SplitNode]:
    if isinstance(node, LeafNode):
        return []
    return [node] + tree_splits(node.left) + tree_splits(node.right)


def assign_regions(node: TreeNode, schema: Schema) -> TreeNode:
    """Recompute leaf regions from the split structure (after parsing)."""
    def walk(nd, cube):
        if isinstance(nd, LeafNode):
            nd.region = cube
            return
        if nd.label is not None:
            left, right = cube.split_label(nd.axis, nd.label)
        else:
            left, right = cube.split_continuous(nd.axis, nd.threshold)
        walk(nd.left, left)
        walk(nd.right, right)
    walk(node, full_cube(schema))
    return node


def tree_to_lines(node: TreeNode) -> list[str]:
    """Serialize preorder, one node per line:
    ``node_id,kind,axis,threshold|label,value``."""
    lines = []

    def walk(nd):
        nid = len(lines)
        if isinstance(nd, LeafNode):
            lines.append(f"{nid},leaf,,,{repr(float(nd.value))}")
        elif nd.label is not None:
            lines.append(f"{nid},onehot,{nd.axis},{nd.label},{repr(float(nd.score))}")
            walk(nd.left)
            walk(nd.right)
        else:
            lines.append(f"{nid},split,{nd.axis},{repr(float(nd.threshold))},{repr(float(nd.score))}")
            walk(nd.left)
            walk(nd.right)
    walk(node)
    return lines


def tree_from_lines(lines) -> TreeNode:
    """Parse the output of :func:`tree_to_lines`."""
    pos = 0

    def parse() -> TreeNode:
        nonlocal pos
        parts = lines[pos].split(",")
        pos += 1
        if len(parts) != 5:
            raise ValueError(f"bad tree line: {lines[pos - 1]!r}")
        _, kind, axis, thr, value = parts
        if kind == "leaf":
            return LeafNode(float(value))
        if kind not in ("split", "onehot"):
            raise ValueError(f"bad node kind {kind!r}")
        left = parse()
        right = parse()
        if kind == "onehot":
            return SplitNode(int(axis), None, int(thr), left, right, float(value))
        return SplitNode(int(axis), float(thr), None, left, right, float(value))

    root = parse()
    if pos != len(lines):
        raise ValueError("trailing tree lines")
    return root
