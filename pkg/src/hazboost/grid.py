"""Candidate split thresholds for the time axis and every covariate axis.

Cuts are placed at empirical quantiles of the observed data, computed once
globally.  Continuous covariate quantiles are weighted by epoch duration
(at-risk exposure); time-axis quantiles come from the pooled epoch
boundary and follow-up times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class SplitCandidateGrid:
    """Global split candidates: one sorted cut array per continuous axis.

    ``covariate_cuts[j]`` is a strictly increasing float array for a
    continuous column and the label tuple for a categorical one.
    """

    time_cuts: np.ndarray
    covariate_cuts: tuple
    num_quantiles: int
    weighted: bool

    def cuts_for_axis(self, axis: int):
        """Candidates for axis 0 (time) or axis j >= 1 (covariate j-1)."""
        return self.time_cuts if axis == 0 else self.covariate_cuts[axis - 1]

    def dump(self) -> str:
        lines = ["axis 0 (time): " + " ".join(repr(float(c)) for c in self.time_cuts)]
        for j, cuts in enumerate(self.covariate_cuts):
            if isinstance(cuts, np.ndarray):
                body = " ".join(repr(float(c)) for c in cuts)
            else:
                body = "labels " + " ".join(str(c) for c in cuts)
            lines.append(f"axis {j + 1}: {body}")
        return "\n".join(lines)


def quantile_cuts(values, weights, num_quantiles: int) -> np.ndarray:
    """Interior weighted-quantile cuts of a multiset of observed values.

    Cut k is the lowest observed value whose weighted empirical CDF
    reaches k/num_quantiles, for k = 1..num_quantiles-1.  Duplicates are
    collapsed and cuts equal to the observed min or max are dropped, so
    splitting at any returned cut leaves data on both sides.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        return np.empty(0)
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    total = cw[-1]
    targets = np.arange(1, num_quantiles) * (total / num_quantiles)
    idx = np.searchsorted(cw, targets, side="left")
    idx = np.minimum(idx, v.size - 1)
    cuts = np.unique(v[idx])
    return cuts[(cuts > v[0]) & (cuts < v[-1])]


def build_grid(dataset: Dataset, num_quantiles: int = 10, weighted: bool = True) -> SplitCandidateGrid:
    """Compute the global candidate grid for a dataset.

    ``weighted=False`` counts each epoch value once instead of weighting
    by epoch duration.  A constant column yields an empty cut list and its
    axis is never split.
    """
    if num_quantiles < 1:
        raise ValueError("num_quantiles must be positive")
    p = dataset.schema.p

    time_pool = []
    cov_values = [[] for _ in range(p)]
    cov_weights = [[] for _ in range(p)]
    for s in dataset.samples:
        for e in s.epochs:
            time_pool.append(e.start)
            time_pool.append(e.end)
            for j in range(p):
                cov_values[j].append(e.values[j])
                cov_weights[j].append(e.end - e.start if weighted else 1.0)
        time_pool.append(s.followup)

    time_cuts = quantile_cuts(time_pool, np.ones(len(time_pool)), num_quantiles)
    covariate_cuts = []
    for j in range(p):
        if dataset.schema.is_categorical(j):
            covariate_cuts.append(dataset.schema.columns[j].labels)
        else:
            covariate_cuts.append(quantile_cuts(cov_values[j], cov_weights[j], num_quantiles))
    return SplitCandidateGrid(time_cuts, tuple(covariate_cuts), num_quantiles, weighted)
