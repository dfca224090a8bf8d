"""Flat array views of a dataset, pre-cut at candidate time thresholds.

Every model fit here is piecewise constant in time with breakpoints inside
the candidate time cuts.  Cutting each epoch at those cuts once makes the
log-hazard constant on every sub-epoch ("segment"), so all integrals over
trajectories reduce to exact finite sums.  A segment spanning (a, b) is
represented by its right endpoint b: with half-open (lower, upper] region
bounds and no cut strictly inside (a, b), the segment lies in a region
exactly when b does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class TrainingArrays:
    """Segments and event points of a dataset in flat numpy form."""

    n_subjects: int
    p: int
    seg_subject: np.ndarray   # int, one entry per segment
    seg_time: np.ndarray      # right endpoint of the segment interval
    seg_duration: np.ndarray
    seg_values: np.ndarray    # (n_segments, p)
    ev_subject: np.ndarray    # subjects with an observed event only
    ev_time: np.ndarray       # follow-up time of the event
    ev_values: np.ndarray     # covariates at the event, (n_events, p)
    followup: np.ndarray      # per subject
    event: np.ndarray         # per subject, bool

    @property
    def n_segments(self) -> int:
        return self.seg_time.size

    @property
    def n_events(self) -> int:
        return self.ev_time.size


def build_arrays(dataset: Dataset, time_cuts=(), extend_to: float | None = None,
                 extra_cuts=()) -> TrainingArrays:
    """Flatten a dataset into segments cut at the given time thresholds.

    ``extend_to`` stretches each trajectory's last epoch up to that time
    (last observation carried forward) so hazards can be integrated past
    the follow-up; events are untouched.  ``extra_cuts`` adds further cut
    points, e.g. an evaluation time grid.
    """
    cuts = np.unique(np.concatenate([np.asarray(time_cuts, dtype=float).ravel(),
                                     np.asarray(extra_cuts, dtype=float).ravel()]))
    p = dataset.schema.p

    seg_subject, seg_time, seg_duration, seg_values = [], [], [], []
    ev_subject, ev_time, ev_values = [], [], []
    followup = np.empty(dataset.n)
    event = np.zeros(dataset.n, dtype=bool)

    for i, s in enumerate(dataset.samples):
        followup[i] = s.followup
        event[i] = s.event
        end = s.followup if extend_to is None else max(s.followup, extend_to)
        starts = np.array([e.start for e in s.epochs])
        values = np.array([e.values for e in s.epochs], dtype=float).reshape(len(s.epochs), p)
        inner = cuts[(cuts > 0.0) & (cuts < end)]
        bounds = np.unique(np.concatenate([starts, [end], inner]))
        sub_start = bounds[:-1]
        sub_end = bounds[1:]
        owner = np.searchsorted(starts, sub_start, side="right") - 1
        seg_subject.append(np.full(sub_start.size, i))
        seg_time.append(sub_end)
        seg_duration.append(sub_end - sub_start)
        seg_values.append(values[owner])
        if s.event:
            ev_subject.append(i)
            ev_time.append(s.followup)
            ev_values.append(s.epochs[-1].values)

    return TrainingArrays(
        n_subjects=dataset.n,
        p=p,
        seg_subject=np.concatenate(seg_subject) if seg_subject else np.empty(0, dtype=int),
        seg_time=np.concatenate(seg_time) if seg_time else np.empty(0),
        seg_duration=np.concatenate(seg_duration) if seg_duration else np.empty(0),
        seg_values=np.concatenate(seg_values) if seg_values else np.empty((0, p)),
        ev_subject=np.asarray(ev_subject, dtype=int),
        ev_time=np.asarray(ev_time, dtype=float),
        ev_values=np.asarray(ev_values, dtype=float).reshape(len(ev_time), p),
        followup=followup,
        event=event,
    )


def coordinates(arrays: TrainingArrays, axis: int, events: bool = False) -> np.ndarray:
    """Per-segment (or per-event) coordinate along one split axis."""
    if events:
        return arrays.ev_time if axis == 0 else arrays.ev_values[:, axis - 1]
    return arrays.seg_time if axis == 0 else arrays.seg_values[:, axis - 1]


def risk_value(arrays: TrainingArrays, log_seg: np.ndarray, log_ev: np.ndarray) -> float:
    """Likelihood risk of a piecewise-constant log-hazard given per-segment
    and per-event log-hazard values."""
    n = arrays.n_subjects
    integral = float(np.sum(arrays.seg_duration * np.exp(log_seg)))
    return (integral - float(np.sum(log_ev))) / n
