"""Test-set evaluation: hazard recovery error and time-dependent AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import BoostedHazardModel, cumulative_hazard_matrix
from .data import Dataset
from .simulation import HazardFamily, SimulationTruth, true_cumulative_hazard_matrix


@dataclass(frozen=True)
class EvaluationPoint:
    """One (time, covariates) draw from a test trajectory, with the true
    hazard attached when the data is simulated."""

    subject: str
    t: float
    x: tuple[float, ...]
    true_hazard: float | None = None


def l2_error(predictions, truths) -> float:
    """Root mean squared difference between predicted and true hazards."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.shape != truths.shape or predictions.ndim != 1 or predictions.size == 0:
        raise ValueError("predictions and truths must be equal-length nonempty vectors")
    return float(np.sqrt(np.mean((predictions - truths) ** 2)))


def sample_evaluation_points(dataset: Dataset, truth=None, per_subject: int = 1,
                             seed: int = 0) -> list[EvaluationPoint]:
    """Draw times uniform on (0, followup] per subject, paired with the
    covariates in force at each time.

    ``truth`` (a simulation truth record or hazard family) attaches the
    true hazard to each point.
    """
    rng = np.random.default_rng(seed)
    points = []
    for s in dataset.samples:
        for _ in range(per_subject):
            t = s.followup * (1.0 - rng.uniform())
            x = s.value_at(t)
            lam = float(truth.hazard_at(t, [x])[0]) if truth is not None else None
            points.append(EvaluationPoint(s.id, t, tuple(x), lam))
    return points


def predicted_hazards(model: BoostedHazardModel, points) -> np.ndarray:
    t = np.array([p.t for p in points])
    x = np.array([p.x for p in points])
    return np.exp(model.predict_log_hazard(t, x))


def survival_probabilities(source, dataset: Dataset, times) -> np.ndarray:
    """Survival of each subject at each time along its own trajectory.

    ``source`` is a fitted model, a hazard family, or a simulation truth
    record.  Trajectories are extended past the follow-up by carrying the
    last observation forward.  Shape (n_subjects, len(times)).
    """
    if isinstance(source, BoostedHazardModel):
        cum = cumulative_hazard_matrix(source, dataset, times)
    elif isinstance(source, SimulationTruth):
        cum = true_cumulative_hazard_matrix(source.family, dataset, times)
    elif isinstance(source, HazardFamily):
        cum = true_cumulative_hazard_matrix(source, dataset, times)
    else:
        raise TypeError(f"cannot compute survival from {type(source).__name__}")
    return np.exp(-cum)


def _auc_from_survival(surv: np.ndarray, followup: np.ndarray, event: np.ndarray,
                       t: float) -> tuple[float, int]:
    case = event & (followup < t)
    ctrl = followup > t
    n_pairs = int(case.sum()) * int(ctrl.sum())
    if n_pairs == 0:
        raise ValueError(f"AUC undefined at t={t}: no comparable pairs")
    s_case = surv[case][:, None]
    s_ctrl = surv[ctrl][None, :]
    wins = np.count_nonzero(s_case < s_ctrl)
    ties = np.count_nonzero(s_case == s_ctrl)
    return (wins + 0.5 * ties) / n_pairs, n_pairs


def auc_t(source, dataset: Dataset, t: float) -> tuple[float, int]:
    """Probability that a subject with an event before t is ranked riskier
    (lower survival at t) than one still event-free after t; ties count
    half.  Returns (estimate, number of comparable pairs)."""
    followup = np.array([s.followup for s in dataset.samples])
    event = np.array([s.event for s in dataset.samples])
    surv = survival_probabilities(source, dataset, [t])[:, 0]
    return _auc_from_survival(surv, followup, event, t)


def auc_curve(source, dataset: Dataset, times) -> list[tuple[float, float, int]]:
    """(t, AUC, pair count) for every grid time; one survival pass total."""
    times = np.asarray(times, dtype=float)
    followup = np.array([s.followup for s in dataset.samples])
    event = np.array([s.event for s in dataset.samples])
    surv = survival_probabilities(source, dataset, times)
    rows = []
    for k, t in enumerate(times):
        auc, pairs = _auc_from_survival(surv[:, k], followup, event, float(t))
        rows.append((float(t), auc, pairs))
    return rows


def default_time_grid(dataset: Dataset, count: int = 20) -> np.ndarray:
    """Equally spaced interior quantiles of the observed follow-up times."""
    followup = np.array([s.followup for s in dataset.samples])
    qs = np.arange(1, count + 1) / (count + 1)
    return np.unique(np.quantile(followup, qs))
