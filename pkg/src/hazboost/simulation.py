"""Synthetic benchmark data: piecewise-constant trajectories and event times.

Subjects get covariate paths that jump at Poisson times, with the relevant
covariate drawn uniform on (0, 1] per epoch and any irrelevant covariates
standard normal.  Event times come from inverting the cumulative hazard at
an exponential draw; each family's per-epoch integral has a closed form
(see the antiderivatives in ``epoch_cumulative``), so the inversion is
exact up to root-finding tolerance.  Censoring is administrative at the
family horizon by default, with an optional independent uniform censoring
time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .data import Column, Dataset, Epoch, FunctionalSample, Schema

BETA2 = "beta2"
BETA4 = "beta4"
LOGNORMAL = "lognormal"
COSINE = "cosine"
CONSTANT = "constant"

_ALIASES = {
    "lambda1": BETA2, "lambda2": BETA4, "lambda3": LOGNORMAL, "lambda4": COSINE,
    BETA2: BETA2, BETA4: BETA4, LOGNORMAL: LOGNORMAL, COSINE: COSINE,
}
_HORIZONS = {BETA2: 1.0, BETA4: 1.0, LOGNORMAL: 5.0, COSINE: 5.0}

ADMINISTRATIVE = "administrative"
UNIFORM = "uniform"


@dataclass(frozen=True)
class HazardFamily:
    """One simulated hazard surface over (0, horizon] x (0, 1]."""

    tag: str
    horizon: float
    level: float = 1.0  # constant family only

    @staticmethod
    def from_name(name: str, horizon: float | None = None) -> "HazardFamily":
        """Resolve ``lambda1..lambda4``, family tags, or ``constant:<c>``."""
        name = name.strip().lower()
        if name.startswith(CONSTANT):
            level = 1.0
            if ":" in name:
                level = float(name.split(":", 1)[1])
            return HazardFamily(CONSTANT, 1.0 if horizon is None else horizon, level)
        if name not in _ALIASES:
            raise ValueError(f"unknown hazard family {name!r}")
        tag = _ALIASES[name]
        return HazardFamily(tag, _HORIZONS[tag] if horizon is None else horizon)

    def hazard_at(self, t, x_rows):
        """True hazard at evaluation points; only the relevant covariate
        (column 0) enters."""
        x_rows = np.atleast_2d(np.asarray(x_rows, dtype=float))
        return self.value(t, x_rows[:, 0])

    def value(self, t, x):
        """Hazard at (t, x); vectorized; t must lie in (0, horizon]."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.any(t <= 0) or np.any(t > self.horizon):
            raise ValueError(f"t outside (0, {self.horizon}]")
        if self.tag == BETA2:
            return stats.beta.pdf(t, 2, 2) * stats.beta.pdf(x, 2, 2)
        if self.tag == BETA4:
            return stats.beta.pdf(t, 4, 4) * stats.beta.pdf(x, 4, 4)
        if self.tag == LOGNORMAL:
            z = np.log(t) - x
            return stats.norm.pdf(z) / stats.norm.cdf(-z) / t
        if self.tag == COSINE:
            return 1.5 * np.sqrt(t) * np.exp(-0.5 * np.cos(2 * np.pi * x) - 1.5)
        return np.broadcast_to(np.asarray(self.level, dtype=float), np.broadcast(t, x).shape).copy()

    def epoch_cumulative(self, a, b, x):
        """Exact integral of the hazard over times [a, b] at fixed x."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.tag == BETA2:
            return stats.beta.pdf(x, 2, 2) * (stats.beta.cdf(b, 2, 2) - stats.beta.cdf(a, 2, 2))
        if self.tag == BETA4:
            return stats.beta.pdf(x, 4, 4) * (stats.beta.cdf(b, 4, 4) - stats.beta.cdf(a, 4, 4))
        if self.tag == LOGNORMAL:
            # log-normal cumulative hazard: -log survivor, survivor(t) = Phi(x - log t)
            with np.errstate(divide="ignore"):
                upper = stats.norm.logcdf(x - np.log(b))
                lower = np.where(a > 0, stats.norm.logcdf(x - np.log(np.where(a > 0, a, 1.0))), 0.0)
            return lower - upper
        if self.tag == COSINE:
            return (np.power(b, 1.5) - np.power(a, 1.5)) * np.exp(-0.5 * np.cos(2 * np.pi * x) - 1.5)
        return self.level * (b - a)


@dataclass(frozen=True)
class SimulationSpec:
    family: HazardFamily
    n: int
    irrelevant: int = 0
    jump_rate: float = 10.0
    seed: int = 0
    censoring: str = ADMINISTRATIVE

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.irrelevant < 0:
            raise ValueError("irrelevant count must be nonnegative")
        if self.censoring not in (ADMINISTRATIVE, UNIFORM):
            raise ValueError(f"unknown censoring scheme {self.censoring!r}")


def schema_for(spec: SimulationSpec) -> Schema:
    cols = [Column("x1")] + [Column(f"z{k}") for k in range(1, spec.irrelevant + 1)]
    return Schema(tuple(cols))


def sample_trajectory(spec: SimulationSpec, rng: np.random.Generator) -> list[Epoch]:
    """One full-horizon trajectory; jump times are a Poisson process.

    Draw order is fixed (jump count, jump times, relevant values,
    irrelevant values) so trajectories are reproducible per subject
    stream.
    """
    horizon = spec.family.horizon
    k = rng.poisson(spec.jump_rate * horizon)
    jumps = rng.uniform(0.0, horizon, size=k)
    bounds = np.unique(np.concatenate([[0.0], jumps, [horizon]]))
    m = bounds.size - 1
    relevant = 1.0 - rng.uniform(size=m)        # U(0, 1]
    noise = rng.standard_normal((m, spec.irrelevant))
    return [Epoch(float(bounds[i]), float(bounds[i + 1]),
                  (float(relevant[i]), *map(float, noise[i])))
            for i in range(m)]


def sample_event_time(trajectory, family: HazardFamily,
                      rng: np.random.Generator) -> tuple[float, bool]:
    """Draw (follow-up, event) by cumulative-hazard inversion.

    The exponential target -log(U) is matched against the trajectory's
    cumulative hazard; if it is never reached the subject is censored at
    the trajectory end (the horizon).
    """
    u = rng.uniform()
    target = math.inf if u == 0.0 else -math.log(u)
    starts = np.array([e.start for e in trajectory])
    ends = np.array([e.end for e in trajectory])
    xs = np.array([e.values[0] for e in trajectory])
    inc = family.epoch_cumulative(starts, ends, xs)
    csum = np.cumsum(inc)
    if target >= csum[-1]:
        return float(ends[-1]), False
    k = int(np.searchsorted(csum, target, side="left"))
    remaining = target - (csum[k - 1] if k > 0 else 0.0)
    a, b, x = float(starts[k]), float(ends[k]), float(xs[k])

    def gap(s):
        return float(family.epoch_cumulative(a, s, x)) - remaining

    if gap(b) <= 0:  # roundoff put the target at the epoch end
        return b, True
    t = optimize.brentq(gap, a, b, xtol=1e-12, rtol=8.9e-16)
    return float(t), True


def _truncate(trajectory, t: float) -> tuple[Epoch, ...]:
    epochs = []
    for e in trajectory:
        if e.start >= t:
            break
        epochs.append(Epoch(e.start, min(e.end, t), e.values))
    return tuple(epochs)


def _simulate_subject(spec: SimulationSpec, i: int) -> FunctionalSample:
    rng = np.random.default_rng([spec.seed, i])
    trajectory = sample_trajectory(spec, rng)
    followup, event = sample_event_time(trajectory, spec.family, rng)
    if spec.censoring == UNIFORM:
        c = rng.uniform(0.0, spec.family.horizon)
        while c <= 0.0:
            c = rng.uniform(0.0, spec.family.horizon)
        if c < followup:
            followup, event = c, False
    return FunctionalSample(str(i + 1), _truncate(trajectory, followup), followup, event)


def _simulate_range(spec: SimulationSpec, lo: int, hi: int) -> list[FunctionalSample]:
    return [_simulate_subject(spec, i) for i in range(lo, hi)]


def simulate(spec: SimulationSpec, threads: int = 1) -> tuple[Dataset, "SimulationTruth"]:
    """Draw the dataset and the truth record used later for evaluation.

    Each subject uses an independent generator derived from
    (seed, subject index), so results do not depend on iteration order or
    worker count.
    """
    if threads != 1 and spec.n >= 256:
        from joblib import Parallel, delayed
        edges = np.linspace(0, spec.n, 33).astype(int)
        chunks = Parallel(n_jobs=threads)(
            delayed(_simulate_range)(spec, int(a), int(b))
            for a, b in zip(edges[:-1], edges[1:]))
        samples = [s for chunk in chunks for s in chunk]
    else:
        samples = _simulate_range(spec, 0, spec.n)
    return Dataset(schema_for(spec), tuple(samples)), SimulationTruth.from_spec(spec)


@dataclass(frozen=True)
class SimulationTruth:
    """Pointer back to the generating hazard, for test-set evaluation."""

    family_tag: str
    horizon: float
    level: float
    n: int
    irrelevant: int
    jump_rate: float
    seed: int
    censoring: str

    @staticmethod
    def from_spec(spec: SimulationSpec) -> "SimulationTruth":
        return SimulationTruth(spec.family.tag, spec.family.horizon, spec.family.level,
                               spec.n, spec.irrelevant, spec.jump_rate, spec.seed,
                               spec.censoring)

    @property
    def family(self) -> HazardFamily:
        return HazardFamily(self.family_tag, self.horizon, self.level)

    def hazard_at(self, t, x_rows):
        """True hazard at evaluation points; only the relevant covariate
        (column 0) enters."""
        x_rows = np.atleast_2d(np.asarray(x_rows, dtype=float))
        return self.family.value(t, x_rows[:, 0])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "SimulationTruth":
        with open(path, encoding="utf-8") as fh:
            return SimulationTruth(**json.load(fh))


def true_cumulative_hazard_matrix(family: HazardFamily, dataset: Dataset, times) -> np.ndarray:
    """Integrated true hazard along each subject's trajectory at each time,
    with the last observation carried forward past the follow-up."""
    times = np.asarray(times, dtype=float)
    tmax = float(times.max())
    subj, starts, ends, xs = [], [], [], []
    for i, s in enumerate(dataset.samples):
        for k, e in enumerate(s.epochs):
            end = e.end if k < len(s.epochs) - 1 else max(e.end, tmax)
            subj.append(i)
            starts.append(e.start)
            ends.append(end)
            xs.append(e.values[0])
    subj = np.asarray(subj)
    starts = np.asarray(starts)
    ends = np.asarray(ends)
    xs = np.asarray(xs)
    out = np.empty((dataset.n, times.size))
    for k, t in enumerate(times):
        m = starts < t
        inc = family.epoch_cumulative(starts[m], np.minimum(ends[m], t), xs[m])
        out[:, k] = np.bincount(subj[m], weights=inc, minlength=dataset.n)
    return out
