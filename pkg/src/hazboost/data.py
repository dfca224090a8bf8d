"""Functional survival data: subjects with piecewise-constant covariate trajectories.

Each subject contributes a trajectory of covariate readings, a follow-up
time, and an event indicator.  Trajectories are step functions built by
last-observation-carried-forward: the reading taken at time ``t`` holds on
the half-open interval ``[t, next reading time)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Unreadable or structurally invalid input data."""


@dataclass(frozen=True)
class Column:
    """One covariate column: continuous readings or categorical labels."""

    name: str
    kind: str = CONTINUOUS
    labels: tuple[str, ...] | None = None  # only for categorical

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise DataError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.kind == CONTINUOUS and self.labels is not None:
            raise DataError(f"continuous column {self.name!r} cannot carry labels")


@dataclass(frozen=True)
class Schema:
    """Ordered covariate columns shared by every sample of a dataset.

    Categorical labels are mapped to dense integer codes (position in the
    sorted ``labels`` tuple); epoch values store the codes as floats.
    """

    columns: tuple[Column, ...]

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def is_categorical(self, j: int) -> bool:
        return self.columns[j].kind == CATEGORICAL

    def encode(self, j: int, raw: str) -> float:
        col = self.columns[j]
        if col.kind == CONTINUOUS:
            try:
                return float(raw)
            except ValueError:
                raise DataError(f"column {col.name!r}: not a number: {raw!r}") from None
        if col.labels is None or raw not in col.labels:
            raise DataError(f"column {col.name!r}: unknown categorical label {raw!r}")
        return float(col.labels.index(raw))

    def decode(self, j: int, value: float) -> str:
        col = self.columns[j]
        if col.kind == CONTINUOUS:
            return repr(float(value))
        return col.labels[int(value)]


@dataclass(frozen=True)
class Epoch:
    """One constant stretch of a trajectory on ``[start, end)``."""

    start: float
    end: float
    values: tuple[float, ...]


@dataclass(frozen=True)
class FunctionalSample:
    """One subject: trajectory epochs, follow-up time, event indicator.

    ``terminal_values`` holds a covariate reading taken at the follow-up
    time itself, when the input carried one; :func:`impute_terminal_jump`
    folds it into the trajectory.
    """

    id: str
    epochs: tuple[Epoch, ...]
    followup: float
    event: bool
    terminal_values: tuple[float, ...] | None = None

    def value_at(self, t: float) -> tuple[float, ...]:
        """Covariate values at time t under the step-function convention.

        ``t`` equal to the follow-up time returns the last epoch's values
        (last observation carried forward).
        """
        for e in reversed(self.epochs):
            if e.start <= t:
                return e.values
        return self.epochs[0].values


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    samples: tuple[FunctionalSample, ...]

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def n_events(self) -> int:
        return sum(1 for s in self.samples if s.event)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.schema, tuple(self.samples[i] for i in indices))


@dataclass
class ValidationReport:
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.messages

    def __str__(self) -> str:
        return "\n".join(self.messages)


def _is_blank(cell: str | None) -> bool:
    return cell is None or cell.strip() == ""


def load_dataset(path, schema: Schema | None = None) -> Dataset:
    """Read a long-format CSV of measurement and terminal rows.

    Expected header: ``id, time, <covariate columns...>, followup, event``.
    Measurement rows leave ``followup``/``event`` empty; exactly one
    terminal row per subject carries ``followup`` and ``event`` (0/1) and,
    optionally, a covariate reading taken at the follow-up time.

    When ``schema`` is None every covariate column is treated as
    continuous.  Categorical columns declared without an explicit label
    set get labels inferred from the file (sorted lexicographically).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: no samples (empty file)")
    header = [h.strip() for h in rows[0]]
    if len(header) < 4 or header[0] != "id" or header[1] != "time" \
            or header[-2] != "followup" or header[-1] != "event":
        raise DataError(f"{path}: bad header; expected id, time, <covariates...>, followup, event")
    cov_names = header[2:-2]
    if schema is None:
        schema = Schema(tuple(Column(name) for name in cov_names))
    if schema.names != tuple(cov_names):
        raise DataError(f"{path}: header columns {cov_names} do not match schema {list(schema.names)}")

    # First pass: collect labels for categorical columns declared without them.
    open_cols = [j for j, c in enumerate(schema.columns) if c.kind == CATEGORICAL and c.labels is None]
    if open_cols:
        seen: dict[int, set[str]] = {j: set() for j in open_cols}
        for row in rows[1:]:
            if not row or all(_is_blank(c) for c in row):
                continue
            for j in open_cols:
                if 2 + j < len(row) and not _is_blank(row[2 + j]):
                    seen[j].add(row[2 + j].strip())
        cols = list(schema.columns)
        for j in open_cols:
            cols[j] = Column(cols[j].name, CATEGORICAL, tuple(sorted(seen[j])))
        schema = Schema(tuple(cols))

    p = schema.p
    measurements: dict[str, list[tuple[float, tuple[float, ...], int]]] = {}
    terminals: dict[str, tuple[float, bool, tuple[float, ...] | None, int]] = {}
    order: list[str] = []

    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(_is_blank(c) for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        sid = row[0].strip()
        if not sid:
            raise DataError(f"{path}:{lineno}: empty subject id")
        if sid not in measurements:
            measurements[sid] = []
            order.append(sid)
        fu_cell, ev_cell = row[-2], row[-1]
        cov_cells = row[2:-2]
        if _is_blank(fu_cell) and _is_blank(ev_cell):
            # measurement row
            if _is_blank(row[1]):
                raise DataError(f"{path}:{lineno}: subject {sid}: measurement row without a time")
            try:
                t = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: subject {sid}: bad time {row[1]!r}") from None
            if any(_is_blank(c) for c in cov_cells):
                raise DataError(f"{path}:{lineno}: subject {sid}: measurement row with missing covariate values")
            try:
                values = tuple(schema.encode(j, cov_cells[j].strip()) for j in range(p))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: subject {sid}: {exc}") from None
            measurements[sid].append((t, values, lineno))
        elif _is_blank(fu_cell) or _is_blank(ev_cell):
            raise DataError(f"{path}:{lineno}: subject {sid}: terminal row must carry both followup and event")
        else:
            if sid in terminals:
                raise DataError(f"{path}:{lineno}: subject {sid}: more than one terminal row")
            try:
                followup = float(fu_cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: subject {sid}: bad followup {fu_cell!r}") from None
            ev = ev_cell.strip()
            if ev not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: subject {sid}: event must be 0 or 1, got {ev!r}")
            blank = [_is_blank(c) for c in cov_cells]
            if all(blank):
                tvalues = None
            elif any(blank):
                raise DataError(f"{path}:{lineno}: subject {sid}: terminal covariates must be all present or all empty")
            else:
                try:
                    tvalues = tuple(schema.encode(j, cov_cells[j].strip()) for j in range(p))
                except DataError as exc:
                    raise DataError(f"{path}:{lineno}: subject {sid}: {exc}") from None
            terminals[sid] = (followup, ev == "1", tvalues, lineno)

    samples = []
    for sid in order:
        if sid not in terminals:
            raise DataError(f"{path}: subject {sid}: missing terminal row")
        followup, event, tvalues, tline = terminals[sid]
        meas = sorted(measurements[sid], key=lambda m: m[0])
        if not meas:
            raise DataError(f"{path}:{tline}: subject {sid}: zero epochs (no measurement rows)")
        times = [m[0] for m in meas]
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise DataError(f"{path}: subject {sid}: non-monotone measurement times ({a}, {b})")
        if times[-1] >= followup:
            raise DataError(f"{path}: subject {sid}: measurement at t={times[-1]} is not before followup {followup}")
        bounds = times + [followup]
        epochs = tuple(
            Epoch(bounds[k], bounds[k + 1], meas[k][1]) for k in range(len(meas))
        )
        samples.append(FunctionalSample(sid, epochs, followup, event, tvalues))

    if not samples:
        raise DataError(f"{path}: no samples")
    return Dataset(schema, tuple(samples))


def write_dataset(dataset: Dataset, path) -> None:
    """Write the long-format CSV read back by :func:`load_dataset`."""
    schema = dataset.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "time"] + list(schema.names) + ["followup", "event"])
        for s in dataset.samples:
            for e in s.epochs:
                w.writerow([s.id, repr(float(e.start))]
                           + [schema.decode(j, e.values[j]) for j in range(schema.p)]
                           + ["", ""])
            tcells = [""] * schema.p
            if s.terminal_values is not None:
                tcells = [schema.decode(j, s.terminal_values[j]) for j in range(schema.p)]
            w.writerow([s.id, ""] + tcells + [repr(float(s.followup)), "1" if s.event else "0"])


def impute_terminal_jump(sample: FunctionalSample) -> FunctionalSample:
    """Fold a distinct terminal covariate reading into the trajectory.

    A reading taken exactly at the follow-up time contributes no at-risk
    exposure under the step-function convention, so a leaf region can see
    its event without any trajectory mass.  The fix: insert an epoch
    boundary at the midpoint between the last pre-terminal reading time
    and the follow-up, and let the terminal values hold from there on.

    No-op when there is no terminal reading or it equals the last
    pre-terminal values; idempotent.
    """
    if sample.terminal_values is None:
        return sample
    last = sample.epochs[-1]
    if tuple(sample.terminal_values) == tuple(last.values):
        return sample
    mid = 0.5 * (last.start + sample.followup)
    if not (last.start < mid < sample.followup):
        return sample  # interval too narrow to carry a boundary
    epochs = sample.epochs[:-1] + (
        Epoch(last.start, mid, last.values),
        Epoch(mid, sample.followup, sample.terminal_values),
    )
    return replace(sample, epochs=epochs)


def impute_dataset(dataset: Dataset) -> Dataset:
    """Apply :func:`impute_terminal_jump` to every sample."""
    return Dataset(dataset.schema, tuple(impute_terminal_jump(s) for s in dataset.samples))


def validate(dataset: Dataset) -> ValidationReport:
    """List every structural invariant violation; empty report means valid."""
    report = ValidationReport()
    msg = report.messages.append
    if dataset.n < 1:
        msg("no samples")
    p = dataset.schema.p
    for s in dataset.samples:
        if not s.epochs:
            msg(f"subject {s.id}: zero epochs")
            continue
        if s.followup <= 0:
            msg(f"subject {s.id}: followup {s.followup} is not positive")
        if s.epochs[0].start != 0:
            msg(f"subject {s.id}: trajectory starts at {s.epochs[0].start}, not 0")
        for e in s.epochs:
            if not e.start < e.end:
                msg(f"subject {s.id}: empty or inverted epoch [{e.start}, {e.end})")
            if len(e.values) != p:
                msg(f"subject {s.id}: epoch at {e.start} has {len(e.values)} values, schema has {p}")
        for a, b in zip(s.epochs, s.epochs[1:]):
            if b.start > a.end:
                msg(f"subject {s.id}: gap at ({a.end}, {b.start})")
            elif b.start < a.end:
                msg(f"subject {s.id}: overlap at ({b.start}, {a.end})")
        if s.epochs[-1].end != s.followup:
            msg(f"subject {s.id}: last epoch ends at {s.epochs[-1].end}, followup is {s.followup}")
        for j in range(p):
            if dataset.schema.is_categorical(j):
                nlab = len(dataset.schema.columns[j].labels)
                for e in s.epochs:
                    code = e.values[j]
                    if code != int(code) or not 0 <= code < nlab:
                        msg(f"subject {s.id}: column {dataset.schema.columns[j].name!r}: bad label code {code}")
                        break
    if dataset.n >= 1 and dataset.n_events == 0:
        msg("no observed events; baseline log-hazard undefined")
    return report
