import numpy as np

from hazboost.data import Column, Dataset, Epoch, FunctionalSample, Schema


def random_dataset(rng, n=20, p=1, categorical=False, max_epochs=4, horizon=2.0,
                   event_prob=0.7):
    """A small valid dataset with piecewise-constant trajectories.

    Guaranteed to contain at least one event.  Categorical mode makes the
    last column a 3-label factor.
    """
    cols = []
    for j in range(p):
        if categorical and j == p - 1:
            cols.append(Column(f"c{j}", "categorical", ("a", "b", "c")))
        else:
            cols.append(Column(f"x{j}", "continuous"))
    schema = Schema(tuple(cols))

    samples = []
    for i in range(n):
        followup = float(rng.uniform(0.2, horizon))
        k = int(rng.integers(1, max_epochs + 1))
        bounds = np.concatenate([[0.0], np.sort(rng.uniform(0, followup, size=k - 1)),
                                 [followup]])
        bounds = np.unique(bounds)
        epochs = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            values = []
            for j in range(p):
                if categorical and j == p - 1:
                    values.append(float(rng.integers(0, 3)))
                else:
                    values.append(float(rng.uniform()))
            epochs.append(Epoch(float(a), float(b), tuple(values)))
        event = bool(rng.uniform() < event_prob) or i == 0
        samples.append(FunctionalSample(str(i + 1), tuple(epochs), followup, event))
    return Dataset(schema, tuple(samples))
