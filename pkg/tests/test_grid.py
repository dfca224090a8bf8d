import numpy as np
import pytest

from hazboost.data import Column, Dataset, Epoch, FunctionalSample, Schema
from hazboost.grid import build_grid, quantile_cuts
from conftest import random_dataset


def brute_force_cuts(values, weights, q):
    """Independent oracle: lowest value whose weighted CDF reaches k/q,
    interior values only."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    uniq = np.unique(values)
    cuts = []
    for k in range(1, q):
        for v in uniq:
            if weights[values <= v].sum() >= k / q * total:
                cuts.append(v)
                break
    cuts = sorted(set(cuts))
    return [c for c in cuts if values.min() < c < values.max()]


def one_epoch_dataset(values, durations):
    schema = Schema((Column("x"),))
    samples = tuple(
        FunctionalSample(str(i), (Epoch(0.0, d, (v,)),), d, True)
        for i, (v, d) in enumerate(zip(values, durations)))
    return Dataset(schema, samples)


def test_deciles_of_1_to_100():
    values = np.arange(1.0, 101.0)
    ds = one_epoch_dataset(values, np.ones(100))
    g = build_grid(ds, num_quantiles=10)
    assert list(g.covariate_cuts[0]) == [10, 20, 30, 40, 50, 60, 70, 80, 90]
    assert list(g.covariate_cuts[0]) == brute_force_cuts(values, np.ones(100), 10)


def test_constant_column_has_no_cuts():
    ds = one_epoch_dataset(np.full(20, 0.5), np.ones(20))
    g = build_grid(ds)
    assert g.covariate_cuts[0].size == 0


def test_two_quantiles_single_weighted_median():
    rng = np.random.default_rng(3)
    values = rng.uniform(size=30)
    durations = rng.uniform(0.1, 2.0, size=30)
    g = build_grid(one_epoch_dataset(values, durations), num_quantiles=2)
    assert list(g.covariate_cuts[0]) == brute_force_cuts(values, durations, 2)


def test_matches_brute_force_on_random_data():
    rng = np.random.default_rng(11)
    for q in (2, 4, 10):
        values = rng.choice(np.round(rng.uniform(size=8), 3), size=50)
        durations = rng.uniform(0.1, 1.0, size=50)
        got = list(quantile_cuts(values, durations, q))
        assert got == brute_force_cuts(values, durations, q)


def test_cuts_strictly_inside_range_and_both_sides_nonempty():
    rng = np.random.default_rng(5)
    for _ in range(20):
        ds = random_dataset(rng, n=15, p=2)
        g = build_grid(ds, num_quantiles=6)
        for j in range(2):
            values = np.array([e.values[j] for s in ds.samples for e in s.epochs])
            for c in g.covariate_cuts[j]:
                assert values.min() < c < values.max()
                assert np.any(values <= c) and np.any(values > c)
        times = np.concatenate(
            [[e.start for s in ds.samples for e in s.epochs],
             [e.end for s in ds.samples for e in s.epochs],
             [s.followup for s in ds.samples]])
        for c in g.time_cuts:
            assert times.min() < c < times.max()


def test_duration_weighting_matters():
    values = np.array([0.0, 1.0, 2.0, 3.0])
    durations = np.array([1.0, 1.0, 10.0, 1.0])
    ds = one_epoch_dataset(values, durations)
    weighted = build_grid(ds, num_quantiles=2).covariate_cuts[0]
    unweighted = build_grid(ds, num_quantiles=2, weighted=False).covariate_cuts[0]
    assert list(weighted) == [2.0]
    assert list(unweighted) == [1.0]


def test_time_cuts_pool_boundaries_and_followups():
    schema = Schema((Column("x"),))
    s1 = FunctionalSample("1", (Epoch(0.0, 1.0, (0.1,)), Epoch(1.0, 4.0, (0.2,))), 4.0, True)
    s2 = FunctionalSample("2", (Epoch(0.0, 2.0, (0.3,)),), 2.0, True)
    g = build_grid(Dataset(schema, (s1, s2)), num_quantiles=4)
    pool = np.array([0, 1, 0, 1, 4, 4, 0, 2, 2])
    assert list(g.time_cuts) == brute_force_cuts(pool, np.ones(pool.size), 4)


def test_grid_deterministic():
    ds = random_dataset(np.random.default_rng(9), n=25, p=3)
    a = build_grid(ds)
    b = build_grid(ds)
    assert np.array_equal(a.time_cuts, b.time_cuts)
    for ca, cb in zip(a.covariate_cuts, b.covariate_cuts):
        assert np.array_equal(ca, cb)


def test_categorical_axis_holds_labels():
    ds = random_dataset(np.random.default_rng(2), n=10, p=2, categorical=True)
    g = build_grid(ds)
    assert g.covariate_cuts[1] == ("a", "b", "c")


def test_bad_quantile_count():
    ds = random_dataset(np.random.default_rng(0), n=5)
    with pytest.raises(ValueError):
        build_grid(ds, num_quantiles=0)
