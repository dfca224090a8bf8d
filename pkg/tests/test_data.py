import numpy as np
import pytest

from hazboost.data import (CATEGORICAL, Column, DataError, Dataset, Epoch,
                           FunctionalSample, Schema, impute_dataset,
                           impute_terminal_jump, load_dataset, validate,
                           write_dataset)
from conftest import random_dataset


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


HEADER = "id,time,x,followup,event\n"


def test_load_locf_construction(tmp_path):
    path = write(tmp_path, HEADER + "1,0,0.3,,\n1,1.0,0.8,,\n1,,,2.0,0\n")
    ds = load_dataset(path)
    assert ds.n == 1
    s = ds.samples[0]
    assert s.followup == 2.0 and s.event is False
    assert [(e.start, e.end, e.values[0]) for e in s.epochs] == [(0.0, 1.0, 0.3), (1.0, 2.0, 0.8)]
    assert s.terminal_values is None


def test_load_empty_file(tmp_path):
    with pytest.raises(DataError, match="no samples"):
        load_dataset(write(tmp_path, ""))


def test_load_two_subjects_single_epoch(tmp_path):
    text = HEADER + "1,0,0.1,,\n1,,,1.0,1\n2,0,0.2,,\n2,,,3.0,0\n"
    ds = load_dataset(write(tmp_path, text))
    assert ds.n == 2
    assert all(len(s.epochs) == 1 for s in ds.samples)
    assert ds.samples[0].event and not ds.samples[1].event


def test_load_terminal_covariates(tmp_path):
    text = HEADER + "1,0,0.3,,\n1,,0.9,2.0,1\n"
    ds = load_dataset(write(tmp_path, text))
    assert ds.samples[0].terminal_values == (0.9,)


@pytest.mark.parametrize("rows,match", [
    ("1,0,0.3,,\n1,0,0.5,,\n1,,,2.0,1\n", "non-monotone"),
    ("1,0,abc,,\n1,,,2.0,1\n", "not a number"),
    ("1,,,2.0,1\n", "zero epochs"),
    ("1,0,0.3,,\n", "missing terminal"),
    ("1,0,0.3,,\n1,,,2.0,1\n1,,,2.0,1\n", "more than one terminal"),
    ("1,3.0,0.3,,\n1,,,2.0,1\n", "not before followup"),
    ("1,0,0.3,,\n1,,,2.0,2\n", "event must be 0 or 1"),
    ("1,0,0.3\n", "expected 5 fields"),
])
def test_load_errors(tmp_path, rows, match):
    with pytest.raises(DataError, match=match):
        load_dataset(write(tmp_path, HEADER + rows))


def test_load_reports_line_numbers(tmp_path):
    path = write(tmp_path, HEADER + "1,0,0.3,,\n1,0.5,oops,,\n1,,,2.0,1\n")
    with pytest.raises(DataError, match=r"d\.csv:3.*subject 1"):
        load_dataset(path)


def test_load_categorical_labels(tmp_path):
    text = "id,time,g,followup,event\n1,0,b,,\n1,0.5,a,,\n1,,,1.0,1\n"
    schema = Schema((Column("g", CATEGORICAL),))
    ds = load_dataset(write(tmp_path, text), schema)
    assert ds.schema.columns[0].labels == ("a", "b")
    assert [e.values[0] for e in ds.samples[0].epochs] == [1.0, 0.0]


def test_load_unknown_label(tmp_path):
    text = "id,time,g,followup,event\n1,0,zz,,\n1,,,1.0,1\n"
    schema = Schema((Column("g", CATEGORICAL, ("a", "b")),))
    with pytest.raises(DataError, match="unknown categorical label 'zz'"):
        load_dataset(write(tmp_path, text), schema)


def test_impute_midpoint_jump():
    s = FunctionalSample("1", (Epoch(0.0, 1.0, (0.3,)), Epoch(1.0, 2.0, (0.8,))),
                         2.0, True, terminal_values=(0.9,))
    out = impute_terminal_jump(s)
    assert [(e.start, e.end, e.values[0]) for e in out.epochs] == [
        (0.0, 1.0, 0.3), (1.0, 1.5, 0.8), (1.5, 2.0, 0.9)]


def test_impute_noop_when_terminal_equal():
    s = FunctionalSample("1", (Epoch(0.0, 2.0, (0.8,)),), 2.0, True,
                         terminal_values=(0.8,))
    assert impute_terminal_jump(s) is s


def test_impute_noop_single_measurement_same_value():
    s = FunctionalSample("1", (Epoch(0.0, 2.0, (0.3,)),), 2.0, False,
                         terminal_values=(0.3,))
    assert impute_terminal_jump(s) is s


def test_impute_single_measurement_distinct_terminal():
    s = FunctionalSample("1", (Epoch(0.0, 2.0, (0.3,)),), 2.0, True,
                         terminal_values=(0.7,))
    out = impute_terminal_jump(s)
    assert [(e.start, e.end) for e in out.epochs] == [(0.0, 1.0), (1.0, 2.0)]
    assert out.epochs[1].values == (0.7,)


def test_impute_idempotent():
    rng = np.random.default_rng(0)
    for _ in range(50):
        fu = float(rng.uniform(0.5, 3.0))
        t0 = float(rng.uniform(0, fu * 0.9))
        s = FunctionalSample("1", (Epoch(0.0, t0, (0.1,)), Epoch(t0, fu, (0.2,))) if t0 > 0
                             else (Epoch(0.0, fu, (0.2,)),),
                             fu, bool(rng.uniform() < 0.5),
                             terminal_values=(float(rng.uniform()),))
        once = impute_terminal_jump(s)
        twice = impute_terminal_jump(once)
        assert once == twice


def test_epochs_cover_followup_after_load_and_impute(tmp_path):
    text = HEADER + "1,0,0.3,,\n1,0.7,0.1,,\n1,,0.5,2.5,1\n2,0,0.2,,\n2,,,1.0,0\n"
    ds = impute_dataset(load_dataset(write(tmp_path, text)))
    for s in ds.samples:
        sweep = 0.0
        for e in s.epochs:
            assert e.start == sweep
            assert e.end > e.start
            sweep = e.end
        assert sweep == s.followup


def test_validate_clean():
    ds = random_dataset(np.random.default_rng(1), n=5, p=2)
    assert validate(ds).ok


def test_validate_gap_overlap_and_followup():
    schema = Schema((Column("x"),))
    gap = FunctionalSample("g", (Epoch(0.0, 1.0, (0.1,)), Epoch(1.5, 2.0, (0.2,))), 2.0, True)
    overlap = FunctionalSample("o", (Epoch(0.0, 1.0, (0.1,)), Epoch(0.9, 2.0, (0.2,))), 2.0, True)
    bad_fu = FunctionalSample("f", (Epoch(0.0, 1.0, (0.1,)),), -1.0, True)
    report = validate(Dataset(schema, (gap, overlap, bad_fu)))
    text = str(report)
    assert "gap" in text and "overlap" in text and "not positive" in text


def test_validate_no_events():
    schema = Schema((Column("x"),))
    s = FunctionalSample("1", (Epoch(0.0, 1.0, (0.1,)),), 1.0, False)
    report = validate(Dataset(schema, (s,)))
    assert any("no observed events" in m for m in report.messages)


def test_roundtrip_write_load(tmp_path):
    rng = np.random.default_rng(7)
    for categorical in (False, True):
        ds = random_dataset(rng, n=12, p=3, categorical=categorical)
        path = tmp_path / f"rt{int(categorical)}.csv"
        write_dataset(ds, path)
        back = load_dataset(path, ds.schema)
        assert back.schema == ds.schema
        for a, b in zip(ds.samples, back.samples):
            assert a.epochs == b.epochs
            assert a.followup == b.followup
            assert a.event == b.event


def test_roundtrip_preserves_terminal_values(tmp_path):
    schema = Schema((Column("x"),))
    s = FunctionalSample("1", (Epoch(0.0, 1.0, (0.25,)),), 1.0, True,
                         terminal_values=(0.75,))
    path = tmp_path / "t.csv"
    write_dataset(Dataset(schema, (s,)), path)
    back = load_dataset(path)
    assert back.samples[0].terminal_values == (0.75,)
