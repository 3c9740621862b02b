import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procqx.process_data import (
    FEATURE_NAMES,
    DataError,
    LabeledDataset,
    apply_standardizer,
    extract_features,
    fit_standardizer,
    invert_standardizer,
    load_event_log,
    read_dataset,
    stratified_split,
    write_dataset,
)

EVENTS_HEADER = "case_id,activity,start_time,duration_s,energy_kwh\n"
CASES_HEADER = "case_id,planned_setup_time_s,planned_production_duration_s,oee,employee_productivity,quality_label\n"


def _log(events, cases):
    return load_event_log(io.StringIO(EVENTS_HEADER + events), io.StringIO(CASES_HEADER + cases))


WELL_FORMED_EVENTS = """\
C1,Milling,2021-03-01T10:00:00Z,300,3.0
C1,Sawing,2021-03-01T08:00:00Z,100,1.0
C2,Turning,2021-03-02T08:00:00Z,50,0.5
C1,Drilling,2021-03-01T09:00:00Z,200,2.0
C2,Grinding,2021-03-02T09:00:00Z,70,0.7
C2,Assembly,2021-03-02T07:00:00Z,30,0.3
"""
WELL_FORMED_CASES = """\
C1,1200,3600,0.82,0.75,Passed
C2,600,1800,0.44,0.47,Failed
"""


def test_load_orders_events_by_time():
    log = _log(WELL_FORMED_EVENTS, WELL_FORMED_CASES)
    assert len(log) == 2
    for _, events in log.cases.values():
        assert len(events) == 3
        times = [e.start_time for e in events]
        assert times == sorted(times)
    assert [e.activity for e in log.cases["C1"][1]] == ["Sawing", "Drilling", "Milling"]


def test_unknown_case_is_named():
    with pytest.raises(DataError, match="C9"):
        _log(WELL_FORMED_EVENTS + "C9,Milling,2021-03-01T10:00:00Z,1,1\n", WELL_FORMED_CASES)


def test_oee_out_of_range():
    with pytest.raises(DataError, match="oee"):
        _log(WELL_FORMED_EVENTS, "C1,1200,3600,1.3,0.75,Passed\nC2,600,1800,0.44,0.47,Failed\n")


def test_duplicate_case_rejected():
    with pytest.raises(DataError, match="duplicate"):
        _log(WELL_FORMED_EVENTS, WELL_FORMED_CASES + "C1,1,1,0.5,0.5,Passed\n")


def test_malformed_row_reports_line_number():
    bad = WELL_FORMED_EVENTS.replace("C2,Turning,2021-03-02T08:00:00Z,50,0.5", "C2,Turning,2021-03-02T08:00:00Z,abc,0.5")
    with pytest.raises(DataError, match="line 4"):
        _log(bad, WELL_FORMED_CASES)


def test_negative_duration_rejected():
    with pytest.raises(DataError, match="duration"):
        _log(WELL_FORMED_EVENTS + "C1,X,2021-03-01T11:00:00Z,-5,1\n", WELL_FORMED_CASES)


def test_extract_means_and_counts():
    data = extract_features(_log(WELL_FORMED_EVENTS, WELL_FORMED_CASES))
    assert data.feature_names == FEATURE_NAMES
    np.testing.assert_array_equal(data.X[0], [3, 200, 2.0, 1200, 3600, 0.82, 0.75])
    np.testing.assert_allclose(data.X[1], [3, 50, 0.5, 600, 1800, 0.44, 0.47])
    assert data.labels.tolist() == ["Passed", "Failed"]


def test_single_event_case_is_identity():
    data = extract_features(_log("C1,Milling,2021-03-01T10:00:00Z,123.5,4.25\n", "C1,1,2,0.5,0.5,\n"))
    assert data.X[0, :3].tolist() == [1.0, 123.5, 4.25]
    assert data.labels is None


def test_fifty_cases_fifty_rows():
    events = "".join(f"C{i},Milling,2021-03-01T10:00:00Z,{i + 1},1\n" for i in range(50))
    cases = "".join(f"C{i},1,2,0.5,0.5,Passed\n" for i in range(50))
    data = extract_features(_log(events, cases))
    assert data.X.shape == (50, 7)


def test_mixed_labels_refused():
    with pytest.raises(DataError, match="partially labeled"):
        extract_features(_log(WELL_FORMED_EVENTS, "C1,1200,3600,0.82,0.75,Passed\nC2,600,1800,0.44,0.47,\n"))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1e5), st.floats(0, 100)), min_size=1, max_size=12), st.randoms())
def test_features_are_permutation_invariant(steps, rnd):
    def log_for(order):
        events = "".join(f"C1,A,2021-03-01T{8 + i % 10:02d}:00:00Z,{d!r},{e!r}\n" for i, (d, e) in enumerate(order))
        return extract_features(_log(events, "C1,1,2,0.5,0.5,Passed\n"))

    shuffled = list(steps)
    rnd.shuffle(shuffled)
    a, b = log_for(steps).X[0], log_for(shuffled).X[0]
    assert a[0] == b[0] == len(steps)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    total = math.fsum(d for d, _ in steps)
    assert a[1] * a[0] == pytest.approx(total, rel=1e-9, abs=1e-9)


def _balanced(n_pass, n_fail, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_pass + n_fail, 7))
    return LabeledDataset(X, np.array(["Passed"] * n_pass + ["Failed"] * n_fail))


def test_split_sizes_and_balance():
    data = _balanced(50, 50)
    parts = stratified_split(data, (0.6, 0.2, 0.2), seed=7)
    assert [len(p) for p in parts] == [60, 20, 20]
    for p in parts:
        n_pass = int((p.labels == "Passed").sum())
        assert abs(n_pass - len(p) / 2) <= 1
    seen = np.concatenate([p.X for p in parts])
    assert sorted(map(tuple, seen)) == sorted(map(tuple, data.X))


def test_split_is_deterministic():
    data = _balanced(50, 50)
    a = stratified_split(data, (0.6, 0.2, 0.2), seed=7)
    b = stratified_split(data, (0.6, 0.2, 0.2), seed=7)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa.X, pb.X)


def test_split_ratios_must_sum_to_one():
    with pytest.raises(DataError, match="sum to 1"):
        stratified_split(_balanced(10, 10), (0.5, 0.5, 0.1), seed=0)


def test_split_needs_enough_rows_per_class():
    with pytest.raises(DataError, match="fewer than 3 splits"):
        stratified_split(_balanced(10, 2), (0.6, 0.2, 0.2), seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 80), st.integers(3, 80), st.integers(0, 10_000),
       st.sampled_from([(0.6, 0.2, 0.2), (0.7, 0.15, 0.15), (0.34, 0.33, 0.33), (0.8, 0.1, 0.1)]))
def test_split_proportion_bound(n_pass, n_fail, seed, ratios):
    data = _balanced(n_pass, n_fail)
    parts = stratified_split(data, ratios, seed)
    assert sum(len(p) for p in parts) == len(data)
    frac = n_pass / len(data)
    for p in parts:
        if len(p):
            assert abs((p.labels == "Passed").mean() - frac) <= 1 / len(p) + 1e-12


def test_standardizer_population_moments():
    data = LabeledDataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), feature_names=("a", "b"))
    params = fit_standardizer(data)
    assert params.mean.tolist() == [2.0, 5.0]
    assert params.std[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
    assert params.std[1] == 1.0
    z = apply_standardizer(params, data).X
    np.testing.assert_allclose(z[:, 0], [-math.sqrt(1.5), 0, math.sqrt(1.5)], atol=1e-15)
    assert z[:, 1].tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.integers(0, 1000))
def test_standardizer_moments_and_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(loc=rng.uniform(-1e3, 1e3, 7), scale=rng.uniform(1e-2, 1e3, 7), size=(n, 7))
    data = LabeledDataset(X)
    params = fit_standardizer(data)
    z = apply_standardizer(params, data).X
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-9)
    back = invert_standardizer(params, apply_standardizer(params, data)).X
    np.testing.assert_allclose(back, X, rtol=1e-12, atol=1e-12 * np.abs(X).max())


def test_dataset_csv_round_trip():
    data = _balanced(4, 3)
    buf = io.StringIO()
    write_dataset(LabeledDataset(data.X, data.labels, FEATURE_NAMES), buf)
    buf.seek(0)
    back = read_dataset(buf)
    np.testing.assert_array_equal(back.X, data.X)
    assert back.labels.tolist() == data.labels.tolist()


def test_dataset_csv_rejects_wrong_header():
    with pytest.raises(DataError, match="feature columns"):
        read_dataset(io.StringIO("a,b,label\n1,2,Passed\n"))
