import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sofafl.metrics import MetricsReport, build_report, jain_index


def test_jain_equal_values():
    assert jain_index([0.7] * 5) == pytest.approx(1.0)


def test_jain_two_values():
    assert jain_index([0.5, 1.0]) == pytest.approx(0.9)


def test_jain_single_nonzero_is_one_over_n():
    assert jain_index([0, 0, 0.8, 0]) == pytest.approx(0.25)


@pytest.mark.parametrize("bad", [[], [0.0, 0.0], [-0.1, 0.5]])
def test_jain_rejects(bad):
    with pytest.raises(ValueError):
        jain_index(bad)


def test_report_constant_vector():
    r = build_report([0.9] * 20)
    assert r.mean_accuracy == pytest.approx(0.9) and r.min_accuracy == 0.9
    assert r.accuracy_gap == 0 and r.jain_index == pytest.approx(1.0)
    assert r.bottom_decile_mean == pytest.approx(0.9)


def test_report_reproduces_mean_and_std_column():
    # half the clients at m - s and half at m + s: mean m, population std s
    m, s = 0.8873, 0.1251
    r = build_report([m - s] * 10 + [m + s] * 10)
    assert r.mean_accuracy == pytest.approx(m, abs=1e-12)
    assert r.std_deviation == pytest.approx(s, abs=1e-12)


def test_bottom_decile_uses_ceiling():
    r = build_report([0.1, 0.2] + [1.0] * 9)   # n=11 -> 2 lowest
    assert r.bottom_decile_mean == pytest.approx(0.15)


def test_report_round_trip():
    r = build_report({3: 0.5, 1: 0.75})
    again = MetricsReport.from_dict(r.to_dict())
    assert again == r


acc_lists = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=30)


@settings(max_examples=100)
@given(acc_lists, st.randoms())
def test_report_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = build_report(values), build_report(shuffled)
    for name in ("mean_accuracy", "std_deviation", "min_accuracy", "accuracy_gap", "jain_index",
                 "bottom_decile_mean"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12, abs=1e-15)


@settings(max_examples=100)
@given(acc_lists, st.floats(0.01, 1.0))
def test_jain_scale_invariant(values, c):
    assert jain_index(np.array(values) * c) == pytest.approx(jain_index(values), rel=1e-10)


@settings(max_examples=100)
@given(acc_lists)
def test_report_invariants(values):
    r = build_report(values)
    n = len(values)
    assert 1 / n - 1e-12 <= r.jain_index <= 1 + 1e-12
    assert r.min_accuracy - 1e-12 <= r.mean_accuracy <= r.max_accuracy + 1e-12
    assert r.accuracy_gap >= 0
