import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppclust.pointproc import (
    ClusterEvent,
    Interval,
    ObservableSet,
    PointPattern,
    TestFunction,
    count,
    in_cluster_event,
    integrate,
    laplace_empirical,
    max_modulus,
    tent_family,
)

P = PointPattern([0.5, -2.0, 3.0])

points = st.lists(
    st.floats(-50, 50, allow_nan=False).filter(lambda v: v != 0), max_size=30
)


# ----------------------------------------------------------------------------
# sets and parsing


def test_parse_forms():
    b = ObservableSet.parse("[-inf,-2)u(2,inf]")
    assert len(b.intervals) == 2
    assert b.gap == 2.0
    assert str(ObservableSet.parse(str(b))) == str(b)
    assert ObservableSet.parse("(1,inf]") == ObservableSet.above(1.0)
    assert ObservableSet.outside(1.0) == ObservableSet.parse("[-inf,-1)u(1,inf]")


def test_sets_must_avoid_zero():
    with pytest.raises(ValueError):
        ObservableSet.parse("(0,1]")
    with pytest.raises(ValueError):
        ObservableSet.parse("[-1,1]")
    with pytest.raises(ValueError):
        ObservableSet.parse("(2,1]")
    with pytest.raises(ValueError):
        ObservableSet.parse("(1,3]u(2,4]")
    with pytest.raises(ValueError):
        ObservableSet.parse("garbage")


def test_intervals_are_sorted():
    b = ObservableSet([Interval(2.0, 3.0, True, True), Interval(-5.0, -1.0, True, False)])
    assert b.intervals[0].lo == -5.0


def test_cluster_event_parse():
    ev = ClusterEvent.parse("(1,inf]>=2; [-inf,-3)>=1")
    assert ev.d == 2 and ev.ks == (2, 1)
    assert ClusterEvent.parse(str(ev)) == ev
    with pytest.raises(ValueError):
        ClusterEvent.parse("(1,inf]>=0")
    with pytest.raises(ValueError):
        ClusterEvent.parse("(1,inf]")
    with pytest.raises(ValueError):
        ClusterEvent.parse("")


# ----------------------------------------------------------------------------
# count / max_modulus / in_cluster_event


def test_count_examples():
    assert count(P, ObservableSet.outside(1.0)) == 2
    assert count(P, ObservableSet.parse("(3,inf]")) == 0
    assert count(P, ObservableSet.parse("[3,inf]")) == 1
    assert count(PointPattern([2.0, 2.0, 5.0]), ObservableSet.above(1.0)) == 3


def test_max_modulus_examples():
    assert max_modulus(PointPattern([0.5, -2.0, 1.0])) == 2.0
    assert max_modulus(PointPattern()) == 0.0


def test_in_cluster_event_examples():
    ev = ClusterEvent.parse("(1,inf]>=2")
    assert in_cluster_event(PointPattern([2.0, 2.0, 5.0]), ev)
    assert not in_cluster_event(PointPattern([2.0]), ev)
    assert not in_cluster_event(PointPattern(), ev)


def test_pattern_rejects_zero():
    with pytest.raises(ValueError):
        PointPattern([1.0, 0.0])


@given(points, st.floats(0.01, 40))
@settings(max_examples=100, deadline=None)
def test_max_modulus_iff_tail_event(pts, x):
    p = PointPattern(pts)
    assert (max_modulus(p) > x) == (count(p, ObservableSet.outside(x)) >= 1)
    assert (max_modulus(p) > x) == in_cluster_event(p, ClusterEvent.tail(x))


@given(points, st.floats(0.1, 10), st.floats(0.1, 10))
@settings(max_examples=100, deadline=None)
def test_count_additive_over_disjoint_sets(pts, a, b):
    lo, hi = sorted((a, b + a + 0.1))
    p = PointPattern(pts)
    whole = ObservableSet.parse(f"({lo},inf]")
    left = ObservableSet.parse(f"({lo},{hi}]")
    right = ObservableSet.parse(f"({hi},inf]")
    assert count(p, whole) == count(p, left) + count(p, right)


@given(points, points)
@settings(max_examples=100, deadline=None)
def test_cluster_event_monotone(pts, extra):
    ev = ClusterEvent.parse("(1,inf]>=2; [-inf,-3)>=1")
    if in_cluster_event(PointPattern(pts), ev):
        assert in_cluster_event(PointPattern(pts + extra), ev)


# ----------------------------------------------------------------------------
# test functions


def test_integrate_examples():
    f = TestFunction([(1.0, 0.0), (2.0, 1.0), (4.0, 0.0)])
    assert f(3.0) == pytest.approx(0.5)
    assert integrate(PointPattern([2.0, 3.0]), f) == pytest.approx(1.5)
    assert integrate(P, TestFunction.zero()) == 0.0


@given(points)
@settings(max_examples=100, deadline=None)
def test_integrate_minorant(pts):
    # f >= 1/2 on [1.5, 2.5]
    f = TestFunction.tent(1.0, 3.0, 1.0, 2.0)
    p = PointPattern(pts)
    assert integrate(p, f) >= 0.5 * count(p, ObservableSet.parse("[1.5,2.5]")) - 1e-12


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction([(-1.0, 0.0), (0.5, 1.0), (1.0, 0.0)])
    with pytest.raises(ValueError):
        TestFunction([(1.0, 0.0), (2.0, -1.0), (3.0, 0.0)])
    with pytest.raises(ValueError):
        TestFunction([(1.0, 1.0), (2.0, 0.0)])
    assert TestFunction.parse("tent:1,3,1,2")(2.0) == 1.0
    with pytest.raises(ValueError):
        TestFunction.parse("box:1,2")


def test_tent_family():
    fam = tent_family()
    assert len(fam) == 12
    assert sum(f.xs[0] > 0 for f in fam) == 6
    assert min(abs(f.xs).min() for f in fam) == pytest.approx(0.05)
    assert max(abs(f.xs).max() for f in fam) == pytest.approx(20.0)


# ----------------------------------------------------------------------------
# laplace_empirical


def test_laplace_empty_patterns():
    est = laplace_empirical([PointPattern()] * 10, TestFunction.tent(1, 3))
    assert est.value == 1.0 and est.stderr == 0.0


def test_laplace_repeated_pattern():
    f = TestFunction.tent(1, 3, 1, 2)
    p = PointPattern([2.0, 2.5])
    est = laplace_empirical([p] * 25, f)
    assert est.value == pytest.approx(math.exp(-1.5)) and est.stderr == 0.0


def test_laplace_needs_two():
    with pytest.raises(ValueError):
        laplace_empirical([], TestFunction.tent(1, 3))
    with pytest.raises(ValueError):
        laplace_empirical([PointPattern()], TestFunction.tent(1, 3))


@given(st.lists(points, min_size=2, max_size=10))
@settings(max_examples=50, deadline=None)
def test_laplace_in_unit_interval(pats):
    est = laplace_empirical([PointPattern(p) for p in pats], TestFunction.tent(0.5, 5.0, 3.0))
    assert 0.0 < est.value <= 1.0
