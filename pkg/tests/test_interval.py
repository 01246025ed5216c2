import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecert.interval import (
    PI,
    Interval,
    IntervalError,
    cos_enclose,
    hull,
    make,
    pi_enclose,
    sin_enclose,
    sub_down,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def intervals(lo=-1e6, hi=1e6):
    return st.tuples(st.floats(lo, hi), st.floats(lo, hi)).map(lambda t: Interval(min(t), max(t)))


def test_make():
    iv = make(0, 1)
    assert (iv.lo, iv.hi) == (0.0, 1.0)
    assert make(0.5, 0.5).is_point()
    with pytest.raises(IntervalError):
        make(1, 0)
    with pytest.raises(IntervalError):
        make(0, math.inf)
    with pytest.raises(IntervalError):
        Interval(math.nan)


def test_immutable():
    iv = Interval(0, 1)
    with pytest.raises(AttributeError):
        iv.lo = 3.0


def test_add_encloses_with_few_rounding_steps():
    s = Interval(1, 2) + Interval(3, 4)
    assert s.lo <= 4 and s.hi >= 6
    assert s.hi - s.lo <= 2 + 4 * math.ulp(6.0)


def test_mul_sign_cases():
    p = Interval(-1, 2) * Interval(3, 4)
    assert p.lo <= -4 and p.hi >= 8
    assert p.lo > -4.0001 and p.hi < 8.0001


def test_div_by_zero_interval():
    with pytest.raises(IntervalError):
        Interval(1) / Interval(0, 1)
    q = Interval(1, 2) / Interval(4, 8)
    assert q.lo <= 0.125 and q.hi >= 0.5


def test_neg_and_scale():
    assert -Interval(1, 2) == Interval(-2, -1)
    s = Interval(1, 2).scale(-3)
    assert s.lo <= -6 and s.hi >= -3


def test_sub_down_exact_and_inexact():
    assert sub_down(0.0, 0.125) == -0.125
    assert sub_down(1.0, 1e-30) < 1.0


def test_pi_bracket():
    p = pi_enclose()
    assert p.lo == 3.141592653589793 and p.hi == 3.1415926535897936
    assert mpmath.mpf(p.lo) < mpmath.pi < mpmath.mpf(p.hi)
    assert 3.14159 <= p.lo and p.hi <= 3.14160
    four = p.scale(4)
    assert mpmath.mpf(four.lo) < 4 * mpmath.pi < mpmath.mpf(four.hi)


def test_cos_full_monotone_piece():
    c = cos_enclose(Interval(0, PI.hi))
    assert c.lo == -1.0 and c.hi == 1.0


def test_cos_quarter_pi():
    c = cos_enclose(PI / 4)
    assert math.sqrt(2) / 2 in c
    assert c.width < 1e-12


def test_cos_eighth_pi_exceeds_point_nine():
    c = cos_enclose(Interval(0, (PI / 8).hi))
    assert 0.9 < c.lo < math.cos(math.pi / 8)
    assert c.hi == 1.0


def test_large_arguments_give_unit_interval():
    assert cos_enclose(Interval(2.0**21)) == Interval(-1, 1)


def test_sin_extremum_included():
    s = sin_enclose(Interval(1.0, 2.0))
    assert s.hi == 1.0
    assert s.lo <= math.sin(1.0)


def _mp_contains(iv, value):
    return mpmath.mpf(iv.lo) <= value <= mpmath.mpf(iv.hi)


def _samples(iv, k=5, rng=np.random.default_rng(1)):
    pts = [iv.lo, iv.hi] + list(rng.uniform(iv.lo, iv.hi, size=k))
    return [mpmath.mpf(p) for p in pts]


@settings(max_examples=300, deadline=None)
@given(intervals(), intervals())
def test_arith_containment(a, b):
    for x in _samples(a, 3):
        for y in _samples(b, 3):
            assert _mp_contains(a + b, x + y)
            assert _mp_contains(a - b, x - y)
            assert _mp_contains(a * b, x * y)
            if not b.contains_zero():
                assert _mp_contains(a / b, x / y)


@settings(max_examples=300, deadline=None)
@given(intervals(-1e4, 1e4))
def test_trig_containment(a):
    c, s = cos_enclose(a), sin_enclose(a)
    assert -1.0 <= c.lo and c.hi <= 1.0
    for x in _samples(a):
        assert _mp_contains(c, mpmath.cos(x))
        assert _mp_contains(s, mpmath.sin(x))


@settings(max_examples=300, deadline=None)
@given(intervals(-100, 100), st.floats(0, 1), st.floats(0, 1))
def test_cos_monotone_in_inclusion(outer, s, t):
    a, b = sorted((outer.lo + s * (outer.hi - outer.lo), outer.lo + t * (outer.hi - outer.lo)))
    inner = Interval(a, b)
    ci, co = cos_enclose(inner), cos_enclose(outer)
    # allow the two-ulp widening of endpoint values
    assert ci.lo >= co.lo - 4 * math.ulp(1.0)
    assert ci.hi <= co.hi + 4 * math.ulp(1.0)


@settings(max_examples=500, deadline=None)
@given(st.floats(-1e3, 1e3))
def test_point_tightness(x):
    c = cos_enclose(Interval(x))
    v = math.cos(x)
    assert c.hi - c.lo <= 4 * math.ulp(v)


def test_hull():
    assert hull(Interval(0, 1), Interval(3, 4)) == Interval(0, 4)
