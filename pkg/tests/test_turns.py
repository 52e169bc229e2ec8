import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from flatflow.errors import BadFraction, RationalitySnapAmbiguous, RationalitySnapFailure
from flatflow.turns import (
    IDENTITY,
    OrthogonalPart,
    RationalTurn,
    snap_rational,
    snap_turn_of_angle,
    wrap_angle,
)

fractions = st.builds(Fraction, st.integers(-50, 50), st.integers(1, 24))
parts = st.builds(lambda f, r: OrthogonalPart(RationalTurn.of(f), r), fractions, st.booleans())


def test_turn_reduces_mod_one():
    assert RationalTurn.of(Fraction(5, 4)) == RationalTurn(1, 4)
    assert RationalTurn.of(-0.25) == RationalTurn(3, 4)
    assert str(RationalTurn.of(Fraction(6, 8))) == "3/4"


@pytest.mark.parametrize("text", ["1/2/3", "2/4", "4/3", "-1/2", "a/b", "1", "1/0", ""])
def test_turn_parse_rejects(text):
    with pytest.raises(BadFraction):
        RationalTurn.parse(text)


def test_turn_parse_accepts():
    assert RationalTurn.parse("0/1") == RationalTurn(0, 1)
    assert RationalTurn.parse("3/8").radians == pytest.approx(3 * math.pi / 4)


def _matmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))


@given(parts, parts)
def test_composition_matches_matrices(g, h):
    got = (g @ h).matrix()
    want = _matmul(g.matrix(), h.matrix())
    assert all(abs(got[i][j] - want[i][j]) < 1e-12 for i in range(2) for j in range(2))


@given(parts, parts, parts)
def test_group_laws(a, b, c):
    assert (a @ b) @ c == a @ (b @ c)
    assert a @ a.inverse() == IDENTITY
    assert a @ IDENTITY == a == IDENTITY @ a
    assert (a @ b).det == a.det * b.det


@given(parts, st.floats(-10, 10))
def test_map_angle_agrees_with_apply(g, ang):
    x, y = g.apply((math.cos(ang), math.sin(ang)))
    assert abs(wrap_angle(math.atan2(y, x) - g.map_angle(ang))) < 1e-12


def test_reflection_axis():
    # reflection with turn t fixes the line at angle pi*t
    g = OrthogonalPart.reflection(Fraction(1, 4))
    v = (math.cos(math.pi / 4), math.sin(math.pi / 4))
    x, y = g.apply(v)
    assert abs(x - v[0]) < 1e-15 and abs(y - v[1]) < 1e-15


def test_quarter_turn_matrices_are_exact():
    assert OrthogonalPart.rotation(Fraction(1, 4)).matrix() == ((0.0, -1.0), (1.0, 0.0))
    assert OrthogonalPart.reflection(Fraction(1, 2)).matrix() == ((-1.0, 0.0), (0.0, 1.0))


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.remainder(w - a, 2 * math.pi)) < 1e-9


def test_snap_rational():
    assert snap_rational(1 / 3 + 1e-12, 1e-10, 3600) == Fraction(1, 3)
    assert snap_rational(1 / math.pi, 1e-12, 3600) is None
    with pytest.raises(RationalitySnapAmbiguous):
        snap_rational(0.5, 0.01, 100)


def test_one_radian_does_not_snap():
    with pytest.raises(RationalitySnapFailure):
        snap_turn_of_angle(1.0, 1e-9, 3600, period=math.pi)
    # the nearest candidate with a small denominator misses by far more than the tolerance
    best = Fraction(1 / math.pi).limit_denominator(3600)
    assert best == Fraction(113, 355)
    assert abs(float(best) * math.pi - 1.0) > 1e-8
