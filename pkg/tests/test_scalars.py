"""Scalar kernel: frozen examples and ring properties."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckq.scalars import (
    IMAG,
    KEEP,
    NIL,
    UNIT,
    Atom,
    GaussianRational,
    ScalarExpr,
    UndefinedContraction,
    VSeries,
    parse_assignment,
)

G = GaussianRational.of
I = G(0, 1)


def poly(order, nvars, entries, nil=frozenset()):
    """Series from {(vpow, jexp): coeff} with exact coefficients."""
    s = VSeries(order, nvars, nil=nil)
    for (p, e), c in entries.items():
        s.coeffs[p][tuple(e)] = c
    return s


def test_gaussian_arithmetic():
    a = G(1, 2)
    b = G(Fraction(1, 3), -1)
    assert a * b == G(Fraction(1, 3) + 2, Fraction(2, 3) - 1)
    assert (a * a.inverse()) == G(1)
    assert I * I == G(-1)
    assert I ** 3 == G(0, -1)
    assert a.conjugate() == G(1, -2)


def test_series_mul_polynomial_identity():
    # (1 + v)(1 - v) at order 2 -> 1 - v^2
    one_plus = poly(2, 1, {(0, (0,)): G(1), (1, (0,)): G(1)})
    one_minus = poly(2, 1, {(0, (0,)): G(1), (1, (0,)): G(-1)})
    assert one_plus * one_minus == poly(2, 1, {(0, (0,)): G(1), (2, (0,)): G(-1)})


def test_series_mul_monomials():
    a = poly(2, 2, {(1, (1, 0)): G(1)})
    b = poly(2, 2, {(1, (0, 1)): G(1)})
    assert a * b == poly(2, 2, {(2, (1, 1)): G(1)})


def test_series_mul_order_mismatch():
    with pytest.raises(ValueError):
        VSeries.one(2, 1) * VSeries.one(3, 1)


def test_cosh_sinh_pythagoras_order8():
    c = ScalarExpr.atom(1, "cosh", (1,)).expand(8)
    s = ScalarExpr.atom(1, "sinh", (1,)).expand(8)
    assert (c * c - s * s) == VSeries.one(8, 1)


def test_series_invert():
    assert VSeries.one(4, 1).invert() == VSeries.one(4, 1)
    c = ScalarExpr.atom(1, "cosh", (1,)).expand(6)
    assert c.invert() * c == VSeries.one(6, 1)
    one_plus = poly(3, 1, {(0, (0,)): G(1), (1, (0,)): G(1)})
    expect = poly(3, 1, {(0, (0,)): G(1), (1, (0,)): G(-1),
                         (2, (0,)): G(1), (3, (0,)): G(-1)})
    assert one_plus.invert() == expect


def test_series_invert_requires_monomial_constant():
    bad = poly(3, 1, {(0, (1,)): G(1)})
    with pytest.raises(ValueError):
        bad.invert()
    bad2 = poly(3, 1, {(1, (0,)): G(1)})
    with pytest.raises(ValueError):
        bad2.invert()


# Taylor expansions, frozen by direct factorial arithmetic.

def test_expand_cosh():
    got = ScalarExpr.atom(2, "cosh", (1, 1)).expand(4)
    expect = poly(4, 2, {
        (0, (0, 0)): G(1),
        (2, (2, 2)): G(Fraction(1, 2)),
        (4, (4, 4)): G(Fraction(1, 24)),
    })
    assert got == expect


def test_expand_sinh_half():
    got = ScalarExpr.atom(1, "sinh", (1,), coeff=Fraction(1, 2)).expand(3)
    expect = poly(3, 1, {
        (1, (1,)): G(Fraction(1, 2)),
        (3, (3,)): G(Fraction(1, 48)),
    })
    assert got == expect


def test_expand_tanh():
    got = ScalarExpr.atom(1, "tanh", (1,)).expand(3)
    expect = poly(3, 1, {
        (1, (1,)): G(1),
        (3, (3,)): G(Fraction(-1, 3)),
    })
    assert got == expect


def test_expand_homomorphic_on_products():
    a = ScalarExpr.atom(1, "cosh", (1,))
    b = ScalarExpr.atom(1, "sinh", (1,), coeff=Fraction(1, 2))
    assert (a * b).expand(6) == a.expand(6) * b.expand(6)


def test_specialize_sinh_ratio_collapses_to_v():
    # sinh(j1 j2 v)/(j1 j2) at j1 = iota_1, j2 = 1  ->  v
    e = ScalarExpr.atom(2, "sinh", (1, 1)) * ScalarExpr.mono(2, (-1, -1))
    got = e.specialize((NIL, UNIT))
    assert got == ScalarExpr.mono(2, (0, 0), vpow=1, nil=frozenset({0}))


def test_specialize_negative_nilpotent_exponent_raises():
    e = ScalarExpr.mono(2, (-1, 0))
    with pytest.raises(UndefinedContraction):
        e.specialize((NIL, UNIT))


def test_specialize_imaginary_square():
    e = ScalarExpr.mono(2, (2, 0), vpow=2)
    got = e.specialize((IMAG, UNIT))
    assert got == ScalarExpr.mono(2, (0, 0), c=G(-1), vpow=2)


def test_specialize_series_matches_expr_route():
    e = ScalarExpr.atom(2, "sinh", (1, 1)) * ScalarExpr.mono(2, (-1, -1))
    via_series = e.expand(7).specialize((NIL, UNIT))
    via_expr = e.specialize((NIL, UNIT)).expand(7)
    assert via_series == via_expr


def test_specialize_keeps_symbolic_slots():
    # tanh(j1^2 j2 v)/(j1^2 j2) with j2 = iota_2 and j1 kept -> v
    e = ScalarExpr.atom(2, "tanh", (2, 1)) * ScalarExpr.mono(2, (-2, -1))
    got = e.specialize((KEEP, NIL))
    assert got == ScalarExpr.mono(2, (0, 0), vpow=1, nil=frozenset({1}))


def test_specialize_closed_form_sinh_rule_every_order():
    # specialize(expand(sinh(mu v), O)) == mu v for all O >= 1
    e = ScalarExpr.atom(2, "sinh", (1, 0))
    for order in range(1, 9):
        got = e.expand(order).specialize((NIL, UNIT))
        expect = VSeries.const(order, 2, G(1), exp=(1, 0), vpow=1,
                               nil=frozenset({0}))
        assert got == expect


def test_parse_assignment():
    assert parse_assignment("iota,1", 2) == (NIL, UNIT)
    assert parse_assignment("1,j,iota", 3) == (UNIT, KEEP, NIL)
    with pytest.raises(ValueError):
        parse_assignment("iota", 2)
    with pytest.raises(ValueError):
        parse_assignment("x,1", 2)


def test_render_and_json_roundtrip():
    e = (ScalarExpr.imag(2).scale(G(Fraction(1, 6)))
         * ScalarExpr.mono(2, (2, 1), vpow=3))
    assert "i" in e.render() and "j1^2" in e.render() and "v^3" in e.render()
    assert ScalarExpr.from_json(e.to_json()) == e
    a = ScalarExpr.atom(2, "tanh", (1, 1)) + ScalarExpr.one(2)
    assert ScalarExpr.from_json(a.to_json()) == a


# -- randomized ring properties ---------------------------------------------

coeffs = st.integers(min_value=-4, max_value=4)


def small_series(order=4, nvars=2):
    keys = st.tuples(st.integers(0, order),
                     st.tuples(st.integers(-1, 2), st.integers(-1, 2)))
    return st.dictionaries(keys, coeffs, max_size=4).map(
        lambda d: poly(order, nvars,
                       {k: G(c) for k, c in d.items() if c != 0})
    )


@given(small_series(), small_series(), small_series())
@settings(max_examples=60, deadline=None)
def test_series_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a
    assert a * b == b * a


@given(small_series())
@settings(max_examples=40, deadline=None)
def test_series_additive_inverse(a):
    assert (a - a).is_zero()


@given(small_series(), small_series())
@settings(max_examples=40, deadline=None)
def test_specialize_commutes_with_mul(a, b):
    # nonnegative exponents only, so no UndefinedContraction possible
    assignment = (NIL, UNIT)
    try:
        lhs = (a * b).specialize(assignment)
    except UndefinedContraction:
        return
    try:
        rhs = a.specialize(assignment) * b.specialize(assignment)
    except UndefinedContraction:
        return
    assert lhs == rhs
