from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conelab.expr import (
    FactorizationTimeout,
    HomogeneousForm,
    ParseError,
    Polynomial,
    evaluate,
    f_lambda,
    homogeneity_check,
    leading_form,
    parse,
    square_free_factor,
    to_text,
    translate,
)

XY = ("x", "y")
XYZ = ("x", "y", "z")

CORPUS = [
    "y^2 - x^3",
    "y^3 - x^4",
    "y^5 - x^6",
    "x^2 - y^3*(1 - y)",
    "x^2 - y^2*(1 - y)",
    "x*(y^2 + x^4)",
    "z^3 - x^5*y - x*y^5",
    "x^3 + y^3 - z^3",
    "z^3 - (x^2 + y^2)^2",
    "2*z - x^2 - 1",
    "y - x^2",
    "x^2 + y^2 - 1",
]


def polys(variables=XY, max_deg=4, max_terms=6):
    n = len(variables)
    exps = st.tuples(*[st.integers(0, max_deg) for _ in range(n)])
    coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)
    return st.dictionaries(exps, coeffs, max_size=max_terms).map(lambda t: Polynomial(variables, t))


rational_points = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=5), min_size=2, max_size=2)


# -- parsing ----------------------------------------------------------------

def test_parse_sextic_terms():
    f = parse("z^3 - x^5*y - x*y^5")
    assert len(f.terms) == 3
    assert f.degree == 6


def test_parse_zero():
    f = parse("0")
    assert f.is_zero()
    assert f.terms == {}


def test_parse_expands_products():
    f = parse("x*(y^2 + x^4)")
    assert f == Polynomial(XY, {(1, 2): 1, (5, 0): 1})


def test_parse_rationals_and_decimals():
    assert parse("1/2*x + 0.25*y") == Polynomial(XY, {(1, 0): Fraction(1, 2), (0, 1): Fraction(1, 4)})


def test_parse_unary_minus_binds_below_power():
    assert parse("-x^2") == Polynomial(XY, {(2, 0): -1})


def test_parse_indexed_variables():
    f = parse("x1^2 + x3")
    assert f.variables == ("x1", "x2", "x3")


@pytest.mark.parametrize("text, offset", [
    ("x**2", 2),
    ("x^", 2),
    ("2x", 1),
    ("(x+y", 4),
    ("x^-1", 2),
    ("w + x", 0),
])
def test_parse_errors_report_offset(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset


def test_parse_too_many_variables():
    with pytest.raises(ParseError):
        parse(" + ".join(f"x{i}" for i in range(1, 10)))


@pytest.mark.parametrize("text", CORPUS)
def test_print_parse_roundtrip_corpus(text):
    f = parse(text)
    assert parse(to_text(f), f.variables) == f
    assert to_text(parse(to_text(f))) == to_text(f)


@given(polys(XYZ))
def test_print_parse_idempotent(f):
    assert parse(to_text(f), XYZ) == f


# -- translate ----------------------------------------------------------------

def test_translate_parabola():
    g = translate(parse("y - x^2"), (1, 1))
    assert g == parse("y - x^2 - 2*x")
    assert g.constant_term() == 0


def test_translate_origin_is_identity():
    f = parse("x^3 + y^3 - z^3")
    assert translate(f, (0, 0, 0)) == f


def test_translate_dimension_mismatch():
    with pytest.raises(ValueError):
        translate(parse("y - x^2"), (0, 0, 0))


@given(polys(), rational_points)
def test_translate_inverse(f, p):
    assert translate(translate(f, p), [-v for v in p]) == f


@given(polys(), rational_points, rational_points)
def test_translate_evaluates_shifted(f, p, x):
    g = translate(f, p)
    assert evaluate(g, x) == evaluate(f, [a + b for a, b in zip(x, p)])


# -- leading form -----------------------------------------------------------

def test_leading_form_sextic():
    h = leading_form(parse("z^3 - x^5*y - x*y^5"))
    assert (h.base, h.degree) == (parse("z^3", XYZ), 3)


def test_leading_form_mixed():
    h = leading_form(parse("x*(y^2 + x^4)"))
    assert (h.base, h.degree) == (parse("x*y^2", XY), 3)


def test_leading_form_linear():
    h = leading_form(parse("2*x - 3*y"))
    assert h.degree == 1
    assert h.base == parse("2*x - 3*y")


def test_leading_form_errors():
    with pytest.raises(ValueError):
        leading_form(parse("0"))
    with pytest.raises(ValueError):
        leading_form(parse("x^2 + y^2 - 1"))


def test_homogeneous_form_rejects_mixed_degrees():
    with pytest.raises(ValueError):
        HomogeneousForm(parse("x + y^2"), 1)


@given(polys(max_deg=5))
def test_leading_form_splits_by_degree(f):
    f = f - f.constant_term()
    if f.is_zero():
        return
    h = leading_form(f)
    r = f - h.base
    assert h.base.is_homogeneous()
    assert all(sum(e) > h.degree for e in r.terms)


@given(polys(max_deg=5), st.lists(rational_points, min_size=1, max_size=3))
def test_leading_form_is_homogeneous(f, points):
    f = f - f.constant_term()
    if f.is_zero():
        return
    assert homogeneity_check(leading_form(f), (2, 3, Fraction(1, 2)), points)


def test_f_lambda_converges_to_leading_form():
    f = parse("x*(y^2 + x^4)")
    h = leading_form(f).base
    x = [Fraction(3, 5), Fraction(4, 5)]
    gaps = [abs(evaluate(f_lambda(f, lam), x) - evaluate(h, x)) for lam in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
    # the remainder is two degrees up, so the gap shrinks at least like 1/lam
    assert all(g * lam <= gaps[0] * 10 for g, lam in zip(gaps, (10, 100, 1000)))


# -- factorization ----------------------------------------------------------

def test_factor_difference_of_squares():
    fl = square_free_factor(parse("x^2 - y^2"))
    assert sorted(to_text(p) for p, _ in fl.factors) == ["x + y", "x - y"]
    assert all(k == 1 for _, k in fl.factors)


def test_factor_monomial():
    fl = square_free_factor(parse("x*y^2"))
    assert {(to_text(p), k) for p, k in fl.factors} == {("x", 1), ("y", 2)}


def test_factor_prime_power():
    fl = square_free_factor(parse("z^3"))
    assert [(to_text(p), k) for p, k in fl.factors] == [("z", 3)]


@pytest.mark.parametrize("text", CORPUS)
def test_factor_reconstructs_corpus(text):
    f = parse(text)
    assert square_free_factor(f).expand(f.variables) == f


def test_factor_degree_cap():
    with pytest.raises(FactorizationTimeout):
        square_free_factor(parse("x^30 - y"), degree_cap=24)
