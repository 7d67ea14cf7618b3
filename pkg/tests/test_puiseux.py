from fractions import Fraction

import numpy as np
import pytest
import sympy

from conelab.cone import angular_match, sampled_cone
from conelab.expr import parse
from conelab.puiseux import (
    IsolatedPointError,
    _sheared,
    classify_germ,
    half_branches,
    newton_polygon,
    puiseux_expand,
)
from conelab.variety import Variety

CURVES = [
    "y^2 - x^3",
    "y^3 - x^4",
    "y^5 - x^6",
    "y - x^2",
    "x^2 - y^3*(1 - y)",
    "x^2 - y^2*(1 - y)",
    "x*(y^2 + x^4)",
    "y^2 - x^2 - x^3",
]


def test_newton_polygon_cusp():
    poly = newton_polygon(parse("y^2 - x^3"))
    assert [e.slope for e in poly.lower_edges] == [Fraction(3, 2)]
    assert poly.lower_edges[0].face == parse("y^2 - x^3")


def test_newton_polygon_slopes():
    assert [e.slope for e in newton_polygon(parse("y^3 - x^4")).lower_edges] == [Fraction(4, 3)]
    assert [e.slope for e in newton_polygon(parse("y - x^2")).lower_edges] == [Fraction(2)]


def test_newton_polygon_hull():
    poly = newton_polygon(parse("y^4 - x*y^2 + x^3*y + x^5"))
    slopes = [e.slope for e in poly.lower_edges]
    assert slopes == sorted(slopes)
    # every support point on or above each supporting line
    for e in poly.lower_edges:
        i0, j0 = e.start
        for i, j in poly.support:
            assert (i - i0) + e.slope * (j - j0) >= 0


def test_newton_polygon_rejects_constant():
    with pytest.raises(ValueError):
        newton_polygon(parse("1"))


def test_cusp_branch():
    (b,) = puiseux_expand(parse("y^2 - x^3"))
    assert b.e == 2
    assert b.exponents == [Fraction(3, 2)]
    assert b.coefficients == [Fraction(1)]


def test_two_thirds_branch():
    (b,) = puiseux_expand(parse("y^3 - x^4"))
    assert b.e == 3 and b.exponents == [Fraction(4, 3)]


def test_ramphoid_branch_is_real_on_one_side():
    branches = puiseux_expand(parse("x^2 - y^3*(1 - y)"))
    assert len(branches) == 1 and branches[0].e == 2
    halves = half_branches(branches)
    assert len(halves) == 2
    # both sheets leave the origin upwards (y >= 0)
    assert all(np.allclose(h.tangent_ray, [0, 1]) for h in halves)


def _exact_residual(text, branch):
    x, y = sympy.symbols("x y")
    f = sympy.sympify(text.replace("^", "**"))
    u, v = sympy.symbols("u v")
    series = sum(sympy.Rational(c.numerator, c.denominator) * u ** sympy.Rational(k.numerator, k.denominator)
                 for k, c in zip(branch.exponents, branch.coefficients))
    g = sympy.expand(f.subs({x: u + branch.shear * v, y: v}, simultaneous=True).subs(v, series))
    t = sympy.symbols("t", positive=True)
    g = sympy.expand(g.subs(u, t ** branch.e))
    return sympy.Poly(g, t)


@pytest.mark.parametrize("text", ["y^2 - x^3", "y^3 - x^4", "y^5 - x^6", "y - x^2", "x^2 - y^2*(1 - y)",
                                  "y^2 - x^2 - x^3"])
def test_residual_valuation_exact(text):
    for b in puiseux_expand(parse(text)):
        if b.numeric:
            continue
        assert b.residual_valuation is None
        poly = _exact_residual(text, b)
        if poly.is_zero:
            continue
        low = min(m[0] for m in poly.monoms())
        assert Fraction(low, b.e) > b.truncation_order


@pytest.mark.parametrize("text", CURVES)
def test_ramification_sum_is_order_in_y(text):
    f = parse(text)
    branches = puiseux_expand(f)
    F = _sheared(f, branches[0].shear)
    m = min(j for (i, j) in F.terms if i == 0)
    assert sum(b.e for b in branches) == m


@pytest.mark.parametrize("text", CURVES)
def test_half_branch_rays_equal_or_opposite(text):
    for b in puiseux_expand(parse(text)):
        if len(b.half_branches) == 2:
            a, c = (h.tangent_ray for h in b.half_branches)
            assert np.linalg.norm(a - c) < 1e-12 or np.linalg.norm(a + c) < 1e-12


@pytest.mark.parametrize("text", CURVES)
def test_rays_match_sampled_cone(text):
    rays = classify_germ(parse(text)).rays
    cone = sampled_cone(Variety.from_text(text), (0, 0)).directions
    assert angular_match(rays, cone).max() <= 1e-2
    assert angular_match(cone, rays).max() <= 1e-2


def test_half_branches_of_cusp():
    halves = half_branches(puiseux_expand(parse("y^2 - x^3")))
    assert len(halves) == 2
    assert all(np.allclose(h.tangent_ray, [1, 0]) for h in halves)


@pytest.mark.parametrize("text", ["y^3 - x^4", "y - x^2"])
def test_half_branches_opposite(text):
    rays = sorted(tuple(np.round(h.tangent_ray, 12)) for h in half_branches(puiseux_expand(parse(text))))
    assert rays == [(-1.0, 0.0), (1.0, 0.0)]


@pytest.mark.parametrize("text, kind", [
    ("y^2 - x^3", "Cusp"),
    ("y^3 - x^4", "C1"),
    ("y^5 - x^6", "C1"),
    ("x^2 - y^3*(1 - y)", "Cusp"),
    ("x^2 - y^2*(1 - y)", "MultiBranch"),
    ("x*(y^2 + x^4)", "C1"),
    ("y - x^2", "C1"),
])
def test_classify_germ(text, kind):
    assert classify_germ(parse(text)).kind == kind


def test_multibranch_fan():
    v = classify_germ(parse("x^2 - y^2*(1 - y)"))
    expected = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]]) / np.sqrt(2)
    assert angular_match(expected, v.rays).max() < 1e-9


def test_isolated_point():
    with pytest.raises(IsolatedPointError):
        classify_germ(parse("x^2 + y^2"))


def test_germ_report_serializes():
    d = classify_germ(parse("y^3 - x^4")).to_dict()
    assert d["verdict"] == "C1"
    assert d["branches"][0]["e"] == 3
    assert d["branches"][0]["terms"] == [[4, 3, "1"]]
