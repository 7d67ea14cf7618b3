from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conelab.cone import (
    ConeOfRaysQuery,
    RayFan,
    algebraic_cone,
    angular_match,
    canonical_normal,
    containment_residuals,
    is_flat,
    is_hypersurface_candidate,
    is_symmetric,
    sampled_cone,
    sign_change_directions,
    sign_change_locus,
    symmetrize,
)
from conelab.errors import PointNotOnVariety
from conelab.expr import HomogeneousForm, Polynomial, leading_form, parse, to_text
from conelab.variety import Variety

PLANE_GERMS = [
    ("y^2 - x^3", (0, 0)),
    ("y^3 - x^4", (0, 0)),
    ("y^5 - x^6", (0, 0)),
    ("x^2 - y^3*(1 - y)", (0, 0)),
    ("x^2 - y^2*(1 - y)", (0, 0)),
    ("x*(y^2 + x^4)", (0, 0)),
    ("x^2 + y^2 - 1", (1, 0)),
]


def form(text, variables=None):
    f = parse(text, variables)
    return leading_form(f)


# -- algebraic route --------------------------------------------------------

def test_algebraic_cone_fermat_is_itself():
    f = parse("x^3 + y^3 - z^3")
    h = algebraic_cone(f, (0, 0, 0))
    assert h.base == f and h.degree == 3


def test_algebraic_cone_cusp():
    h = algebraic_cone(parse("y^2 - x^3"), (0, 0))
    assert h.base == parse("y^2", ("x", "y")) and h.degree == 2


def test_algebraic_cone_smooth_point():
    h = algebraic_cone(parse("y - x^2"), (0, 0))
    assert h.degree == 1 and to_text(h.base) == "y"


def test_algebraic_cone_off_variety():
    with pytest.raises(PointNotOnVariety):
        algebraic_cone(parse("y - x^2"), (1, 0))


def test_sign_locus_mixed_monomial():
    loc = sign_change_locus(form("x*y^2"))
    assert [to_text(q) for q in loc.realizable_odd_factors()] == ["x"]
    assert to_text(loc.even_part) == "y"


def test_sign_locus_two_lines():
    loc = sign_change_locus(form("x^2 - y^2"))
    assert sorted(to_text(q) for q in loc.realizable_odd_factors()) == ["x + y", "x - y"]


def test_sign_locus_square_is_empty():
    loc = sign_change_locus(form("x^2"))
    assert loc.realizable_odd_factors() == []
    assert len(sign_change_directions(loc)) == 0


def test_sign_locus_definite_factor_not_realizable():
    loc = sign_change_locus(form("x^2 + y^2 + z^2", ("x", "y", "z")))
    assert len(loc.realizable) == 1
    assert not loc.realizable[0].has_full_dimensional_real_zero


@pytest.mark.parametrize("text", ["x*y^2", "x^2 - y^2", "z^3 - x^2*y", "y*(x^2 + y^2)", "x^3 + y^3 - z^3"])
def test_sign_locus_reassembles(text):
    h = form(text)
    assert sign_change_locus(h).reassemble() == h.base


def test_flat_cube():
    h = form("z^3", ("x", "y", "z"))
    assert np.allclose(is_flat(h, sign_change_locus(h)), [0, 0, 1])


def test_not_flat_two_lines():
    h = form("x^2 - y^2")
    assert is_flat(h, sign_change_locus(h)) is None


@pytest.mark.parametrize("text, variables", [("y*(x^2 + y^2)", ("x", "y")),
                                             ("y*(x^2 + y^2 + z^2)", ("x", "y", "z"))])
def test_flat_with_definite_cofactor(text, variables):
    h = form(text, variables)
    normal = is_flat(h, sign_change_locus(h))
    assert np.allclose(normal, np.eye(len(variables))[1])


def test_flat_normal_deterministic():
    h = form("2*x - y + z^2", ("x", "y", "z"))
    a = is_flat(h, sign_change_locus(h, seed=1), seed=1)
    b = is_flat(h, sign_change_locus(h, seed=1), seed=1)
    assert np.array_equal(a, b)
    assert a[0] > 0


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_canonical_normal_sign_invariant(v):
    a, b = canonical_normal(v), canonical_normal(-np.asarray(v))
    assert np.allclose(a, b)
    assert np.isclose(np.linalg.norm(a), 1)


# -- sampled route ----------------------------------------------------------

def test_sampled_cone_cusp_single_ray():
    c = sampled_cone(Variety.from_text("y^2 - x^3"), (0, 0))
    assert c.directions.shape == (1, 2)
    assert np.allclose(c.directions[0], [1, 0], atol=1e-2)
    assert not is_symmetric(c)


def test_sampled_cone_two_half_branches():
    c = sampled_cone(Variety.from_text("y^3 - x^4"), (0, 0))
    assert angular_match(np.array([[1.0, 0.0], [-1.0, 0.0]]), c.directions).max() < 1e-2
    assert len(c.directions) == 2
    assert is_symmetric(c)


def test_sampled_cone_circle_tangent():
    c = sampled_cone(Variety.from_text("x^2 + y^2 - 1"), (1, 0))
    assert angular_match(np.array([[0.0, 1.0], [0.0, -1.0]]), c.directions).max() < 1e-2


def test_sampled_cone_requires_ladder():
    with pytest.raises(ValueError):
        sampled_cone(Variety.from_text("y - x^2"), (0, 0), scale_ladder=(10, 100))


def test_sampled_cone_off_variety():
    with pytest.raises(PointNotOnVariety):
        sampled_cone(Variety.from_text("y - x^2"), (1, 0))


def test_fermat_sampled_cone_symmetric():
    c = sampled_cone(Variety.from_text("x^3 + y^3 - z^3"), (0, 0, 0))
    assert is_symmetric(c)


@pytest.mark.parametrize("text, p", PLANE_GERMS)
def test_containment_in_leading_form_zero_set(text, p):
    f = parse(text)
    c = sampled_cone(Variety.from_polynomial(f), p)
    h = algebraic_cone(f, p)
    assert containment_residuals(c, h).max() < 1e-6


@pytest.mark.parametrize("text, p", PLANE_GERMS)
def test_sign_change_directions_are_sampled(text, p):
    f = parse(text)
    c = sampled_cone(Variety.from_polynomial(f), p)
    h = algebraic_cone(f, p)
    dirs = sign_change_directions(sign_change_locus(h))
    sym = symmetrize(c)
    assert angular_match(dirs, sym).max(initial=0) <= 1e-2


@pytest.mark.parametrize("text", ["x^3 + y^3 - z^3", "z^3 - x^5*y - x*y^5"])
def test_containment_surfaces(text):
    f = parse(text)
    c = sampled_cone(Variety.from_polynomial(f), (0, 0, 0))
    h = algebraic_cone(f, (0, 0, 0))
    assert containment_residuals(c, h).max() < 1e-6
    dirs = sign_change_directions(sign_change_locus(h), n_circles=200, n_angles=512)
    assert angular_match(dirs, symmetrize(c)).max() <= 1e-2


@pytest.mark.parametrize("text", ["y^3 - x^4", "y^2 - x^3", "x^2 - y^2*(1 - y)"])
@pytest.mark.parametrize("lam", [2, 10])
def test_homothety_invariance(text, lam):
    f = parse(text)
    # the image lam*X of X is the zero set of f(x / lam)
    scaled = f.compose([Polynomial.variable(v, f.variables).scale(Fraction(1, lam)) for v in f.variables])
    a = sampled_cone(Variety.from_polynomial(f), (0, 0)).directions
    b = sampled_cone(Variety.from_polynomial(scaled), (0, 0)).directions
    assert len(a) == len(b)
    assert angular_match(a, b).max() <= 1e-2


def test_sampled_cone_deterministic():
    V = Variety.from_text("x^2 - y^2*(1 - y)")
    a = sampled_cone(V, (0, 0), seed=3).directions
    b = sampled_cone(V, (0, 0), seed=3).directions
    assert np.array_equal(a, b)


def test_hypersurface_candidate_plane():
    assert is_hypersurface_candidate(RayFan([[1, 0], [-1, 0]]))
    assert not is_hypersurface_candidate(RayFan([[1, 0]]))
    assert not is_hypersurface_candidate(RayFan([[1, 1], [-1, 1], [1, -1], [-1, -1]]))


def test_symmetry_of_fans():
    assert is_symmetric(RayFan([[1, 0], [-1, 0]]))
    assert not is_symmetric(RayFan([[1, 0]]))
    assert len(symmetrize(RayFan([[1, 0]]))) == 2


@settings(max_examples=25)
@given(st.lists(st.lists(st.floats(-1, 1), min_size=2, max_size=2).filter(lambda v: np.linalg.norm(v) > 0.1),
                min_size=1, max_size=6))
def test_symmetrized_fan_is_symmetric(dirs):
    fan = RayFan(np.asarray(dirs))
    assert is_symmetric(RayFan(symmetrize(fan, 1e-2)), 1e-2)


def test_cone_of_rays_query():
    q = ConeOfRaysQuery((0, 0), (1, 0), 0.1, 1.0)
    inside = q.contains([[0.5, 0.01], [0.5, 0.3], [2.0, 0.0], [0.0, 0.0]])
    assert inside.tolist() == [True, False, False, False]
    with pytest.raises(ValueError):
        ConeOfRaysQuery((0, 0), (1, 0), 0.0, 1.0)
    with pytest.raises(ValueError):
        ConeOfRaysQuery((0, 0), (1, 0), 0.1, -1.0)


def test_homogeneous_form_input_for_locus():
    h = HomogeneousForm(parse("x^2 - y^2"), 2)
    assert len(sign_change_locus(h).realizable_odd_factors()) == 2
