import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conelab.errors import EmptyVarietyError
from conelab.expr import parse
from conelab.support import (
    SampledHypersurface,
    convexity_probe,
    normal_modulus,
    positive_support,
    sample_surface,
    sphere_invert,
    support_radius,
)


@pytest.fixture(scope="module")
def circle():
    return sample_surface(parse("x^2 + y^2 - 1"), [(-2, 2), (-2, 2)], 0.01)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def moved(S, R, t):
    return SampledHypersurface(S.points @ R.T + t, S.normals @ R.T, S.region, S.spacing,
                               S.quarantined @ R.T + t)


# -- sampling ---------------------------------------------------------------

def test_circle_sample_count(circle):
    # samples at least spacing/2 apart along a curve of length 2 pi
    n = 2 * math.pi / circle.spacing
    assert 0.9 * n <= len(circle) <= 1.2 * n
    assert np.allclose(np.linalg.norm(circle.points, axis=1), 1.0, atol=1e-9)


def test_parabola_normals():
    S = sample_surface(parse("y - x^2"), [(-1, 1), (-1, 1)], 0.01)
    x = S.points[:, 0]
    expected = np.column_stack([-2 * x, np.ones_like(x)]) / np.sqrt(1 + 4 * x * x)[:, None]
    assert np.allclose(np.abs(np.einsum("ij,ij->i", S.normals, expected)), 1.0)


def test_cusp_origin_quarantined():
    S = sample_surface(parse("y^2 - x^3"), [(-1, 1), (-1, 1)], 0.01)
    assert len(S.quarantined) == 1
    assert np.allclose(S.quarantined[0], 0, atol=1e-12)
    upper, lower = S.points[:, 1] > 0.05, S.points[:, 1] < -0.05
    assert upper.sum() > 20 and lower.sum() > 20


def test_empty_region():
    with pytest.raises(EmptyVarietyError):
        sample_surface(parse("x^2 + y^2 - 1"), [(5, 6), (5, 6)], 0.01)


def test_bad_spacing():
    with pytest.raises(ValueError):
        sample_surface(parse("y"), [(-1, 1), (-1, 1)], 0.0)


def test_sampling_deterministic():
    f = parse("y^3 - x^4")
    a = sample_surface(f, [(-1, 1), (-1, 1)], 0.02, seed=5)
    b = sample_surface(f, [(-1, 1), (-1, 1)], 0.02, seed=5)
    assert np.array_equal(a.points, b.points)


# -- support radii ----------------------------------------------------------

def test_circle_reach(circle):
    rep = positive_support(circle, r_max=4.0)
    assert rep.double_uniform_r == pytest.approx(1.0, rel=2e-2)
    assert rep.uniform_r >= rep.double_uniform_r
    # the inner side of every sample is the unit disc
    inner = np.minimum(rep.r_plus, rep.r_minus)
    assert np.allclose(inner, 1.0, rtol=2e-2)


def test_line_radius_is_r_max():
    S = sample_surface(parse("y"), [(-1, 1), (-1, 1)], 0.01)
    q = int(np.argmin(np.abs(S.points[:, 0])))
    assert support_radius(S, q, 1, 0.5) == 0.5
    assert support_radius(S, q, -1, 0.5) == 0.5


def test_support_radius_side_validated(circle):
    with pytest.raises(ValueError):
        support_radius(circle, 0, 0)


def test_concave_side_radius_vanishes_at_cusp_point():
    S = sample_surface(parse("y^3 - x^4"), [(-1, 1), (-1, 1)], 0.005)
    rep = positive_support(S)
    small = np.minimum(rep.r_plus, rep.r_minus)
    d = np.linalg.norm(S.points, axis=1)
    bands = [(0.5, 1.0), (0.1, 0.2), (0.02, 0.05)]
    radii = [small[(d > lo) & (d < hi)].min() for lo, hi in bands]
    assert radii[0] > radii[1] > radii[2]
    # the convex side keeps a ball of size comparable to the region
    assert rep.uniform_r > 0.5


def test_sextic_support_shrinks_toward_axis():
    f = parse("z^3 - x^5*y - x*y^5")
    radii = []
    for t in (1.0, 0.1):
        S = sample_surface(f, [(t / 2, 3 * t / 2), (-t / 2, t / 2), (-t / 2, t / 2)], t / 40)
        radii.append(positive_support(S, r_max=1.0).uniform_r)
    assert radii[0] >= 10 * radii[1]


def test_support_antitone_in_samples():
    f = parse("y^3 - x^4")
    S = sample_surface(f, [(-1, 1), (-1, 1)], 0.01)
    rng = np.random.default_rng(0)
    keep = np.sort(rng.choice(len(S), size=len(S) // 2, replace=False))
    sub = SampledHypersurface(S.points[keep], S.normals[keep], S.region, S.spacing, S.quarantined)
    full = positive_support(S, r_max=2.0)
    part = positive_support(sub, r_max=2.0)
    assert np.all(full.r_plus[keep] <= part.r_plus + 1e-12)
    assert np.all(full.r_minus[keep] <= part.r_minus + 1e-12)


def test_support_report_dict(circle):
    d = positive_support(circle, r_max=4.0).to_dict()
    assert d["samples"] == len(circle)
    assert set(d) >= {"uniform_r", "double_uniform_r", "threshold", "failures"}


# -- convexity ---------------------------------------------------------------

def test_parabola_convex():
    S = sample_surface(parse("y - x^2"), [(-1, 1), (-1, 1)], 0.01)
    assert convexity_probe(S) == (True, None)


def test_teardrop_branch_passes_probe():
    S = sample_surface(parse("x^2 - y^2*(1 - y)"), [(-1, 1), (0, 1)], 0.005)
    ok, witness = convexity_probe(S)
    assert ok and witness is None


def test_fermat_not_convex():
    S = sample_surface(parse("x^3 + y^3 - z^3"), [(-1, 1)] * 3, 0.05)
    ok, (q, x) = convexity_probe(S)
    assert not ok
    assert q.shape == x.shape == (3,)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * math.pi), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_convexity_probe_rigid_invariant(theta, t):
    base = [sample_surface(parse(s), [(-1, 1), (-1, 1)], 0.05) for s in ("y - x^2", "y^3 - x^3 + x*y")]
    for S in base:
        assert convexity_probe(moved(S, rotation(theta), np.asarray(t)))[0] == convexity_probe(S)[0]


def test_normal_modulus_circle(circle):
    # unit curvature: the normal turns by the arc length
    assert normal_modulus(circle, 0.05) == pytest.approx(1.0, rel=2e-2)


# -- inversion --------------------------------------------------------------

def test_sphere_invert_basic():
    assert np.allclose(sphere_invert([2, 0], [0, 0], 1.0), [0.5, 0])
    with pytest.raises(ValueError):
        sphere_invert([0, 0], [0, 0], 1.0)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.floats(0.1, 5))
def test_sphere_invert_involution(x, radius):
    x = np.asarray(x)
    back = sphere_invert(sphere_invert(x, np.zeros(3), radius), np.zeros(3), radius)
    assert np.allclose(back, x, rtol=1e-12, atol=1e-12 * np.linalg.norm(x))


def test_inversion_maps_outside_inside():
    # S: circle of radius 1 about (1, 0), passing through the inversion centre o.
    # Its image under inversion in the unit circle is the line x = 1/2; the outside of S
    # goes to the half plane x < 1/2 away from S's image.
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * math.pi, 100)
    rad = rng.uniform(1.01, 3.0, 100)
    pts = np.column_stack([1 + rad * np.cos(ang), rad * np.sin(ang)])
    img = sphere_invert(pts, [0, 0], 1.0)
    assert np.all(img[:, 0] < 0.5)
