"""Newton polygons and Newton-Puiseux expansion of plane curve germs at the origin.

Coordinates are first sheared so that the vertical direction is not tangent
to the curve; then every branch is a fractional power series ``v = phi(u)``
with exponents at least 1. Expansions are run for ``u > 0`` on ``F(u, v)``
and on ``F(-u, v)``: the expansions with real coefficients are exactly the
real half-branches. Coefficients stay exact rationals while the face
polynomials have rational roots and fall back to 128-bit complex floats
otherwise (such branches are flagged ``numeric``).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import mpmath
import numpy as np
import sympy

from .errors import AnalysisError
from .expr import Polynomial, leading_form

PRECISION_BITS = 128
# relative to the summed magnitudes of the terms that cancel
CANCEL_TOL = 1e-20
MAX_STEPS = 200

Coeff = Union[Fraction, mpmath.mpc]


class IsolatedPointError(AnalysisError):
    """The origin is an isolated real point: no real half-branch passes through it."""


# ---------------------------------------------------------------------------
# coefficient helpers
# ---------------------------------------------------------------------------
def _mp(c) -> mpmath.mpc:
    if isinstance(c, Fraction):
        return mpmath.mpc(mpmath.mpf(c.numerator) / c.denominator)
    return mpmath.mpc(c)


def _mul(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return _mp(a) * _mp(b)


def _add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return _mp(a) + _mp(b)


def _abs(c) -> float:
    return float(abs(c)) if isinstance(c, Fraction) else float(mpmath.fabs(c))


def _is_real(c, tol: float = 1e-20) -> bool:
    if isinstance(c, Fraction):
        return True
    return abs(float(c.imag)) <= tol * (1 + abs(float(c.real)))


def _to_complex(c) -> complex:
    return complex(float(c)) if isinstance(c, Fraction) else complex(c)


def _coeff_json(c):
    if isinstance(c, Fraction):
        return str(c)
    z = complex(c)
    return round(z.real, 15) if _is_real(c) else [round(z.real, 15), round(z.imag, 15)]


# ---------------------------------------------------------------------------
# Newton polygon
# ---------------------------------------------------------------------------
@dataclass
class NewtonEdge:
    """Edge of the lower hull; ``slope`` is ``Δi/Δj`` so ``y^2 - x^3`` has slope 3/2."""

    slope: Fraction
    start: tuple
    end: tuple
    face: Polynomial

    def face_polynomial(self) -> Polynomial:
        """The face as a univariate polynomial ``sum a_ij t^(j - j_end)``."""
        j_end = self.end[1]
        return Polynomial(("t",), {(e[1] - j_end,): c for e, c in self.face.terms.items()})


@dataclass
class NewtonPolygon:
    support: list
    lower_edges: list
    monomial_factor: tuple = (0, 0)

    def to_dict(self):
        return {
            "support": [list(p) for p in self.support],
            "monomial_factor": list(self.monomial_factor),
            "edges": [{"slope": str(e.slope), "face": str(e.face)} for e in self.lower_edges],
        }


def _lower_hull(points: dict) -> list:
    """Vertices of the lower-left hull from the top of the j-axis side to the lowest row.

    ``points`` maps ``j -> smallest i`` with a nonzero term ``u^i v^j``.
    """
    # start at the leftmost point, lowest j among the leftmost
    i_min = min(points.values())
    j = min(jj for jj, ii in points.items() if ii == i_min)
    verts = [(points[j], j)]
    while True:
        i0, j0 = verts[-1]
        below = [(jj, ii) for jj, ii in points.items() if jj < j0]
        if not below:
            return verts
        best = min(Fraction(ii - i0) / (j0 - jj) for jj, ii in below)
        j_next = min(jj for jj, ii in below if Fraction(ii - i0) / (j0 - jj) == best)
        verts.append((points[j_next], j_next))


def newton_polygon(f: Polynomial) -> NewtonPolygon:
    """Lower Newton polygon of ``f(x, y)`` at the origin, after splitting off ``x^a y^b``."""
    if f.nvars != 2:
        raise ValueError("newton_polygon needs a polynomial in two variables")
    if f.degree <= 0:
        raise ValueError("f is constant")
    if f.constant_term() != 0:
        raise AnalysisError("f does not vanish at the origin")
    a = min(e[0] for e in f.terms)
    b = min(e[1] for e in f.terms)
    g = {(e[0] - a, e[1] - b): c for e, c in f.terms.items()}
    rows: dict = {}
    for (i, j) in g:
        rows[j] = min(i, rows.get(j, i))
    verts = _lower_hull(rows)
    edges = []
    for (i0, j0), (i1, j1) in zip(verts, verts[1:]):
        slope = Fraction(i1 - i0, j0 - j1)
        val = i0 + slope * j0
        face = {(i, j): c for (i, j), c in g.items() if i + slope * j == val}
        edges.append(NewtonEdge(slope, (i0, j0), (i1, j1), Polynomial(f.variables, face)))
    return NewtonPolygon(sorted(f.terms), edges, (a, b))


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------
@dataclass
class _Leaf:
    terms: list  # [(exponent: Fraction, coeff)]
    finite: bool  # the series is exact (terminates)
    side: int

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Fraction) for _, c in self.terms)

    @property
    def real(self) -> bool:
        return all(_is_real(c) for _, c in self.terms)

    @property
    def ramification(self) -> int:
        e = 1
        for x, _ in self.terms:
            e = e * x.denominator // math.gcd(e, x.denominator)
        return e


def _clean(F: dict) -> dict:
    return {k: c for k, c in F.items() if c != 0}


def _roots(coeffs: list) -> list:
    """Nonzero roots with multiplicities of ``sum coeffs[k] t^k`` (exact when rational)."""
    if all(isinstance(c, Fraction) for c in coeffs):
        t = sympy.Symbol("t")
        poly = sympy.Poly(list(reversed([sympy.Rational(c.numerator, c.denominator) for c in coeffs])), t,
                          domain="QQ")
        out = []
        _, factors = poly.factor_list()
        for fac, mult in factors:
            fc = [Fraction(int(q.p), int(q.q)) for q in fac.all_coeffs()]
            if len(fc) == 2:
                r = -fc[1] / fc[0]
                if r != 0:
                    out.append((r, mult))
            elif len(fc) > 2:
                mp_coeffs = [mpmath.mpf(c.numerator) / c.denominator for c in fc]
                for r in mpmath.polyroots(mp_coeffs, maxsteps=200, extraprec=2 * PRECISION_BITS):
                    out.append((mpmath.mpc(r), mult))
        return out
    mp_coeffs = [_mp(c) for c in reversed(coeffs)]
    while len(mp_coeffs) > 1 and mpmath.fabs(mp_coeffs[-1]) == 0:
        mp_coeffs.pop()
    raw = [mpmath.mpc(r) for r in mpmath.polyroots(mp_coeffs, maxsteps=400, extraprec=2 * PRECISION_BITS)]
    scale = max(float(mpmath.fabs(r)) for r in raw) if raw else 1.0
    clusters: list = []
    for r in raw:
        for cl in clusters:
            if float(mpmath.fabs(cl[0] - r)) <= 1e-12 * (1 + scale):
                cl.append(r)
                break
        else:
            clusters.append([r])
    return [(sum(cl) / len(cl), len(cl)) for cl in clusters if float(mpmath.fabs(sum(cl) / len(cl))) > 1e-30]


def _substitute(F: dict, gamma: Fraction, c) -> dict:
    """``F(u, u^gamma (c + w)) / u^val`` where ``val`` is the least resulting exponent."""
    out: dict = {}
    mags: dict = {}
    for (i, j), a in F.items():
        base = i + gamma * j
        cp = Fraction(1)
        powers = [cp]
        for _ in range(j):
            powers.append(_mul(powers[-1], c))
        for l in range(j + 1):
            term = _mul(a, _mul(Fraction(math.comb(j, l)), powers[j - l]))
            key = (base, l)
            out[key] = _add(out[key], term) if key in out else term
            mags[key] = mags.get(key, 0.0) + _abs(term)
    # a numeric sum is zero when it cancels to rounding level against its own terms
    out = {k: a for k, a in out.items()
           if (a != 0 if isinstance(a, Fraction) else _abs(a) > CANCEL_TOL * mags[k])}
    out = _clean(out)
    val = min(i for i, _ in out)
    return {(i - val, j): a for (i, j), a in out.items()}


def _expand(F: dict, height: int, prefix: list, order: Fraction, side: int, out: list, steps: list,
            truncated: bool = False):
    steps[0] += 1
    if steps[0] > MAX_STEPS:
        raise AnalysisError("Puiseux expansion exceeded its step cap")
    F = _clean(F)
    last = prefix[-1][0] if prefix else Fraction(0)
    if height == 1 and prefix:
        # a term u^i v^j only reaches exponents >= i from here on, and the
        # expansion stops past ``order``; drop terms that cannot matter
        top = min((i for i, j in F if j == 1), default=None)
        if top is not None:
            bound = top + order - last
            kept = {k: a for k, a in F.items() if k[0] <= bound}
            truncated = truncated or len(kept) < len(F)
            F = kept
    jmin = min(j for _, j in F)
    if jmin > 0:
        # v^jmin divides F: the series terminates here (unless terms were dropped)
        out.append(_Leaf(list(prefix), not truncated, side))
        F = {(i, j - jmin): a for (i, j), a in F.items()}
        height -= jmin
        if height <= 0:
            return
    rows: dict = {}
    for (i, j) in F:
        if j <= height:
            rows[j] = min(i, rows.get(j, i))
    verts = _lower_hull(rows)
    for (i0, j0), (i1, j1) in zip(verts, verts[1:]):
        gamma = (i1 - i0) / Fraction(j0 - j1)
        if height == 1 and prefix and last + gamma > order:
            out.append(_Leaf(list(prefix), False, side))
            return
        val = i0 + gamma * j0
        face = [Fraction(0)] * (j0 - j1 + 1)
        for (i, j), a in F.items():
            if j1 <= j <= j0 and i + gamma * j == val:
                face[j - j1] = a
        for root, mult in _roots(face):
            F1 = _substitute(F, gamma, root)
            _expand(F1, mult, prefix + [(last + gamma, root)], order, side, out, steps, truncated)


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------
@dataclass
class HalfBranch:
    branch: int
    parameter_sign: int
    tangent_ray: np.ndarray

    def to_dict(self):
        return {"branch": self.branch, "t": "+" if self.parameter_sign > 0 else "-",
                "dir": np.round(self.tangent_ray, 12).tolist()}


@dataclass
class PuiseuxBranch:
    """One branch ``v = sum c_k u^(k/e)`` in the sheared coordinates ``(u, v)``.

    ``x = u + shear * v`` and ``y = v``.
    """

    e: int
    exponents: list
    coefficients: list
    truncation_order: Fraction
    real: bool
    numeric: bool
    finite: bool
    shear: int = 0
    residual_valuation: Fraction | None = None
    half_branches: list = field(default_factory=list)

    def to_dict(self):
        return {
            "e": self.e,
            "terms": [[x.numerator, x.denominator, _coeff_json(c)] for x, c in zip(self.exponents, self.coefficients)],
            "real": self.real,
            "numeric": self.numeric,
            "finite": self.finite,
            "truncation_order": str(self.truncation_order),
            "residual_valuation": None if self.residual_valuation is None else str(self.residual_valuation),
            "half_branches": [h.to_dict() for h in self.half_branches],
        }


def _same_orbit(a: _Leaf, b: _Leaf, e: int, twist: Fraction = Fraction(0), tol: float = 1e-9) -> bool:
    """Whether ``b_k = a_k exp(2 pi i x_k (k + twist))`` for some integer ``k``.

    ``twist = 0`` tests conjugacy under ``u^(1/e) -> zeta u^(1/e)``;
    ``twist = 1/2`` matches an expansion of ``F(-u, v)`` to one of ``F(u, v)``.
    """
    if [x for x, _ in a.terms] != [x for x, _ in b.terms]:
        return False
    for k in range(e):
        ok = True
        for (x, ca), (_, cb) in zip(a.terms, b.terms):
            w = cmath.exp(2j * math.pi * float(x) * (k + float(twist)))
            za, zb = _to_complex(ca), _to_complex(cb)
            if abs(za * w - zb) > tol * (1 + abs(za)):
                ok = False
                break
        if ok:
            return True
    return False


def shear_for(f: Polynomial) -> int:
    """Smallest ``c >= 0`` with ``h_f(c, 1) != 0``: the direction ``(c, 1)`` is not tangent."""
    h = leading_form(f).base
    c = 0
    while h([Fraction(c), Fraction(1)]) == 0:
        c += 1
    return c


def _sheared(f: Polynomial, c: int) -> Polynomial:
    u = Polynomial.variable(f.variables[0], f.variables)
    v = Polynomial.variable(f.variables[1], f.variables)
    return f.compose([u + v * c, v]) if c else f


def _series_power_valuation(F: dict, terms: list, upto: Fraction):
    """Lowest exponent ``<= upto`` of ``F(u, S(u))`` with a nonzero coefficient, or None."""
    total: dict = {}
    maxj = max(j for _, j in F)
    powers = [{Fraction(0): Fraction(1)}]
    for _ in range(maxj):
        prev, nxt = powers[-1], {}
        for x1, c1 in prev.items():
            for x2, c2 in terms:
                x = x1 + x2
                if x <= upto:
                    nxt[x] = _add(nxt[x], _mul(c1, c2)) if x in nxt else _mul(c1, c2)
        powers.append(nxt)
    for (i, j), a in F.items():
        for x, c in powers[j].items():
            key = i + x
            if key <= upto:
                term = _mul(a, c)
                total[key] = _add(total[key], term) if key in total else term
    scale = max((_abs(a) for a in F.values()), default=1.0)
    nz = sorted(x for x, c in total.items()
                if (c != 0 if isinstance(c, Fraction) else _abs(c) > 1e-18 * scale))
    return nz[0] if nz else None


def _ray(leaf: _Leaf, shear: int) -> np.ndarray:
    # the leading term is c1 * |u| (or higher order); u has the sign of the side
    du = leaf.side
    dv = float(_to_complex(leaf.terms[0][1]).real) if leaf.terms and leaf.terms[0][0] == 1 else 0.0
    x, y = du + shear * dv, dv
    r = np.array([x, y], dtype=float)
    return r / np.linalg.norm(r)


def puiseux_expand(f: Polynomial, order=None, shear: int | None = None) -> list:
    """Branches of ``Z(f)`` at the origin up to ``order`` with their real half-branches.

    Parameters
    ----------
    f : Polynomial
        Two-variable polynomial vanishing at the origin.
    order : rational, optional
        Truncation order; default ``2 * (first edge slope) + 2``.
    shear : int, optional
        Override the automatic shear ``x -> x + shear * y``.
    """
    if f.nvars != 2:
        raise ValueError("puiseux_expand needs a polynomial in two variables")
    if f.constant_term() != 0:
        raise AnalysisError("f does not vanish at the origin")
    c = shear_for(f) if shear is None else int(shear)
    F = _sheared(f, c)
    poly = newton_polygon(F)
    if order is None:
        first = poly.lower_edges[0].slope if poly.lower_edges else Fraction(1)
        order = 2 * first + 2
    order = Fraction(order)
    m = min(j for (i, j) in F.terms if i == 0)
    leaves_by_side = {}
    with mpmath.workprec(PRECISION_BITS):
        for side in (1, -1):
            G = F if side == 1 else F.compose([-Polynomial.variable(F.variables[0], F.variables),
                                               Polynomial.variable(F.variables[1], F.variables)])
            out: list = []
            _expand(dict(G.terms), m, [], order, side, out, [0])
            leaves_by_side[side] = out
        right, left = leaves_by_side[1], leaves_by_side[-1]
        # group right-side expansions into conjugacy orbits: one orbit per branch
        orbit_of = [-1] * len(right)
        branches: list = []
        reps: list = []
        for k, leaf in enumerate(right):
            if orbit_of[k] >= 0:
                continue
            e = leaf.ramification
            members = [j for j in range(k, len(right))
                       if orbit_of[j] < 0 and right[j].ramification == e and _same_orbit(leaf, right[j], e)]
            for j in members:
                orbit_of[j] = len(branches)
            rep = next((right[j] for j in members if right[j].real), leaf)
            reps.append([right[j] for j in members])
            branches.append(PuiseuxBranch(
                e=e, exponents=[x for x, _ in rep.terms], coefficients=[cf for _, cf in rep.terms],
                truncation_order=order, real=False, numeric=not rep.exact, finite=rep.finite, shear=c,
                residual_valuation=_series_power_valuation(dict(F.terms), rep.terms, order),
            ))
        # right half-branches: real members of each orbit
        for b, members in enumerate(reps):
            real = [leaf for leaf in members if leaf.real]
            for sign, leaf in zip((1, -1), real):
                branches[b].half_branches.append(HalfBranch(b, sign, _ray(leaf, c)))
        # left half-branches: real expansions of F(-u, v), attached to their orbit
        left_real: dict = {}
        for leaf in left:
            if not leaf.real:
                continue
            e = leaf.ramification
            b = next((b for b, members in enumerate(reps)
                      if members[0].ramification == e and _same_orbit(members[0], leaf, e, Fraction(1, 2))), None)
            if b is None:
                raise AnalysisError("could not match a left half-branch to a branch")
            left_real.setdefault(b, []).append(leaf)
        for b, leaves in sorted(left_real.items()):
            # odd e: the left side is t < 0 of the right-side parametrization
            signs = (-1,) if branches[b].e % 2 else (1, -1)
            for sign, leaf in zip(signs, leaves):
                branches[b].half_branches.append(HalfBranch(b, sign, _ray(leaf, c)))
    for br in branches:
        br.real = bool(br.half_branches)
    return branches


def half_branches(branches: list) -> list:
    """All real half-branches of a branch list."""
    return [h for b in branches for h in b.half_branches]


@dataclass
class GermVerdict:
    kind: str  # "Cusp", "C1" or "MultiBranch"
    rays: np.ndarray
    branches: list
    shear: int
    polygon: NewtonPolygon

    def to_dict(self):
        return {
            "verdict": self.kind,
            "shear": self.shear,
            "rays": np.round(self.rays, 12).tolist(),
            "edges": self.polygon.to_dict()["edges"],
            "branches": [b.to_dict() for b in self.branches],
        }


def classify_germ(f: Polynomial, order=None) -> GermVerdict:
    """Cusp, C1 or MultiBranch for the germ of ``Z(f)`` at the origin.

    Two half-branches with coinciding tangent rays make a cusp, two with
    opposite rays a C1 curve; anything else is several curves through the
    origin and is reported with its full ray fan.
    """
    branches = puiseux_expand(f, order)
    halves = half_branches(branches)
    if not halves:
        raise IsolatedPointError("the origin is an isolated real point of the curve")
    rays = np.array([h.tangent_ray for h in halves])
    rays = rays[np.lexsort(np.round(rays, 12).T[::-1])]
    kind = "MultiBranch"
    if len(halves) == 2:
        a, b = rays
        if np.linalg.norm(a - b) < 1e-9:
            kind = "Cusp"
        elif np.linalg.norm(a + b) < 1e-9:
            kind = "C1"
    shear = branches[0].shear if branches else 0
    return GermVerdict(kind, rays, branches, shear, newton_polygon(_sheared(f, shear)))
