"""Tangent cones three ways: the algebraic leading form, the sign-change
locus of that form, and homothetic sampling of the set itself."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from ._sampling import _circle_frames, fibonacci_sphere, greedy_merge, lexsort_rows, sphere_zeros, unit
from .errors import EmptyVarietyError, PointNotOnVariety
from .expr import (
    FactorizationTimeout,
    FactorList,
    HomogeneousForm,
    Polynomial,
    evaluate,
    leading_form,
    square_free_factor,
    translate,
)
from .variety import Variety, as_point

DEFAULT_SCALES = (1e2, 1e3, 1e4)
DEFAULT_TOLERANCE = 1e-2


def canonical_normal(v) -> np.ndarray:
    """Unit vector with first nonzero coordinate positive."""
    v = unit(np.asarray(v, dtype=float))
    for c in v:
        if abs(c) > 1e-12:
            return v if c > 0 else -v
    return v


# ---------------------------------------------------------------------------
# cone descriptors
# ---------------------------------------------------------------------------
@dataclass
class EmptyCone:
    kind = "empty"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass
class RayFan:
    directions: np.ndarray
    kind = "ray_fan"

    def __post_init__(self):
        self.directions = unit(np.atleast_2d(np.asarray(self.directions, dtype=float)))

    def to_dict(self):
        return {"kind": self.kind, "directions": _round_list(self.directions)}


@dataclass
class FlatCone:
    normal: np.ndarray
    kind = "flat"

    def __post_init__(self):
        self.normal = canonical_normal(self.normal)

    def to_dict(self):
        return {"kind": self.kind, "normal": _round_list(self.normal)}


@dataclass
class AlgebraicCone:
    form: HomogeneousForm
    kind = "algebraic"

    def to_dict(self):
        return {"kind": self.kind, "form": str(self.form.base), "degree": self.form.degree}


@dataclass
class SampledCone:
    directions: np.ndarray
    scale_ladder: tuple[float, ...]
    tolerance: float
    residuals: np.ndarray = field(default=None, repr=False)
    kind = "sampled"

    def to_dict(self):
        return {
            "kind": self.kind,
            "directions": _round_list(self.directions),
            "scale_ladder": list(self.scale_ladder),
            "tolerance": self.tolerance,
        }


ConeDescriptor = Union[EmptyCone, RayFan, FlatCone, AlgebraicCone, SampledCone]


def _round_list(a, digits: int = 10):
    return np.round(np.asarray(a, dtype=float), digits).tolist()


@dataclass
class RealizableFactor:
    factor: Polynomial
    multiplicity: int
    has_full_dimensional_real_zero: bool
    evidence: np.ndarray


@dataclass
class SignLocus:
    """Odd/even split of a homogeneous form: ``h = constant * odd_part * even_part**2``."""

    form: HomogeneousForm
    constant: Fraction
    odd_part: Polynomial
    even_part: Polynomial
    factors: FactorList | None
    realizable: list[RealizableFactor]
    exact: bool = True

    def realizable_odd_factors(self) -> list[Polynomial]:
        return [r.factor for r in self.realizable if r.multiplicity % 2 and r.has_full_dimensional_real_zero]

    def reassemble(self) -> Polynomial:
        return self.odd_part * self.even_part ** 2 * self.constant


@dataclass(frozen=True)
class ConeOfRaysQuery:
    """The set of points of ``B(center, radius)`` whose ray from ``center`` is
    within ``half_angle`` of ``direction``."""

    center: tuple
    direction: tuple
    half_angle: float
    radius: float

    def __post_init__(self):
        if not 0 < self.half_angle <= 2:
            raise ValueError("half_angle must lie in (0, 2]")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center, dtype=float)
        r = np.linalg.norm(x, axis=1)
        d = unit(np.asarray(self.direction, dtype=float))
        dirs = unit(x)
        return (r > 0) & (r <= self.radius) & (np.linalg.norm(dirs - d, axis=1) <= self.half_angle)


# ---------------------------------------------------------------------------
# algebraic route
# ---------------------------------------------------------------------------
def algebraic_cone(f: Polynomial, p) -> HomogeneousForm:
    """Leading form of ``f`` recentred at ``p``; its zero set contains the symmetric tangent cone."""
    if f.is_zero():
        raise ValueError("zero polynomial")
    p = as_point(p, f.nvars)
    if evaluate(f, p) != 0:
        raise PointNotOnVariety(f"f({', '.join(map(str, p))}) = {evaluate(f, p)} != 0")
    return leading_form(translate(f, p))


def _sign_change_on_sphere(q: Polynomial, n_samples: int, seed: int) -> bool:
    pts = fibonacci_sphere(n_samples, q.nvars, seed)
    vals = q.lambdify()(pts)
    scale = np.max(np.abs(vals))
    if scale == 0:
        return False
    return bool((vals > 1e-12 * scale).any() and (vals < -1e-12 * scale).any())


def sign_change_locus(h: HomogeneousForm, samples: int = 4096, seed: int = 42,
                      degree_cap: int = 24) -> SignLocus:
    """Split ``h`` into odd and even multiplicity parts and screen odd factors for real sign changes."""
    n = h.base.nvars
    one = Polynomial.constant(1, h.base.variables)
    try:
        fl = square_free_factor(h.base, degree_cap=degree_cap)
    except FactorizationTimeout:
        # whole form treated as one odd factor; flatness then falls back to sampling
        changes = _sign_change_on_sphere(h.base, samples, seed)
        rf = RealizableFactor(h.base, 1, changes, _factor_zero_directions(h.base, seed) if changes else np.zeros((0, n)))
        return SignLocus(h, Fraction(1), h.base, one, None, [rf], exact=False)
    odd, even = one, one
    realizable = []
    for fac, k in fl.factors:
        if k % 2:
            odd = odd * fac
        even = even * fac ** (k // 2)
        if k % 2:
            changes = _sign_change_on_sphere(fac, samples, seed)
            ev = _factor_zero_directions(fac, seed, n_circles=60, n_angles=720)[:32] if changes else np.zeros((0, n))
        else:
            changes, ev = False, np.zeros((0, n))
        realizable.append(RealizableFactor(fac, k, changes, ev))
    return SignLocus(h, fl.constant, odd, even, fl, realizable)


def _factor_zero_directions(q: Polynomial, seed: int, n_circles: int = 1800, n_angles: int = 2048) -> np.ndarray:
    pts = sphere_zeros(q.lambdify(), q.nvars, 1.0, n_angles=n_angles, n_circles=n_circles,
                       seed=seed, touching=False)
    return unit(pts)


def sign_change_directions(locus: SignLocus, seed: int = 42, n_circles: int = 1800,
                           n_angles: int = 2048) -> np.ndarray:
    """Unit directions where the leading form changes sign (zeros of realizable odd factors)."""
    n = locus.form.base.nvars
    out = [
        _factor_zero_directions(r.factor, seed, n_circles, n_angles)
        for r in locus.realizable
        if r.multiplicity % 2 and r.has_full_dimensional_real_zero
    ]
    return np.concatenate(out) if out else np.zeros((0, n))


def is_flat(h: HomogeneousForm, locus: SignLocus, seed: int = 42) -> np.ndarray | None:
    """Canonical unit normal when the sign-change locus is a single hyperplane, else ``None``."""
    if not locus.exact:
        return _flat_by_sampling(locus, seed)
    odd = locus.realizable_odd_factors()
    if len(odd) == 1 and odd[0].is_linear_form():
        return canonical_normal([float(c) for c in odd[0].linear_coefficients()])
    return None


def _flat_by_sampling(locus: SignLocus, seed: int, tol: float = 1e-6) -> np.ndarray | None:
    dirs = sign_change_directions(locus, seed=seed, n_circles=300, n_angles=1024)
    if len(dirs) < locus.form.base.nvars:
        return None
    _, s, vt = np.linalg.svd(dirs, full_matrices=False)
    normal = vt[-1]
    if np.max(np.abs(dirs @ normal)) > tol:
        return None
    return canonical_normal(normal)


# ---------------------------------------------------------------------------
# sampled route
# ---------------------------------------------------------------------------
def _patch_functions(V: Variety, p):
    """Numeric (equation, [constraints]) evaluators in coordinates centred at ``p``."""
    out = []
    for patch in V.patches_through(p):
        t = patch.translated(p)
        out.append((t.equation.lambdify(), [c.lambdify() for c in t.constraints]))
    return out


def _directions_at_scale(funcs, dim: int, rho: float, seed: int, n_angles: int, n_circles: int):
    found, ids = [], []
    for eq, cons in funcs:
        pts, cid = sphere_zeros(eq, dim, rho, n_angles=n_angles, n_circles=n_circles, seed=seed,
                                return_ids=True)
        if len(pts) and cons:
            ok = np.ones(len(pts), dtype=bool)
            for c in cons:
                ok &= c(pts) >= -1e-12
            pts, cid = pts[ok], cid[ok]
        found.append(pts)
        ids.append(cid)
    pts = np.concatenate(found) if found else np.zeros((0, dim))
    cid = np.concatenate(ids) if ids else np.zeros(0, dtype=int)
    return unit(pts), cid


def sampled_cone(V: Variety, p, scale_ladder: Sequence[float] = DEFAULT_SCALES,
                 tolerance: float = DEFAULT_TOLERANCE, seed: int = 42,
                 n_angles: int | None = None, n_circles: int | None = None) -> SampledCone:
    """Directions of secant rays from ``p`` that persist through a ladder of homothetic expansions.

    At each scale ``lam`` (the ladder plus two geometric intermediate scales per step) the set is
    intersected with the sphere of radius ``1/lam`` about ``p`` along a fixed
    family of great circles. Each direction found at the finest scale is
    tracked back along its own great circle through the coarser scales; it
    is kept when the matches approach it monotonically, and its limit is
    estimated by repeated Aitken extrapolation of the circle angle. Kept directions are merged greedily at
    ``tolerance / 2``, lowest extrapolation residual first.
    """
    if isinstance(V, Polynomial):
        V = Variety.from_polynomial(V)
    scales = sorted(float(s) for s in scale_ladder)
    if len(scales) < 3:
        raise ValueError("scale ladder needs at least 3 entries")
    p_exact = as_point(p, V.ndim)
    if not V.contains(p_exact):
        raise PointNotOnVariety("point is not on the variety")
    dim = V.ndim
    if n_angles is None:
        n_angles = 8192 if dim == 2 else 1440
    if n_circles is None:
        n_circles = 1 if dim == 2 else 1800
    funcs = _patch_functions(V, p_exact)
    per_scale = []
    for lam in _refined(scales):
        d, cid = _directions_at_scale(funcs, dim, 1.0 / lam, seed, n_angles, n_circles)
        if not len(d):
            raise EmptyVarietyError(f"no variety points at scale {lam:g}")
        per_scale.append((d, cid))

    finest, fid = per_scale[-1]
    A, B = _circle_frames(dim, n_circles, seed)
    # angle of each tracked direction along its own great circle
    theta_fine = np.arctan2(np.einsum("ij,ij->i", finest, B[fid]), np.einsum("ij,ij->i", finest, A[fid]))
    seq = np.full((len(finest), len(per_scale)), np.nan)
    seq[:, -1] = theta_fine
    for k, (d, cid) in enumerate(per_scale[:-1]):
        theta = np.arctan2(np.einsum("ij,ij->i", d, B[cid]), np.einsum("ij,ij->i", d, A[cid]))
        for circle in np.unique(fid):
            rows = np.nonzero(fid == circle)[0]
            cand = theta[cid == circle]
            if not len(cand):
                continue
            diff = _wrap(cand[None, :] - theta_fine[rows, None])
            j = np.argmin(np.abs(diff), axis=1)
            seq[rows, k] = theta_fine[rows] + diff[np.arange(len(rows)), j]
    complete = ~np.isnan(seq).any(axis=1)
    limit_theta, residuals, accepted = _extrapolate(seq[complete], tolerance)
    rows = np.nonzero(complete)[0][accepted]
    limit_theta, residuals = limit_theta[accepted], residuals[accepted]
    if not len(rows):
        raise EmptyVarietyError("no direction persists through the scale ladder")
    c = fid[rows]
    limits = unit(np.cos(limit_theta)[:, None] * A[c] + np.sin(limit_theta)[:, None] * B[c])
    order = np.lexsort((*np.round(limits, 9).T[::-1], np.round(residuals, 12)))
    keep = greedy_merge(limits, tolerance / 2, order=order)
    kept = limits[keep]
    final = lexsort_rows(kept)
    return SampledCone(kept[final], tuple(scales), tolerance, residuals[keep][final])


def _refined(scales, inserts: int = 2):
    """The ladder with ``inserts`` geometrically spaced scales between neighbours."""
    out = [scales[0]]
    for lo, hi in zip(scales, scales[1:]):
        out += [float(lo * (hi / lo) ** (j / (inserts + 1))) for j in range(1, inserts + 1)] + [hi]
    return out


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _aitken(s: np.ndarray) -> np.ndarray:
    """One Aitken delta-squared pass along axis 1; columns shrink by two."""
    d1, d2 = s[:, 1:-1] - s[:, :-2], s[:, 2:] - s[:, 1:-1]
    den = d2 - d1
    q = np.divide(d2, d1, out=np.zeros_like(d2), where=np.abs(d1) > 1e-13)
    ok = (np.abs(d1) > 1e-13) & (q > 0) & (q < 0.95) & (np.abs(den) > 1e-15)
    shift = np.divide(d2 ** 2, den, out=np.zeros_like(d2), where=ok)
    return s[:, 2:] - shift


def _extrapolate(seq: np.ndarray, tolerance: float, gate: float = 0.5):
    """Limit angles for sequences ``seq[i, k]`` (coarse to fine) by repeated Aitken passes.

    Each pass is kept only while it moves the estimate less than the pass
    before it. A sequence is accepted when its distance to the limit shrinks
    monotonically (to within ``tolerance / 2``) and never exceeds ``gate``.
    """
    limits = seq[:, -1].copy()
    last_shift = np.full(len(seq), np.inf)
    s = seq
    while s.shape[1] >= 3:
        s = _aitken(s)
        est = s[:, -1]
        shift = np.abs(est - limits)
        better = shift < last_shift
        limits = np.where(better, est, limits)
        last_shift = np.where(better, shift, 0.0)
    residuals = np.abs(limits - seq[:, -1])
    dev = np.abs(seq - limits[:, None])
    monotone = np.all(np.diff(dev, axis=1) <= tolerance / 2, axis=1)
    accepted = monotone & (dev.max(axis=1) <= gate)
    return limits, residuals, accepted


def symmetrize(c: SampledCone | RayFan, angular_tol: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """Directions of the cone united with its reflection, deduplicated."""
    d = np.asarray(c.directions, dtype=float)
    both = np.concatenate([d, -d])
    keep = greedy_merge(both, angular_tol / 2, order=lexsort_rows(both))
    return both[keep]


def is_symmetric(c: SampledCone | RayFan, angular_tol: float = DEFAULT_TOLERANCE) -> bool:
    """True iff every direction has an antipode in the cone within ``angular_tol``."""
    d = np.asarray(c.directions, dtype=float)
    if not len(d):
        return True
    dist, _ = cKDTree(d).query(-d)
    return bool(np.all(dist <= angular_tol))


def direction_components(directions: np.ndarray, link: float) -> int:
    """Number of connected clusters when directions closer than ``link`` are joined."""
    d = np.asarray(directions)
    if not len(d):
        return 0
    from scipy.sparse.csgraph import connected_components
    from scipy.sparse import coo_matrix

    pairs = cKDTree(d).query_pairs(link, output_type="ndarray")
    m = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(d), len(d))) if len(pairs) else coo_matrix((len(d), len(d)))
    return int(connected_components(m, directed=False)[0])


def is_hypersurface_candidate(c: SampledCone | RayFan, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """Whether the sampled cone looks like a topological hypersurface.

    In the plane that is exactly two rays; in space, a single connected
    curve of directions on the sphere.
    """
    d = np.asarray(c.directions)
    if d.shape[1] == 2:
        return len(d) == 2
    return len(d) > 8 and direction_components(d, 3 * tolerance) == 1


def flat_normal_of_directions(c: SampledCone | RayFan, tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray | None:
    """Normal of the hyperplane containing every direction, when the cone fills it."""
    d = np.asarray(c.directions, dtype=float)
    if d.shape[1] == 2:
        if len(d) == 2 and np.linalg.norm(d[0] + d[1]) <= tolerance:
            return canonical_normal([-d[0, 1] + d[1, 1], d[0, 0] - d[1, 0]])
        return None
    if len(d) < 3:
        return None
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    normal = vt[-1]
    if np.max(np.abs(d @ normal)) > tolerance or not is_symmetric(c, 2 * tolerance):
        return None
    return canonical_normal(normal)


def containment_residuals(c: SampledCone | RayFan, h: HomogeneousForm) -> np.ndarray:
    """``|h(u)| / max|coeff(h)|`` for each direction ``u`` of the cone."""
    vals = h.base.lambdify()(np.asarray(c.directions, dtype=float))
    return np.abs(vals) / float(h.base.max_abs_coefficient())


def angular_match(query: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Distance from each query direction to the nearest of ``directions``."""
    if not len(query):
        return np.zeros(0)
    if not len(directions):
        return np.full(len(query), np.inf)
    return cKDTree(directions).query(query)[0]
