"""Sampled hypersurfaces and their support balls.

A sample cloud of ``Z(f)`` is built by Newton projection from grid seeds.
For every regular sample the largest ball tangent at that sample on each
side of the surface, with no other sample inside, is found by bisection;
the infimum over samples gives the positive-support and double-support
estimates of a region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from ._sampling import gauss_newton, greedy_merge, lexsort_rows, newton_project
from .errors import AnalysisError, EmptyVarietyError
from .expr import Polynomial

# samples must lie within RESIDUAL_TOL * spacing of Z(f)
RESIDUAL_TOL = 1e-9
# gradients below SINGULAR_GRAD times the median are treated as singular
SINGULAR_GRAD = 1e-8
CONVEXITY_EPS = 1e-6


def _region_array(region, n: int) -> np.ndarray:
    box = np.asarray(region, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (n, 1))
    if box.shape != (n, 2) or not np.all(np.isfinite(box)) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"region must be {n} finite intervals (lo, hi) with lo < hi")
    return box


@dataclass
class SampledHypersurface:
    """Points of ``Z(f)`` in a box with unit normals ``grad f / |grad f|``.

    Samples where the gradient (nearly) vanishes are kept apart in
    ``quarantined``; they still count as obstacles for support balls.
    """

    points: np.ndarray
    normals: np.ndarray
    region: np.ndarray
    spacing: float
    quarantined: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    f: Polynomial | None = None

    def __len__(self):
        return len(self.points)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.region[:, 1] - self.region[:, 0]))

    def all_points(self) -> np.ndarray:
        return np.concatenate([self.points, self.quarantined.reshape(-1, self.points.shape[1])])

    def csv_rows(self):
        n = self.points.shape[1]
        names = "xyz"[:n]
        rows = [tuple(names) + tuple("n" + c for c in names)]
        rows += [tuple(f"{v:.12g}" for v in (*pt, *nv)) for pt, nv in zip(self.points, self.normals)]
        return rows


def sample_surface(f: Polynomial, region, spacing: float, seed: int = 42, constraints=(),
                   ) -> SampledHypersurface:
    """Sample ``Z(f)`` (optionally cut by ``constraints >= 0``) inside a box.

    Seeds are the centres of grid cells of size ``spacing`` whose corner
    values of ``f`` change sign; each is projected onto ``Z(f)`` by damped
    Newton steps and the results are thinned to a ``spacing / 2`` net.

    Parameters
    ----------
    f : Polynomial
    region : array_like
        ``[(lo, hi), ...]`` per coordinate, or a single ``(lo, hi)`` for all.
    spacing : float
        Target distance between neighbouring samples.
    seed : int
        Seeds the sub-cell offset of the grid.
    constraints : sequence of Polynomial
        Samples are kept only where every constraint is ``>= 0``.
    """
    n = f.nvars
    box = _region_array(region, n)
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    rng = np.random.default_rng(seed)
    counts = np.ceil((box[:, 1] - box[:, 0]) / spacing).astype(int) + 1
    if np.prod(counts.astype(float)) > 5e7:
        raise AnalysisError("region too large for this spacing")
    offset = rng.uniform(-0.5, 0.5, size=n) * spacing
    axes = [box[k, 0] + offset[k] + spacing * np.arange(counts[k] + 1) for k in range(n)]
    value = f.lambdify()
    grads = [g.lambdify() for g in f.gradient()]

    def grad(x):
        return np.stack([g(x) for g in grads], axis=-1)

    vals = value(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1))
    sgn = np.sign(vals)
    corners = [sgn[tuple(slice(o, o + c) for o, c in zip(off, counts))] for off in product((0, 1), repeat=n)]
    lo_s, hi_s = np.min(corners, axis=0), np.max(corners, axis=0)
    active = (lo_s <= 0) & (hi_s >= 0)
    idx = np.argwhere(active)
    if not len(idx):
        raise EmptyVarietyError("no zero of f found in the region")
    seeds = np.stack([axes[k][idx[:, k]] + spacing / 2 for k in range(n)], axis=1)
    pts, _ = newton_project(value, grad, seeds, max_step=spacing)
    inside = np.all((pts >= box[:, 0]) & (pts <= box[:, 1]), axis=1)
    pts = pts[inside]
    for c in constraints:
        pts = pts[c.lambdify()(pts) >= 0]
    g = grad(pts)
    gn = np.linalg.norm(g, axis=1)
    fv = np.abs(value(pts))
    # distance to Z(f) estimated by |f| / |grad f|
    on = (fv == 0) | (fv <= RESIDUAL_TOL * spacing * gn)
    pts, g, gn = pts[on], g[on], gn[on]
    if not len(pts):
        raise EmptyVarietyError("no sample converged onto Z(f) in the region")
    order = lexsort_rows(pts)
    pts, g, gn = pts[order], g[order], gn[order]
    keep = greedy_merge(pts, spacing / 2)
    pts, g, gn = pts[keep], g[keep], gn[keep]
    gscale = float(np.median(gn))
    singular = gn <= SINGULAR_GRAD * gscale
    sing = _singular_points(f, pts[gn < 0.1 * gscale], box, gscale)
    if len(sing):
        sing = sing[greedy_merge(sing, spacing / 2, order=lexsort_rows(sing))]
    quarantined = np.concatenate([pts[singular], sing]) if len(sing) else pts[singular]
    normals = g[~singular] / gn[~singular, None]
    return SampledHypersurface(pts[~singular], normals, box, float(spacing), quarantined, f)


def _singular_points(f: Polynomial, seeds: np.ndarray, box: np.ndarray, gscale: float) -> np.ndarray:
    """Points of the box where ``f`` and its gradient vanish, refined from seeds with small gradient.

    ``gscale`` is a typical gradient norm of the samples; residuals are
    judged against it so the test does not depend on the region's scale.
    """
    if not len(seeds):
        return seeds
    system = [f, *f.gradient()]
    x = gauss_newton(system, seeds)
    F = np.stack([r.lambdify()(x) for r in system], axis=-1)
    ok = np.all(np.abs(F) <= 1e-10 * gscale, axis=1) & np.all((x >= box[:, 0]) & (x <= box[:, 1]), axis=1)
    return x[ok]


def _radii(pts: np.ndarray, normals: np.ndarray, index: np.ndarray, side: int, r_max: float,
           slack: float, chunk: int = 256) -> np.ndarray:
    """Support radii of the samples ``index`` on one side.

    A sample ``x`` with offset ``d = x - q`` enters the shrunken open ball
    ``B(q + side r N, r - slack)`` exactly when ``side <d, N> > slack`` and
    ``r > (|d|^2 - slack^2) / (2 (side <d, N> - slack))``; the support radius
    is the smallest such threshold, capped at ``r_max``. This is the value
    a bisection on ``r`` converges to, computed without iterating.
    """
    out = np.empty(len(index))
    for start in range(0, len(index), chunk):
        rows = index[start:start + chunk]
        d = pts[None, :, :] - pts[rows, None, :]
        a = side * np.einsum("ijk,ik->ij", d, normals[rows])
        d2 = np.einsum("ijk,ijk->ij", d, d)
        hit = a > slack
        thr = np.where(hit, (d2 - slack ** 2) / np.where(hit, 2 * (a - slack), 1.0), np.inf)
        out[start:start + chunk] = np.minimum(thr.min(axis=1), r_max)
    return out


def support_radius(S: SampledHypersurface, q: int, side: int, r_max: float | None = None) -> float:
    """Largest ball radius (``<= r_max``) tangent at sample ``q`` on ``side`` avoiding the cloud.

    The ball is centred at ``q + side * r * N``; any other sample closer
    than ``r - spacing`` to the centre punctures it.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    r_max = S.diameter if r_max is None else float(r_max)
    pts = S.all_points()
    normals = np.concatenate([S.normals, np.zeros((len(pts) - len(S.points), pts.shape[1]))])
    return float(_radii(pts, normals, np.array([q]), side, r_max, S.spacing)[0])


@dataclass
class SupportReport:
    points: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    uniform_r: float
    double_uniform_r: float
    failures: np.ndarray
    threshold: float
    r_max: float

    def to_dict(self):
        return {
            "samples": int(len(self.points)),
            "uniform_r": round(self.uniform_r, 12),
            "double_uniform_r": round(self.double_uniform_r, 12),
            "threshold": self.threshold,
            "r_max": round(self.r_max, 12),
            "failures": np.round(self.failures, 10).tolist(),
        }


def positive_support(S: SampledHypersurface, r_max: float | None = None, threshold: float | None = None,
                     max_failures: int = 20) -> SupportReport:
    """Per-sample support radii on both sides and their infima.

    ``uniform_r`` is the infimum over samples of the larger side radius
    (positive support); ``double_uniform_r`` the infimum of the smaller
    (double positive support). Samples whose larger radius falls below
    ``threshold`` (default ``1e-3`` times the region diameter) are listed
    as failures, closest to the origin first.
    """
    if not len(S.points):
        raise EmptyVarietyError("no regular samples")
    r_max = S.diameter if r_max is None else float(r_max)
    threshold = 1e-3 * S.diameter if threshold is None else float(threshold)
    pts = S.all_points()
    normals = np.concatenate([S.normals, np.zeros((len(pts) - len(S.points), pts.shape[1]))])
    index = np.arange(len(S.points))
    rp = _radii(pts, normals, index, 1, r_max, S.spacing)
    rm = _radii(pts, normals, index, -1, r_max, S.spacing)
    best = np.maximum(rp, rm)
    bad = np.nonzero(best < threshold)[0]
    bad = bad[np.argsort(np.linalg.norm(S.points[bad], axis=1), kind="stable")][:max_failures]
    return SupportReport(S.points, rp, rm, float(best.min()), float(np.minimum(rp, rm).min()),
                         S.points[bad], threshold, r_max)


def convexity_probe(S: SampledHypersurface, eps: float = CONVEXITY_EPS, chunk: int = 512):
    """Whether every sample sees all others on one side of its tangent hyperplane.

    Returns ``(True, None)`` or ``(False, (q, x))`` with a violating pair:
    ``x`` lies strictly on both sides of the tangent plane at ``q`` in the
    sense that points exist with ``<x - q, N>`` below ``-eps |x - q|`` and
    others above ``eps |x - q|``.
    """
    pts = S.points
    allp = S.all_points()
    for start in range(0, len(pts), chunk):
        q = pts[start:start + chunk]
        N = S.normals[start:start + chunk]
        diff = allp[None, :, :] - q[:, None, :]
        dist = np.linalg.norm(diff, axis=2)
        dots = np.einsum("ijk,ik->ij", diff, N)
        below = dots < -eps * dist
        above = dots > eps * dist
        both = below.any(axis=1) & above.any(axis=1)
        if both.any():
            i = int(np.argmax(both))
            # witness: the sample deepest on the minority side
            side = below[i] if below[i].sum() <= above[i].sum() else above[i]
            j = int(np.argmax(np.where(side, np.abs(dots[i]) / np.maximum(dist[i], 1e-300), -1)))
            return False, (q[i].copy(), allp[j].copy())
    return True, None


def normal_modulus(S: SampledHypersurface, radius: float) -> float:
    """Largest ratio of normal angle to distance over sample pairs closer than ``radius``.

    Normals are compared up to sign, so the value does not depend on an
    orientation of the cloud.
    """
    pairs = cKDTree(S.points).query_pairs(radius, output_type="ndarray")
    if not len(pairs):
        return 0.0
    a, b = pairs[:, 0], pairs[:, 1]
    cos = np.abs(np.einsum("ij,ij->i", S.normals[a], S.normals[b]))
    ang = np.arccos(np.clip(cos, -1, 1))
    dist = np.linalg.norm(S.points[a] - S.points[b], axis=1)
    return float(np.max(ang / np.maximum(dist, 1e-300)))


def sphere_invert(x, center, radius: float) -> np.ndarray:
    """Inversion in the sphere ``S(center, radius)``: ``c + R^2 (x - c) / |x - c|^2``."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    d = x - c
    n2 = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(n2 == 0):
        raise ValueError("cannot invert the centre of the sphere")
    return c + radius ** 2 * d / n2
