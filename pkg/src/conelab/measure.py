"""Local Hausdorff measure, lower density and tangent-cone multiplicity.

Lengths (curves in the plane) are measured by marching squares and areas
(surfaces in space) by marching cubes. The ball ``B(p, r)`` is split into
dyadic annuli, each with its own grid whose cell size is ``resolution``
times the annulus' outer radius, so thin cusp regions near ``p`` are
resolved as finely as the outer part of the ball. Annuli are cached, so a
dyadic radius ladder reuses every computation.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
from skimage import measure as skm

from .cone import AlgebraicCone, EmptyCone, FlatCone, RayFan, SampledCone
from .errors import AnalysisError, PointNotOnVariety
from .expr import Polynomial
from .variety import Variety, as_point

DEFAULT_RADII = tuple(2.0 ** -k for k in range(3, 10))
DEFAULT_RESOLUTION = 1e-3
MAX_RESOLUTION = 1 / 32
# finest relative cell used for surfaces; finer requests are clamped
SURFACE_RESOLUTION_FLOOR = 1 / 64
# the innermost ball left unmeasured has radius r * 2**-INNER_DEPTH
INNER_DEPTH = 12


def unit_ball_measure(d: int, r: float = 1.0) -> float:
    """``H^d(r B^d)``: ``2r`` for segments, ``pi r^2`` for discs."""
    if d == 1:
        return 2.0 * r
    if d == 2:
        return math.pi * r * r
    raise ValueError("only d = 1, 2 are supported")


@dataclass
class DensityEstimate:
    """Ratio table of ``H^d(X ∩ B(p, r)) / H^d(r B^d)`` over a radius ladder."""

    dim: int
    radii: list
    measures: list
    ratios: list
    liminf_estimate: float
    resolution: float
    trend: str = "flat"

    def to_dict(self):
        return {
            "dim": self.dim,
            "radii": [float(r) for r in self.radii],
            "measures": [round(float(m), 12) for m in self.measures],
            "ratios": [round(float(q), 12) for q in self.ratios],
            "liminf_estimate": round(float(self.liminf_estimate), 12),
            "resolution": self.resolution,
            "trend": self.trend,
        }

    def csv_rows(self):
        """Rows ``(r, measure, ratio)`` with a header row first."""
        rows = [("r", "measure", "ratio")]
        rows += [(f"{r:.12g}", f"{m:.12g}", f"{q:.12g}") for r, m, q in zip(self.radii, self.measures, self.ratios)]
        return rows


@dataclass
class MultiplicityEstimate:
    numerator: DensityEstimate
    denominator: DensityEstimate
    value: float

    def to_dict(self):
        return {
            "value": round(float(self.value), 12),
            "numerator": self.numerator.to_dict(),
            "denominator": self.denominator.to_dict(),
        }


def _trend(ratios) -> str:
    diffs = np.diff(np.asarray(ratios, dtype=float))
    if np.all(np.abs(diffs) <= 1e-3 * max(1.0, np.max(np.abs(ratios)))):
        return "flat"
    if np.all(diffs <= 1e-12):
        return "decreasing"
    if np.all(diffs >= -1e-12):
        return "increasing"
    return "mixed"


# ---------------------------------------------------------------------------
# annulus measurement
# ---------------------------------------------------------------------------
def _clip_fraction(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fraction of a segment where a linear function with end values a, b is >= 0."""
    both = (a >= 0) & (b >= 0)
    none = (a < 0) & (b < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(a >= 0, a / (a - b), b / (b - a))
    return np.where(both, 1.0, np.where(none, 0.0, np.clip(t, 0.0, 1.0)))


def _grid(center: np.ndarray, half: float, cell: float, rng: np.random.Generator):
    n = int(math.ceil(2 * half / cell)) + 2
    origin = center - half - cell * rng.uniform(0.0, 1.0, size=len(center))
    axes = [origin[k] + cell * np.arange(n) for k in range(len(center))]
    return origin, np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _annulus_length(patch, center, r_in, r_out, cell, rng) -> float:
    f = patch.equation.lambdify()
    origin, pts = _grid(center, r_out, cell, rng)
    vals = f(pts)
    total = 0.0
    for contour in skm.find_contours(vals, 0.0):
        xy = origin + cell * contour
        a, b = xy[:-1], xy[1:]
        seg = np.linalg.norm(b - a, axis=1)
        if not len(seg):
            continue
        ra = np.linalg.norm(a - center, axis=1)
        rb = np.linalg.norm(b - center, axis=1)
        keep = _clip_fraction(r_out - ra, r_out - rb) - _clip_fraction(r_in - ra, r_in - rb)
        keep = np.clip(keep, 0.0, 1.0)
        for c in patch.constraints:
            g = c.lambdify()
            keep = np.minimum(keep, _clip_fraction(g(a), g(b)))
        total += float(np.sum(seg * keep))
    return total


def _annulus_area(patch, center, r_in, r_out, cell, rng) -> float:
    f = patch.equation.lambdify()
    origin, pts = _grid(center, r_out, cell, rng)
    vals = f(pts)
    if vals.min() > 0 or vals.max() < 0:
        return 0.0
    try:
        verts, faces, _, _ = skm.marching_cubes(vals, level=0.0, spacing=(cell,) * 3)
    except (ValueError, RuntimeError):
        return 0.0
    verts = verts + origin
    tri = verts[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    cen = tri.mean(axis=1)
    rad = np.linalg.norm(cen - center, axis=1)
    keep = (rad < r_out) & (rad >= r_in)
    for c in patch.constraints:
        keep &= c.lambdify()(cen) >= 0
    return float(np.sum(areas[keep]))


class _AnnulusCache:
    """Memo of per-annulus measures for one (variety, point, resolution)."""

    def __init__(self, V: Variety, p, resolution: float, seed: int):
        self.V = V
        self.center = as_point(p, V.ndim, exact=False)
        self.resolution = resolution
        self.seed = seed
        self.memo: dict = {}

    def annulus(self, r_in: float, r_out: float) -> float:
        key = (float.hex(r_in), float.hex(r_out))
        if key not in self.memo:
            rng = np.random.default_rng([self.seed, zlib.crc32(repr(key).encode())])
            cell = self.resolution * r_out
            fn = _annulus_length if self.V.ndim == 2 else _annulus_area
            self.memo[key] = sum(fn(patch, self.center, r_in, r_out, cell, rng) for patch in self.V.patches)
        return self.memo[key]

    def ball(self, r: float) -> float:
        total, outer = 0.0, r
        for _ in range(INNER_DEPTH):
            total += self.annulus(outer / 2, outer)
            outer /= 2
        return total


def _effective_resolution(V: Variety, resolution: float) -> float:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if resolution > MAX_RESOLUTION:
        raise AnalysisError(f"resolution {resolution:g} is too coarse (relative cell must be <= 1/32)")
    if V.ndim == 3:
        return max(resolution, SURFACE_RESOLUTION_FLOOR)
    if V.ndim != 2:
        raise AnalysisError("measure estimation supports curves in the plane and surfaces in space only")
    return resolution


def _as_variety(V) -> Variety:
    return Variety.from_polynomial(V) if isinstance(V, Polynomial) else V


def local_measure(V: Variety, p, r: float, resolution: float = DEFAULT_RESOLUTION, seed: int = 42) -> float:
    """``H^d(V ∩ B(p, r))`` for d = ambient dimension - 1.

    Parameters
    ----------
    V : Variety
        Curve in the plane or surface in space.
    p : point
        Ball centre; need not lie on ``V``.
    r : float
        Ball radius.
    resolution : float
        Grid cell size relative to the radius of each dyadic annulus
        (at most 1/32).
    seed : int
        Seeds the sub-cell grid offsets.
    """
    V = _as_variety(V)
    res = _effective_resolution(V, resolution)
    return _AnnulusCache(V, p, res, seed).ball(float(r))


def lower_density(V: Variety, p, radius_ladder=DEFAULT_RADII, resolution: float = DEFAULT_RESOLUTION,
                  seed: int = 42) -> DensityEstimate:
    """Density ratios along a decreasing radius ladder; the liminf is the tail minimum."""
    V = _as_variety(V)
    if not V.contains(as_point(p, V.ndim)):
        raise PointNotOnVariety("point is not on the variety")
    radii = sorted((float(r) for r in radius_ladder), reverse=True)
    if len(radii) < 3 or len(set(radii)) != len(radii):
        raise ValueError("radius ladder needs at least 3 distinct entries")
    res = _effective_resolution(V, resolution)
    cache = _AnnulusCache(V, p, res, seed)
    d = V.dim
    measures = [cache.ball(r) for r in radii]
    ratios = [m / unit_ball_measure(d, r) for m, r in zip(measures, radii)]
    return DensityEstimate(d, radii, measures, ratios, min(ratios[-3:]), res, _trend(ratios))


def cone_density(cone, d: int, resolution: float = DEFAULT_RESOLUTION, seed: int = 42) -> float:
    """Density of a cone at its vertex (the same at every radius)."""
    if isinstance(cone, EmptyCone):
        return 0.0
    if isinstance(cone, FlatCone):
        return 1.0
    if isinstance(cone, (RayFan, SampledCone)):
        dirs = np.asarray(cone.directions)
        if dirs.shape[1] != 2:
            raise AnalysisError("sampled cones in space have no density estimate; pass the algebraic cone")
        return len(dirs) / 2.0
    if isinstance(cone, AlgebraicCone):
        h = cone.form.base
        res = _effective_resolution(Variety.from_polynomial(h), resolution)
        origin = [0.0] * h.nvars
        m = _AnnulusCache(Variety.from_polynomial(h), origin, res, seed).annulus(0.5, 1.0)
        return m / (unit_ball_measure(d, 1.0) - unit_ball_measure(d, 0.5))
    raise TypeError(f"unsupported cone descriptor {type(cone).__name__}")


def multiplicity(V: Variety, p, cone, radius_ladder=DEFAULT_RADII, resolution: float = DEFAULT_RESOLUTION,
                 seed: int = 42) -> MultiplicityEstimate:
    """Ratio of the lower densities of ``V`` and of its tangent cone at ``p``."""
    V = _as_variety(V)
    num = lower_density(V, p, radius_ladder, resolution, seed)
    dens = cone_density(cone, V.dim, resolution, seed)
    if dens <= 0:
        raise AnalysisError("tangent cone is empty; multiplicity undefined")
    radii = num.radii
    den = DensityEstimate(
        V.dim, radii, [dens * unit_ball_measure(V.dim, r) for r in radii], [dens] * len(radii), dens,
        num.resolution,
    )
    return MultiplicityEstimate(num, den, num.liminf_estimate / dens)
