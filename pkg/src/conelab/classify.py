"""Verdicts for singular points: evidence is computed and mapped to a regularity class.

The pipeline runs a gradient test, the algebraic tangent cone and its
sign-change locus, then either the plane-curve branch analysis (two
variables) or, for surfaces, the support probe, a normal-continuity check
and the multiplicity route. Every verdict lists the rule that fired, the
evidence behind it and any caveats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._sampling import gauss_newton, greedy_merge, lexsort_rows, sphere_zeros, unit
from .cone import (
    FlatCone,
    RayFan,
    flat_normal_of_directions,
    is_flat,
    is_hypersurface_candidate,
    is_symmetric,
    sampled_cone,
    sign_change_directions,
    sign_change_locus,
)
from .errors import AnalysisError, PointNotOnVariety
from .expr import Polynomial, leading_form, parse, square_free_factor, to_text, translate
from .measure import multiplicity
from .puiseux import IsolatedPointError, classify_germ
from .support import positive_support, sample_surface
from .variety import Variety, as_point

CLASSES = (
    "RegularPoint", "C1_Hypersurface", "C11_Hypersurface", "UnionOfC1Sheets",
    "Cusp", "NotC1", "MultiBranch", "Inconclusive",
)
THREE_HALVES = 1.5
DEFAULT_MARGIN = 0.1
# uniform support on the smallest region must keep this fraction of the largest
SUPPORT_RATIO = 0.5
DEFAULT_REGIONS = (0.5, 0.05)
DEFAULT_DELTAS = (1e-1, 1e-2, 1e-3)
THETA0 = math.pi / 4
HOELDER_RADII = tuple(10.0 ** -(2 + k / 4) for k in range(17))


@dataclass
class Options:
    """Knobs of the classification pipeline."""

    seed: int = 42
    margin: float = DEFAULT_MARGIN
    tolerance: float = 1e-2
    resolution: float = 1e-3
    regions: tuple = DEFAULT_REGIONS
    points_per_side: int = 20
    support_ratio: float = SUPPORT_RATIO
    deltas: tuple = DEFAULT_DELTAS
    theta0: float = THETA0
    hoelder: bool = True


@dataclass
class Verdict:
    point: list
    kind: str
    rule: str
    evidence: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in CLASSES:
            raise ValueError(f"unknown verdict class {self.kind!r}")

    def to_dict(self):
        return {
            "point": [str(v) for v in self.point],
            "class": self.kind,
            "rule": self.rule,
            "evidence": self.evidence,
            "caveats": list(self.caveats),
        }


def _r(x, digits: int = 10):
    return round(float(x), digits)


def _vec(v, digits: int = 10):
    return [_r(c, digits) + 0.0 for c in np.asarray(v, dtype=float)]


def _as_variety(V) -> Variety:
    if isinstance(V, str):
        return Variety.from_polynomial(parse(V))
    if isinstance(V, Polynomial):
        return Variety.from_polynomial(V)
    return V


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------
def hoelder_probe(V, p, normal, radii=HOELDER_RADII, seed: int = 42) -> float:
    """Fitted exponent ``a`` in ``|N(x) - N(p)| ~ |x - p|^a`` for a plane curve.

    Curve points are found on circles of the given radii about ``p``; at each
    radius the largest normal deviation is kept and a line is fitted to the
    log-log table. A normal that is constant near ``p`` gives ``inf``.
    """
    V = _as_variety(V)
    if V.ndim != 2:
        raise AnalysisError("the Hoelder probe is for plane curves")
    p_exact = as_point(p, 2)
    N0 = unit(np.asarray(normal, dtype=float))
    logs_r, logs_d = [], []
    seen = 0
    for patch in V.patches_through(p_exact):
        g = translate(patch.equation, p_exact)
        value = g.lambdify()
        grads = [d.lambdify() for d in g.gradient()]
        cons = [translate(c, p_exact).lambdify() for c in patch.constraints]
        for r in radii:
            pts = sphere_zeros(value, 2, r, n_angles=4096, n_circles=1, seed=seed)
            for c in cons:
                pts = pts[c(pts) >= 0] if len(pts) else pts
            if not len(pts):
                continue
            G = np.stack([d(pts) for d in grads], axis=-1)
            N = unit(G)
            N = N * np.sign(N @ N0)[:, None]
            dev = np.max(np.linalg.norm(N - N0, axis=1))
            seen += 1
            if dev > 1e-13:
                logs_r.append(math.log(r))
                logs_d.append(math.log(dev))
    if seen >= 3 and not logs_r:
        # the normal is constant near p
        return math.inf
    if len(logs_r) < 3:
        raise AnalysisError("too few curve samples near the point for a Hoelder fit")
    slope, _ = np.polyfit(logs_r, logs_d, 1)
    return float(slope)


def sign_change_near(V: Variety, p, radius: float = 1e-3, samples: int = 4096, seed: int = 42) -> bool:
    """Whether some patch equation takes both signs on a small sphere about ``p``."""
    p_exact = as_point(p, V.ndim)
    from ._sampling import fibonacci_sphere

    if V.ndim == 2:
        t = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        dirs = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        dirs = fibonacci_sphere(samples, V.ndim, seed)
    for patch in V.patches_through(p_exact):
        vals = translate(patch.equation, p_exact).lambdify()(radius * dirs)
        scale = np.max(np.abs(vals))
        if scale > 0 and (vals > 1e-12 * scale).any() and (vals < -1e-12 * scale).any():
            return True
    return False


def symmetry_check(V: Variety, p, cone, tolerance: float = 1e-2, seed: int = 42) -> dict:
    """Symmetry of a sampled cone, reported only when its hypotheses hold."""
    candidate = is_hypersurface_candidate(cone, tolerance)
    changes = sign_change_near(V, p, seed=seed) if candidate else False
    out = {"hypersurface_candidate": bool(candidate), "sign_change": bool(changes), "applies": bool(candidate and changes)}
    out["symmetric"] = bool(is_symmetric(cone, tolerance)) if candidate and changes else None
    return out


def _radical(q: Polynomial) -> Polynomial:
    fl = square_free_factor(q)
    out = Polynomial.constant(1, q.variables)
    for fac, _ in fl.factors:
        out = out * fac
    return out


def normal_discontinuity_witness(f: Polynomial, p, normal, deltas=DEFAULT_DELTAS, theta0: float = THETA0,
                                 seed: int = 42):
    """Pairs of surface points closer than ``delta`` whose normals differ by more than ``theta0``.

    For each ``delta`` one point is a polar point (normal perpendicular to
    the flat normal ``normal``), found by Gauss-Newton on ``f``, the radical
    of the normal derivative and a sphere of radius ``0.4 delta``; the other
    is the point of that sphere on the surface whose normal is closest to
    ``normal``. Returns the list of pairs, or None when some ``delta`` has
    no such pair.
    """
    p_exact = as_point(p, f.nvars)
    g = translate(f, p_exact)
    n = g.nvars
    N0 = [Fraction(c) for c in normal]
    polar = Polynomial.constant(0, g.variables)
    for c, d in zip(N0, g.gradient()):
        polar = polar + d.scale(c)
    if polar.is_zero() or polar.degree == 0:
        return None
    polar = _radical(polar)
    N0f = unit(np.array([float(c) for c in N0]))
    grads = [d.lambdify() for d in g.gradient()]
    value = g.lambdify()

    def normals(x):
        return unit(np.stack([d(x) for d in grads], axis=-1))

    out = []
    xs = [Polynomial.variable(v, g.variables) for v in g.variables]
    for delta in sorted(deltas, reverse=True):
        rho = 0.4 * delta
        sphere = sum((x ** 2 for x in xs), Polynomial.constant(-Fraction(rho) ** 2, g.variables))
        seeds = sphere_zeros(polar.lambdify(), n, rho, n_angles=720, n_circles=1 if n == 2 else 60, seed=seed)
        if not len(seeds):
            return None
        x = gauss_newton([g, polar, sphere], seeds, iters=60)
        x = x[np.all(np.isfinite(x), axis=1)]
        if not len(x):
            return None
        G = np.stack([d(x) for d in grads], axis=-1)
        gn = np.linalg.norm(G, axis=1)
        ok = (gn > 0) & (np.abs(value(x)) <= 1e-9 * rho * gn) & (np.abs(np.linalg.norm(x, axis=1) - rho) <= 1e-9 * rho)
        x = x[ok]
        if not len(x):
            return None
        ang1 = np.arccos(np.clip(np.abs(normals(x) @ N0f), 0, 1))
        q1 = x[np.argmax(ang1)]
        zs = sphere_zeros(value, n, rho, n_angles=720, n_circles=1 if n == 2 else 60, seed=seed, touching=False)
        if not len(zs):
            return None
        Nz = normals(zs)
        finite = np.all(np.isfinite(Nz), axis=1)
        zs, Nz = zs[finite], Nz[finite]
        q2 = zs[np.argmax(np.abs(Nz @ N0f))]
        n1, n2 = normals(q1[None])[0], normals(q2[None])[0]
        angle = float(np.arccos(np.clip(abs(n1 @ n2), 0, 1)))
        dist = float(np.linalg.norm(q1 - q2))
        if not (dist < delta and angle > theta0):
            return None
        base = np.array([float(v) for v in p_exact])
        out.append({"delta": delta, "q1": _vec(q1 + base, 12), "q2": _vec(q2 + base, 12),
                    "distance": _r(dist, 12), "angle": _r(angle)})
    return out


def _nonflat_certificate(locus, n: int, seed: int):
    """``n`` sign-change directions spanning the ambient space, with their determinant."""
    dirs = sign_change_directions(locus, seed=seed, n_circles=60 if n == 3 else 1, n_angles=720)
    if len(dirs) < n:
        return None
    dirs = dirs[lexsort_rows(dirs)]
    dirs = dirs[greedy_merge(dirs, 0.05)]
    best, pick = 0.0, None
    if n == 2:
        for i in range(len(dirs)):
            for j in range(i + 1, len(dirs)):
                d = abs(np.linalg.det(dirs[[i, j]]))
                if d > best:
                    best, pick = d, (i, j)
    else:
        a = 0
        b = int(np.argmax(np.linalg.norm(np.cross(dirs[a], dirs), axis=1)))
        c = int(np.argmax(np.abs(dirs @ np.cross(dirs[a], dirs[b]))))
        pick = (a, b, c)
        best = abs(np.linalg.det(dirs[list(pick)]))
    if pick is None or best < 1e-3:
        return None
    return {"directions": [_vec(dirs[i]) for i in pick], "determinant": _r(best)}


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------
def _support_ladder(f: Polynomial, p_exact, opts: Options, constraints=()):
    base = np.array([float(v) for v in p_exact])
    r_max = max(opts.regions)
    rows = []
    for hw in sorted(opts.regions, reverse=True):
        spacing = hw / opts.points_per_side
        box = [(c - hw, c + hw) for c in base]
        S = sample_surface(f, box, spacing, seed=opts.seed, constraints=constraints)
        rep = positive_support(S, r_max=r_max)
        rows.append({"half_width": hw, "spacing": spacing, "samples": len(S.points),
                     "uniform_r": _r(rep.uniform_r, 12), "double_uniform_r": _r(rep.double_uniform_r, 12)})
    small, large = rows[-1], rows[0]
    diameter = 2 * small["half_width"] * math.sqrt(len(base))
    threshold = max(1e-3 * diameter, 2 * small["spacing"])

    def bounded(key):
        return small[key] > threshold and small[key] >= opts.support_ratio * large[key]

    return {"regions": rows, "threshold": _r(threshold, 12), "uniform_bounded": bounded("uniform_r"),
            "double_bounded": bounded("double_uniform_r")}


def _multiplicity_route(V: Variety, p_exact, cone, opts: Options, evidence: dict, caveats: list):
    m = multiplicity(V, p_exact, cone, resolution=opts.resolution, seed=opts.seed)
    evidence["multiplicity"] = _r(m.value)
    if m.value <= THREE_HALVES - opts.margin:
        caveats.append("normal continuity is checked empirically, not proved")
        return "C1_Hypersurface", "multiplicity-below-three-halves"
    caveats.append("sheet count not certified")
    return "UnionOfC1Sheets", "multiplicity-at-least-three-halves"


def _curve_verdict(f: Polynomial, p_exact, opts: Options, evidence: dict, caveats: list):
    g = translate(f, p_exact)
    try:
        germ = classify_germ(g)
    except IsolatedPointError:
        caveats.append("isolated real point: no real branch passes through it")
        return "Inconclusive", "isolated-real-point"
    evidence["branches"] = germ.to_dict()
    if germ.kind == "Cusp":
        return "Cusp", "plane-curve-cusp-dichotomy"
    if germ.kind == "MultiBranch":
        return "MultiBranch", "plane-curve-branch-count"
    normal = canonical_ray_normal(germ.rays)
    evidence["flat_normal"] = _vec(normal)
    if opts.hoelder:
        try:
            a = hoelder_probe(Variety.from_polynomial(f), p_exact, normal, seed=opts.seed)
            evidence["hoelder_exponent"] = _r(a, 6) if math.isfinite(a) else None
            if a < 0.95:
                caveats.append(f"normal field Hoelder exponent about {a:.3f}: not C^(1,alpha) for larger alpha")
        except AnalysisError as exc:
            caveats.append(f"Hoelder probe failed: {exc}")
    return "C1_Hypersurface", "plane-curve-cusp-dichotomy"


def canonical_ray_normal(rays) -> np.ndarray:
    from .cone import canonical_normal

    d = np.asarray(rays, dtype=float)[0]
    return canonical_normal([-d[1], d[0]])


def _surface_flat(f: Polynomial, V: Variety, p_exact, normal_exact, opts: Options, evidence: dict, caveats: list):
    sup = _support_ladder(f, p_exact, opts)
    evidence["support"] = sup
    if sup["uniform_bounded"]:
        if sup["double_bounded"]:
            return "C11_Hypersurface", "flat-cone-double-support"
        return "C1_Hypersurface", "flat-cone-positive-support"
    witness = normal_discontinuity_witness(f, p_exact, normal_exact, opts.deltas, opts.theta0, opts.seed)
    if witness is not None:
        evidence["witness"] = {"kind": "normal-discontinuity", "pairs": witness, "theta0": _r(opts.theta0)}
        return "NotC1", "normal-discontinuity"
    n = [float(c) for c in normal_exact]
    return _multiplicity_route(V, p_exact, FlatCone(tuple(unit(np.array(n)))), opts, evidence, caveats)


def _sampled_route(V: Variety, p_exact, opts: Options, evidence: dict, caveats: list):
    cone = sampled_cone(V, p_exact, tolerance=opts.tolerance, seed=opts.seed)
    evidence["sampled_cone"] = {"directions": len(cone.directions)}
    sym = symmetry_check(V, p_exact, cone, opts.tolerance, opts.seed)
    evidence["symmetry"] = sym
    if sym["applies"] and not sym["symmetric"]:
        d = np.asarray(cone.directions)
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(d).query(-d)
        k = int(np.argmax(dist))
        evidence["witness"] = {"kind": "asymmetric-cone", "direction": _vec(d[k]), "antipode_gap": _r(dist[k])}
        return "NotC1", "asymmetric-sampled-cone"
    normal = flat_normal_of_directions(cone, opts.tolerance)
    if normal is not None:
        evidence["flat_normal"] = _vec(normal)
        descriptor = RayFan(tuple(map(tuple, cone.directions))) if V.ndim == 2 else FlatCone(tuple(normal))
        return _multiplicity_route(V, p_exact, descriptor, opts, evidence, caveats)
    missing = []
    if not sym["hypersurface_candidate"]:
        missing.append("sampled cone is not a hypersurface")
    if not sym["sign_change"]:
        missing.append("no sign change of f near the point")
    missing.append("tangent cone is not flat")
    caveats.extend(missing)
    return "Inconclusive", "missing-hypotheses"


def classify_point(V, p, options: Options | None = None) -> Verdict:
    """Regularity verdict for the variety ``V`` at the point ``p``.

    Parameters
    ----------
    V : Variety, Polynomial or str
        A zero set, possibly cut by constraints or made of several patches.
    p : point
        Exact rational coordinates (strings like ``"0,0"`` are accepted).
    options : Options, optional

    Returns
    -------
    Verdict
    """
    opts = options or Options()
    V = _as_variety(V)
    p_exact = as_point(p, V.ndim)
    if not V.contains(p_exact):
        raise PointNotOnVariety("point is not on the variety")
    n = V.ndim
    evidence: dict = {}
    caveats: list = []
    through = V.patches_through(p_exact)
    interior = len(through) == 1 and all(c(p_exact) > 0 for c in through[0].constraints)
    if interior:
        f = through[0].equation
        grad = [d(p_exact) for d in f.gradient()]
        if any(grad):
            evidence["gradient"] = [str(c) for c in grad]
            return Verdict(p_exact, "RegularPoint", "nonzero-gradient", evidence)
        h = leading_form(translate(f, p_exact))
        evidence["leading_form"] = to_text(h.base)
        evidence["degree"] = h.degree
        if n == 2:
            kind, rule = _curve_verdict(f, p_exact, opts, evidence, caveats)
            if kind in ("C1_Hypersurface", "Cusp"):
                cone = sampled_cone(V, p_exact, tolerance=opts.tolerance, seed=opts.seed)
                evidence["symmetry"] = symmetry_check(V, p_exact, cone, opts.tolerance, opts.seed)
            return Verdict(p_exact, kind, rule, evidence, caveats)
        locus = sign_change_locus(h, seed=opts.seed)
        normal = is_flat(h, locus, seed=opts.seed)
        if normal is not None:
            evidence["flat_normal"] = _vec(normal)
            odd = locus.realizable_odd_factors()
            exact_normal = odd[0].linear_coefficients() if locus.exact else [Fraction(float(c)) for c in normal]
            kind, rule = _surface_flat(f, V, p_exact, exact_normal, opts, evidence, caveats)
            return Verdict(p_exact, kind, rule, evidence, caveats)
        cert = _nonflat_certificate(locus, n, opts.seed) if locus.realizable_odd_factors() else None
        if cert is not None:
            evidence["witness"] = {"kind": "nonflat-cone", **cert}
            return Verdict(p_exact, "NotC1", "nonflat-tangent-cone", evidence, caveats)
    kind, rule = _sampled_route(V, p_exact, opts, evidence, caveats)
    return Verdict(p_exact, kind, rule, evidence, caveats)


def classify_curve(f: Polynomial, region, grid: int = 64, options: Options | None = None) -> list:
    """Singular points of a plane curve inside a box, each with its verdict.

    Candidates come from grid nodes with small ``|f| + |grad f|``, refined by
    Gauss-Newton on ``(f, f_x, f_y)``. Points that round to rationals
    satisfying the system exactly are classified; others are reported
    Inconclusive.
    """
    if f.nvars != 2:
        raise ValueError("classify_curve expects a polynomial in two variables")
    box = np.asarray(region, dtype=float)
    if box.shape == (2,):
        box = np.array([box, box])
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    system = [f, *f.gradient()]
    score = np.sum(np.abs(np.stack([r.lambdify()(pts) for r in system], axis=-1)), axis=1)
    seeds = pts[score <= np.quantile(score, 0.02)]
    x = gauss_newton(system, seeds)
    resid = np.max(np.abs(np.stack([r.lambdify()(x) for r in system], axis=-1)), axis=1)
    ok = np.all(np.isfinite(x), axis=1) & (resid <= 1e-10) & np.all((x >= box[:, 0]) & (x <= box[:, 1]), axis=1)
    x = x[ok]
    if not len(x):
        return []
    x = x[lexsort_rows(x)]
    x = x[greedy_merge(x, 1e-6)]
    out = []
    for q in x:
        exact = None
        for den in (1, 10, 100, 1000, 10 ** 6):
            cand = [Fraction(float(v)).limit_denominator(den) for v in q]
            if all(r(cand) == 0 for r in system):
                exact = cand
                break
        if exact is None:
            out.append((list(q), Verdict([Fraction(float(v)) for v in q], "Inconclusive", "irrational-singular-point",
                                         caveats=["singular point has no exact rational coordinates"])))
        else:
            out.append((exact, classify_point(f, exact, options)))
    return out
