"""Projective transforms and closures, recession and normal cones, entire-graph tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from ._sampling import fibonacci_sphere, gauss_newton, greedy_merge, lexsort_rows, sphere_zeros, unit
from .errors import AnalysisError
from .expr import Polynomial, leading_form, to_text, translate
from .support import SampledHypersurface, convexity_probe

INFINITY_VAR = "w"
LINE_SHOTS = 64
DEFAULT_T_LADDER = (1.0, 10.0, 100.0, 1000.0)


# ---------------------------------------------------------------------------
# the hemisphere transform
# ---------------------------------------------------------------------------
def p_transform(f: Polynomial, d: int) -> Polynomial:
    """``x_n^d f(x_1/x_n, ..., x_{n-1}/x_n, 1/x_n)``.

    Termwise the exponent of the last variable becomes ``d - |a|``, so the
    transform is an exact involution for a fixed ``d >= deg f``.
    """
    if f.nvars < 2:
        raise ValueError("p_transform needs at least two variables")
    if d < f.degree:
        raise ValueError(f"degree {d} is below deg f = {f.degree}")
    return Polynomial(f.variables, {e[:-1] + (d - sum(e),): c for e, c in f.terms.items()})


def homogenize(f: Polynomial, var: str = INFINITY_VAR) -> Polynomial:
    """Homogenize with a new last variable ``var``."""
    if var in f.variables:
        raise ValueError(f"variable {var!r} already in use")
    d = f.degree
    return Polynomial(f.variables + (var,), {e + (d - sum(e),): c for e, c in f.terms.items()})


def dehomogenize(F: Polynomial, index: int) -> Polynomial:
    """Set variable ``index`` to 1 and drop it."""
    names = F.variables[:index] + F.variables[index + 1:]
    out: dict = {}
    for e, c in F.terms.items():
        key = e[:index] + e[index + 1:]
        out[key] = out.get(key, 0) + c
    return Polynomial(names, out)


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------
def _quadratic_matrix(q: Polynomial) -> sympy.Matrix:
    n = q.nvars
    M = sympy.zeros(n, n)
    for e, c in q.terms.items():
        idx = [i for i, k in enumerate(e) for _ in range(k)]
        if len(idx) != 2:
            raise ValueError("not a quadratic form")
        i, j = idx
        val = sympy.Rational(c.numerator, c.denominator)
        if i == j:
            M[i, i] += val
        else:
            M[i, j] += val / 2
            M[j, i] += val / 2
    return M


def _rational_sqrt(x: sympy.Rational):
    r = sympy.sqrt(abs(x))
    return r if r.is_Rational else None


def quadratic_normal_form(q: Polynomial):
    """Exact diagonalization ``q(x) = sum d_i (L x)_i^2`` over the rationals.

    Returns ``(d, L)`` with ``d`` a list of Fractions and ``L`` a list of
    rows of Fractions (upper unitriangular after a variable permutation).
    """
    M = _quadratic_matrix(q)
    n = M.shape[0]
    A = M.copy()
    d = []
    rows = []
    basis = sympy.eye(n)
    # symmetric Gaussian elimination; a zero pivot is fixed by adding a later row
    for k in range(n):
        if A[k, k] == 0:
            for j in range(k + 1, n):
                if A[k, j] != 0:
                    A[:, k] += A[:, j]
                    A[k, :] += A[j, :]
                    basis[:, k] += basis[:, j]
                    break
        piv = A[k, k]
        d.append(piv)
        if piv == 0:
            continue
        for j in range(k + 1, n):
            m = A[k, j] / piv
            A[:, j] -= m * A[:, k]
            A[j, :] -= m * A[k, :]
            basis[:, j] -= m * basis[:, k]
    # q(basis y) = sum d_k y_k^2, so y = basis^{-1} x
    L = basis.inv()
    d_frac = [Fraction(int(sympy.Rational(x).p), int(sympy.Rational(x).q)) for x in d]
    L_frac = [[Fraction(int(L[i, j].p), int(L[i, j].q)) for j in range(n)] for i in range(n)]
    return d_frac, L_frac


def signature(q: Polynomial) -> tuple[int, int, int]:
    """``(positive, negative, zero)`` counts of a quadratic form."""
    d, _ = quadratic_normal_form(q)
    return sum(x > 0 for x in d), sum(x < 0 for x in d), sum(x == 0 for x in d)


def exact_equivalence(q: Polynomial, target: Polynomial):
    """An exact rational linear map ``T`` with ``q(T y) = s * target(y)``, ``s = +-1``, or None.

    Both forms are diagonalized; the map exists over the rationals when the
    diagonal entries of ``q`` are +-(rational squares) and the signatures
    agree up to an overall sign. The result is checked by substitution.
    """
    if q.nvars != target.nvars:
        return None
    dq, Lq = quadratic_normal_form(q)
    dt, Lt = quadratic_normal_form(target)
    n = q.nvars
    roots = [_rational_sqrt(sympy.Rational(x.numerator, x.denominator)) for x in dq + dt]
    if any(r is None for r in roots) or any(x == 0 for x in dq + dt):
        return None
    for s in (1, -1):
        pos_q = [i for i in range(n) if dq[i] > 0]
        neg_q = [i for i in range(n) if dq[i] < 0]
        pos_t = [i for i in range(n) if s * dt[i] > 0]
        neg_t = [i for i in range(n) if s * dt[i] < 0]
        if len(pos_q) != len(pos_t):
            continue
        # y_q[i] = sqrt|dq_i| (Lq x)_i must equal sqrt|dt_j| (Lt y)_j for matched i, j
        perm = dict(zip(pos_q + neg_q, pos_t + neg_t))
        Lq_m = sympy.Matrix(n, n, lambda i, j: sympy.Rational(Lq[i][j].numerator, Lq[i][j].denominator))
        Lt_m = sympy.Matrix(n, n, lambda i, j: sympy.Rational(Lt[i][j].numerator, Lt[i][j].denominator))
        Dq = sympy.diag(*[roots[i] for i in range(n)])
        Dt = sympy.diag(*[roots[n + j] for j in range(n)])
        P = sympy.zeros(n, n)
        for i, j in perm.items():
            P[i, j] = 1
        # Dq Lq x = P Dt Lt y  =>  x = (Dq Lq)^{-1} P Dt Lt y
        T = (Dq * Lq_m).inv() * P * Dt * Lt_m
        T_rows = [[Fraction(int(T[i, j].p), int(T[i, j].q)) for j in range(n)] for i in range(n)]
        subs = [Polynomial.linear(row, target.variables) for row in T_rows]
        if q.compose(subs) == target.scale(s):
            return T_rows, s
    return None


# ---------------------------------------------------------------------------
# closure at infinity
# ---------------------------------------------------------------------------
@dataclass
class InfinityPoint:
    """A real point ``[u : 0]`` of the closure; ``chart`` is the coordinate set to 1."""

    point: list
    chart: int
    exact: bool
    singular: bool
    cone_kind: str
    verdict: str
    germ: Polynomial | None = None

    def to_dict(self):
        return {
            "chart": self.chart,
            "point": [str(v) if isinstance(v, Fraction) else round(float(v), 12) for v in self.point],
            "exact": self.exact,
            "cone_kind": self.cone_kind,
            "verdict": self.verdict,
            "germ": None if self.germ is None else to_text(self.germ),
        }


@dataclass
class ClosureReport:
    homogeneous: Polynomial
    infinity_points: list = field(default_factory=list)
    regular_infinity_samples: int = 0

    @property
    def singular_points(self) -> list:
        return [p for p in self.infinity_points if p.singular]

    def to_dict(self):
        return {
            "homogeneous": to_text(self.homogeneous),
            "regular_infinity_samples": self.regular_infinity_samples,
            "infinity_points": [p.to_dict() for p in self.infinity_points],
        }


def _canonical_projective(u: np.ndarray) -> np.ndarray:
    u = unit(u)
    for c in u:
        if abs(c) > 1e-9:
            return u if c > 0 else -u
    return u


def _chart_germ(F: Polynomial, point: list, chart: int) -> Polynomial:
    """Local equation of ``Z(F)`` at the projective point in the affine chart ``x_chart = 1``."""
    scaled = [v / point[chart] for v in point]
    G = dehomogenize(F, chart)
    local = scaled[:chart] + scaled[chart + 1:]
    return translate(G, local)


def _classify_germ(G: Polynomial):
    h = leading_form(G).base
    if h.degree == 1:
        return "flat", "smooth"
    if h.degree == 2:
        pos, neg, zero = signature(h)
        if zero == 0 and pos and neg:
            return "quadratic", "conical singularity"
        if zero == 0:
            return "quadratic", "isolated point"
        return "quadratic", "degenerate quadratic singularity"
    return f"order {h.degree}", "singular"


def _rationalize(u: np.ndarray, F: Polynomial, singular: bool, max_denominator: int):
    """Smallest-denominator rational point ``[v : 0]`` near ``u`` that lies exactly on ``Z(F)``.

    With ``singular`` set the gradient of ``F`` must vanish there as well.
    """
    chart = int(np.argmax(np.abs(u)))
    scaled = u / u[chart]
    grads = F.gradient() if singular else []
    q = 1
    while q <= max_denominator:
        pt = [Fraction(float(v)).limit_denominator(q) for v in scaled] + [Fraction(0)]
        pt[chart] = Fraction(1)
        if F(pt) == 0 and all(g(pt) == 0 for g in grads):
            return pt, chart
        q *= 10
    return None, chart


def _infinity_point(F: Polynomial, u: np.ndarray, singular: bool, max_denominator: int) -> InfinityPoint:
    pt, chart = _rationalize(u, F, singular, max_denominator)
    if pt is None:
        scaled = list(u / u[chart]) + [0.0]
        return InfinityPoint(scaled, chart, False, singular, "unknown",
                             "singular (numeric)" if singular else "regular (numeric)")
    germ = _chart_germ(F, pt, chart)
    kind, verdict = _classify_germ(germ)
    return InfinityPoint(pt, chart, True, verdict != "smooth", kind, verdict, germ)


def projective_closure(f: Polynomial, seed: int = 42, max_denominator: int = 10 ** 6) -> ClosureReport:
    """Real points at infinity of the closure of ``Z(f)`` and the germs of the closure there.

    Directions where the top-degree form vanishes are sampled on the sphere.
    For plane curves every such point is analysed. In space only the points
    where the closure is singular (top form, its gradient and the next form
    vanish) are kept; they are refined by Gauss-Newton, rounded to the
    simplest rational point that passes an exact check, and analysed in an
    affine chart.
    """
    if f.is_zero():
        raise AnalysisError("zero polynomial")
    F = homogenize(f)
    n = f.nvars
    d = f.degree
    report = ClosureReport(F)
    if d == 0:
        return report
    top = f.homogeneous_part(d)
    below = f.homogeneous_part(d - 1)
    n_circles = 1 if n == 2 else 240
    pts = sphere_zeros(top.lambdify(), n, 1.0, n_angles=4096 if n == 2 else 1440, n_circles=n_circles, seed=seed)
    if not len(pts):
        return report
    pts = np.array([_canonical_projective(p) for p in pts])
    pts = pts[greedy_merge(pts, 1e-3, order=lexsort_rows(pts))]
    # the closure is singular at [u:0] iff grad(top)(u) = 0 and below(u) = 0
    system = [top, *top.gradient(), below]
    sphere = sum((Polynomial.variable(v, f.variables) ** 2 for v in f.variables),
                 Polynomial.constant(-1, f.variables))
    if n == 2:
        cand = pts
    else:
        score = np.linalg.norm(np.stack([r.lambdify()(pts) for r in system], axis=-1), axis=1)
        cand = pts[score <= max(1e-3, 0.1 * np.median(score))]
        cand = gauss_newton(system + [sphere], cand) if len(cand) else cand
        cand = np.array([_canonical_projective(u) for u in cand if np.all(np.isfinite(u))]).reshape(-1, n)
        resid = np.linalg.norm(np.stack([r.lambdify()(cand) for r in system], axis=-1), axis=1)
        cand = cand[resid <= 1e-6]
    found: list[InfinityPoint] = []
    seen_exact = set()
    numeric = []
    for u in cand[lexsort_rows(cand)] if len(cand) else cand:
        ip = _infinity_point(F, u, n != 2, max_denominator)
        if ip.exact:
            key = tuple(ip.point)
            if key in seen_exact:
                continue
            seen_exact.add(key)
        else:
            if any(np.linalg.norm(u - v) < 1e-2 for v in numeric):
                continue
            numeric.append(u)
        found.append(ip)
    report.infinity_points = sorted(found, key=lambda p: (not p.exact, [float(v) for v in p.point]))
    report.regular_infinity_samples = len(pts) - len(cand) if n != 2 else 0
    return report


# ---------------------------------------------------------------------------
# recession and normal cones, entire graphs
# ---------------------------------------------------------------------------
@dataclass
class DirectionCone:
    directions: np.ndarray
    kind: str  # "recession" or "normal"
    confidence: np.ndarray

    def to_dict(self):
        return {"kind": self.kind, "directions": np.round(self.directions, 10).tolist(),
                "confidence": [int(c) for c in self.confidence]}


def outward_normals(S: SampledHypersurface) -> np.ndarray:
    """Normals of a convex sample cloud oriented away from the convex side."""
    allp = S.points
    out = S.normals.copy()
    for start in range(0, len(allp), 512):
        q = allp[start:start + 512]
        dots = np.einsum("ijk,ik->ij", allp[None, :, :] - q[:, None, :], S.normals[start:start + 512])
        # the other samples lie on the inner side: flip when most dots are positive;
        # ties (flat pieces) take the side where f >= 0
        flip = np.sum(dots > 0, axis=1) >= np.sum(dots < 0, axis=1)
        out[start:start + 512][flip] *= -1
    return out


def _inside_sign(S: SampledHypersurface, normals_out: np.ndarray) -> float:
    """Sign of ``f`` on the convex side, read just inside the samples."""
    f = S.f.lambdify()
    probe = S.points - 1e-3 * S.spacing * normals_out
    vals = f(probe)
    return 1.0 if np.sum(vals > 0) >= np.sum(vals < 0) else -1.0


def normal_cone_sample(S: SampledHypersurface) -> DirectionCone:
    """Outward normals of the samples, merged at 1e-2 rad."""
    N = outward_normals(S)
    keep = greedy_merge(N, 1e-2, order=lexsort_rows(N))
    return DirectionCone(N[keep], "normal", np.ones(len(keep), dtype=int))


def _recession_directions(S: SampledHypersurface, t_ladder, n_directions: int, seed: int):
    """Directions ``u`` with ``q + t u`` on the convex side for every sample ``q`` and ``t`` in the ladder.

    The convex side is tested against every sampled supporting hyperplane
    and, when the defining polynomial is known, by the sign of ``f``.
    """
    ok, _ = convexity_probe(S)
    if not ok:
        raise AnalysisError("sample cloud is not convex")
    n = S.points.shape[1]
    N = outward_normals(S)
    # grid plus the axes and the reversed normals, where thin cones live
    U = np.vstack([fibonacci_sphere(n_directions, n, seed), np.eye(n), -np.eye(n), -N])
    U = U[greedy_merge(U, 1e-9, order=lexsort_rows(U))]
    U = U[lexsort_rows(U)]
    # max_i <q_i + t u - q_j, N_j> = c_j + t <u, N_j>
    c = np.empty(len(N))
    for start in range(0, len(N), 512):
        blk = slice(start, start + 512)
        c[blk] = np.max(S.points @ N[blk].T, axis=0) - np.einsum("ij,ij->i", S.points[blk], N[blk])
    UN = U @ N.T
    f = S.f.lambdify() if S.f is not None else None
    inside = _inside_sign(S, N) if f is not None else None
    passed = np.zeros(len(U), dtype=int)
    alive = np.ones(len(U), dtype=bool)
    for t in sorted(t_ladder):
        good = np.max(c[None, :] + t * UN, axis=1) <= S.spacing
        alive &= good
        if f is not None:
            for k in np.nonzero(alive)[0]:
                vals = f(S.points + t * U[k])
                if np.any(inside * vals < -1e-9 * (1 + np.abs(vals))):
                    alive[k] = False
        passed[alive] += 1
    return U[alive], passed[alive]


def recession_cone_sample(S: SampledHypersurface, t_ladder=DEFAULT_T_LADDER, n_directions: int = 3600,
                          seed: int = 42) -> DirectionCone:
    """Sampled recession cone of the convex side of ``S``, deduplicated at 1e-2 rad.

    A direction ``u`` is kept when every sample moved by ``t u`` stays on the
    convex side for each ``t`` of the ladder. The merge keeps directions
    nearest the mean direction first.
    """
    U, passed = _recession_directions(S, t_ladder, n_directions, seed)
    if not len(U):
        return DirectionCone(U, "recession", passed)
    centre = unit(U.mean(axis=0))
    order = np.lexsort((*np.round(U, 12).T[::-1], -np.round(U @ centre, 12)))
    keep = np.sort(greedy_merge(U, 1e-2, order=order))
    return DirectionCone(U[keep], "recession", passed[keep])


@dataclass
class EntireGraphResult:
    direction: np.ndarray | None
    lines: int
    single_hits: int
    candidates: int
    reason: str

    @property
    def is_entire_graph(self) -> bool:
        return self.direction is not None

    def to_dict(self):
        return {
            "entire_graph": self.is_entire_graph,
            "direction": None if self.direction is None else np.round(self.direction, 10).tolist(),
            "lines": self.lines,
            "single_hits": self.single_hits,
            "candidates": self.candidates,
            "reason": self.reason,
        }


def _line_hits(f: Polynomial, constraints, a: np.ndarray, u: np.ndarray) -> int:
    """Number of distinct real points where the line ``a + s u`` meets ``Z(f)`` (constraints honoured)."""
    s = sympy.Symbol("s")
    args = [sympy.Rational(Fraction(float(ai)).limit_denominator(10 ** 9).numerator,
                           Fraction(float(ai)).limit_denominator(10 ** 9).denominator)
            + sympy.Rational(Fraction(float(ui)).limit_denominator(10 ** 9).numerator,
                             Fraction(float(ui)).limit_denominator(10 ** 9).denominator) * s
            for ai, ui in zip(a, u)]

    def restrict(p: Polynomial):
        expr = 0
        for e, c in p.terms.items():
            term = sympy.Rational(c.numerator, c.denominator)
            for arg, k in zip(args, e):
                term *= arg ** k
            expr += term
        return sympy.Poly(sympy.expand(expr), s)

    g = restrict(f)
    if g.is_zero:
        return -1
    if g.degree() <= 0:
        return 0
    roots = g.real_roots()
    seen = []
    for r in roots:
        if any(r == x for x in seen):
            continue
        val = float(r.evalf(30))
        pt = a + val * u
        if all(c.lambdify()(pt[None])[0] >= -1e-12 for c in constraints):
            seen.append(r)
    return len(seen)


def _snap(u: np.ndarray, tol: float = 1e-2) -> np.ndarray:
    k = int(np.argmax(np.abs(u)))
    q = 1
    while q <= 10 ** 6:
        v = unit(np.array([float(Fraction(float(c / u[k])).limit_denominator(q)) for c in u]))
        if np.arccos(np.clip(v @ u, -1, 1)) <= tol:
            return v
        q *= 10
    return u


def entire_graph_direction(f: Polynomial, S: SampledHypersurface, constraints=(), lines: int = LINE_SHOTS,
                           seed: int = 42, region=None, t_ladder=DEFAULT_T_LADDER) -> EntireGraphResult:
    """A direction ``u`` in ``rc(K) ∩ (-nc(K))`` along which ``Z(f)`` is an entire graph.

    Candidates come from the sampled recession cone, matched within 1e-2 rad
    to a reversed outward normal. The best candidate is verified by shooting
    ``lines`` seeded lines parallel to it through the region; every line must
    meet the hypersurface exactly once.
    """
    dirs, passed = _recession_directions(S, t_ladder, 3600, seed)
    rc = DirectionCone(dirs, "recession", passed)
    if not len(rc.directions):
        return EntireGraphResult(None, 0, 0, 0, "empty recession cone")
    N = outward_normals(S)
    cos = rc.directions @ (-N).T
    best = cos.max(axis=1)
    cand = np.nonzero(best >= np.cos(1e-2))[0]
    if not len(cand):
        return EntireGraphResult(None, 0, 0, 0, "no recession direction is a reversed outward normal")
    # prefer the candidate deepest inside the recession cone, snapped to
    # the simplest rational direction within the matching tolerance
    centre = unit(rc.directions.mean(axis=0))
    u = _snap(rc.directions[cand[np.argmax(rc.directions[cand] @ centre)]])
    box = np.asarray(S.region if region is None else region, dtype=float)
    rng = np.random.default_rng(seed)
    hits_ok = 0
    for _ in range(lines):
        a = rng.uniform(box[:, 0], box[:, 1])
        a = a - (a @ u) * u
        if _line_hits(f, constraints, a, u) == 1:
            hits_ok += 1
    if hits_ok == lines:
        return EntireGraphResult(u, lines, hits_ok, len(cand), "verified")
    return EntireGraphResult(None, lines, hits_ok, len(cand), "not an entire graph: some test lines miss or cross twice")


def standard_cone(variables) -> Polynomial:
    """``y_1^2 + ... + y_{n-1}^2 - y_n^2`` over ``variables``."""
    xs = [Polynomial.variable(v, variables) for v in variables]
    out = Polynomial.constant(0, variables)
    for x in xs[:-1]:
        out = out + x ** 2
    return out - xs[-1] ** 2
