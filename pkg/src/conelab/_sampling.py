"""Numeric kernels shared by the sampling modules: zero finding on spheres,
Newton projection, direction clustering."""
from __future__ import annotations

import os

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation


def workers() -> int:
    """Thread cap for parallel kernels, from ``CONELAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("CONELAB_THREADS", "1")))
    except ValueError:
        return 1


def random_rotation(dim: int, seed: int) -> np.ndarray:
    if dim == 2:
        t = np.random.default_rng(seed).uniform(0, 2 * np.pi)
        return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    return Rotation.random(random_state=seed).as_matrix()


def fibonacci_sphere(n: int, dim: int = 3, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit vectors; a seeded rotation keeps runs reproducible."""
    if dim == 2:
        t = np.random.default_rng(seed).uniform(0, 2 * np.pi) + np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    pts = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    return pts @ random_rotation(3, seed).T


def _circle_frames(dim: int, n_circles: int, seed: int):
    """Orthonormal pairs (a, b) spanning the great circles that are searched."""
    R = random_rotation(dim, seed)
    if dim == 2:
        return R[:, 0][None, :], R[:, 1][None, :]
    per_family = max(1, n_circles // 3)
    A, B = [], []
    phis = np.linspace(0, np.pi, per_family, endpoint=False)
    for k in range(3):
        a = R[:, k]
        b0, c0 = R[:, (k + 1) % 3], R[:, (k + 2) % 3]
        for phi in phis:
            A.append(a)
            B.append(np.cos(phi) * b0 + np.sin(phi) * c0)
    return np.array(A), np.array(B)


def sphere_zeros(func, dim: int, radius: float, n_angles: int = 4096, n_circles: int = 1800,
                 seed: int = 0, touching: bool = True, bisect_iters: int = 60,
                 return_ids: bool = False):
    """Zeros of ``func`` on the sphere of ``radius`` about the origin.

    Sign changes along great circles are refined by bisection in the angle,
    so every returned point has norm ``radius`` exactly (up to rounding).
    With ``touching`` set, local minima of ``|func|`` that reach zero to
    within rounding are also returned, covering zero sets where the function
    does not change sign. With ``return_ids`` the index of the great circle
    each zero was found on is returned as well.
    """
    A, B = _circle_frames(dim, n_circles, seed)
    t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    cos_t, sin_t = np.cos(t), np.sin(t)
    found, ids = [], []
    chunk = max(1, 2_000_000 // n_angles)
    for start in range(0, len(A), chunk):
        a, b = A[start:start + chunk], B[start:start + chunk]

        def at(angles, rows):
            pts = radius * (np.cos(angles)[..., None] * a[rows] + np.sin(angles)[..., None] * b[rows])
            return pts

        pts = radius * (cos_t[None, :, None] * a[:, None, :] + sin_t[None, :, None] * b[:, None, :])
        vals = func(pts)
        scale = np.max(np.abs(vals), axis=1, keepdims=True)
        scale[scale == 0] = 1.0
        s = np.sign(vals)
        s_next = np.roll(s, -1, axis=1)
        # exact zeros on grid nodes
        zr, zc = np.nonzero(s == 0)
        if len(zr):
            found.append(pts[zr, zc])
            ids.append(start + zr)
        cr, cc = np.nonzero(s * s_next < 0)
        if len(cr):
            lo = t[cc].copy()
            hi = lo + 2 * np.pi / n_angles
            s_lo = s[cr, cc]
            for _ in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                vm = func(at(mid, cr))
                same = np.sign(vm) == s_lo
                lo = np.where(same, mid, lo)
                hi = np.where(same, hi, mid)
            found.append(at(0.5 * (lo + hi), cr))
            ids.append(start + cr)
        if touching:
            av = np.abs(vals)
            prev, nxt = np.roll(av, 1, axis=1), np.roll(av, -1, axis=1)
            s_prev = np.roll(s, 1, axis=1)
            mask = (av < prev) & (av <= nxt) & (s == s_prev) & (s == s_next) & (av < 1e-3 * scale)
            mr, mc = np.nonzero(mask)
            if len(mr):
                step = 2 * np.pi / n_angles
                lo, hi = t[mc] - step, t[mc] + step
                gr = (np.sqrt(5) - 1) / 2
                for _ in range(80):
                    m1 = hi - gr * (hi - lo)
                    m2 = lo + gr * (hi - lo)
                    f1 = np.abs(func(at(m1, mr)))
                    f2 = np.abs(func(at(m2, mr)))
                    left = f1 < f2
                    hi = np.where(left, m2, hi)
                    lo = np.where(left, lo, m1)
                tm = 0.5 * (lo + hi)
                vmin = np.abs(func(at(tm, mr)))
                ok = vmin <= 1e-12 * scale[mr, 0]
                if ok.any():
                    found.append(at(tm[ok], mr[ok]))
                    ids.append(start + mr[ok])
    if not found:
        pts, cid = np.zeros((0, dim)), np.zeros(0, dtype=int)
    else:
        pts, cid = np.concatenate(found, axis=0), np.concatenate(ids)
    return (pts, cid) if return_ids else pts


def newton_project(value, grad, pts: np.ndarray, max_step: float, iters: int = 40):
    """Damped Newton projection ``x <- x - f grad / |grad|^2`` with step cap.

    Returns the projected points and their final step lengths.
    """
    x = np.array(pts, dtype=float, copy=True)
    step_len = np.full(len(x), np.inf)
    active = np.ones(len(x), dtype=bool)
    for _ in range(iters):
        if not active.any():
            break
        xa = x[active]
        v = value(xa)
        g = grad(xa)
        g2 = np.einsum("ij,ij->i", g, g)
        safe = g2 > 0
        step = np.zeros_like(xa)
        step[safe] = (v[safe] / g2[safe])[:, None] * g[safe]
        norm = np.linalg.norm(step, axis=1)
        too_big = norm > max_step
        step[too_big] *= (max_step / norm[too_big])[:, None]
        x[active] = xa - step
        idx = np.nonzero(active)[0]
        step_len[idx] = np.minimum(norm, max_step)
        active[idx[norm < 1e-15 * (1 + np.linalg.norm(xa, axis=1))]] = False
        active[idx[~safe]] = False
    return x, step_len


def gauss_newton(residuals, x0: np.ndarray, iters: int = 100) -> np.ndarray:
    """Gauss-Newton iterations for the polynomial system ``residuals = 0`` from rows of ``x0``.

    ``residuals`` is a list of Polynomials in the coordinates of ``x0``;
    each step uses the pseudo-inverse of the row-equilibrated Jacobian, so
    over-determined systems converge to weighted least-squares critical
    points.
    """
    if not len(x0):
        return np.array(x0, dtype=float)
    rows = [r.lambdify() for r in residuals]
    jac = [[g.lambdify() for g in r.gradient()] for r in residuals]
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(iters):
        F = np.stack([r(x) for r in rows], axis=-1)
        J = np.stack([np.stack([c(x) for c in row], axis=-1) for row in jac], axis=1)
        # equilibrate rows so equations of very different scales all count
        w = np.linalg.norm(J, axis=2)
        w = np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), 1.0)
        x = x - np.einsum("ijk,ik->ij", np.linalg.pinv(J * w[:, :, None]), F * w)
    return x


def greedy_merge(points: np.ndarray, radius: float, order=None) -> np.ndarray:
    """Indices of a greedy ``radius``-net, visiting points in ``order``."""
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    if order is None:
        order = np.arange(len(points))
    tree = cKDTree(points)
    taken = np.zeros(len(points), dtype=bool)
    keep = []
    for i in order:
        if taken[i]:
            continue
        keep.append(i)
        taken[tree.query_ball_point(points[i], radius)] = True
    return np.array(keep, dtype=int)


def lexsort_rows(a: np.ndarray) -> np.ndarray:
    """Row order sorted lexicographically on rounded coordinates (determinism)."""
    r = np.round(a, 12)
    return np.lexsort(r.T[::-1])


def unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    n[n == 0] = 1.0
    return v / n
