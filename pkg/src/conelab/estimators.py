"""Estimator-style wrappers (``fit`` / ``predict`` / ``transform``) over the analysis functions.

Hyperparameters go to the constructor, data to ``fit``; fitted state ends
in an underscore. ``get_params`` / ``set_params`` come from scikit-learn's
``BaseEstimator``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .classify import Options, classify_point
from .expr import Polynomial, parse
from .measure import DEFAULT_RADII, DEFAULT_RESOLUTION, lower_density
from .support import _radii, positive_support, sample_surface
from .variety import Variety, as_point


def check_variety(V) -> Variety:
    """Coerce text, a Polynomial or a Variety to a Variety."""
    if isinstance(V, Variety):
        return V
    if isinstance(V, Polynomial):
        return Variety.from_polynomial(V)
    if isinstance(V, str):
        return Variety.from_polynomial(parse(V))
    raise TypeError(f"expected expression text, Polynomial or Variety, got {type(V).__name__}")


def check_points(X, n: int) -> np.ndarray:
    """Finite float array of shape ``(k, n)``."""
    return check_array(np.atleast_2d(np.asarray(X, dtype=float)), ensure_min_features=n, dtype=float)


def check_region(region, n: int) -> np.ndarray:
    box = np.asarray(region, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (n, 1))
    if box.shape != (n, 2) or not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
        raise ValueError(f"region must be {n} finite intervals (lo, hi) with lo < hi")
    return box


class SingularityClassifier(BaseEstimator):
    """Predicts a verdict class for each ``(variety, point)`` pair."""

    def __init__(self, seed: int = 42, margin: float = 0.1, tolerance: float = 1e-2, resolution: float = 1e-3):
        self.seed = seed
        self.margin = margin
        self.tolerance = tolerance
        self.resolution = resolution

    def fit(self, X=None, y=None):
        if not 0 <= self.margin < 0.5:
            raise ValueError("margin must lie in [0, 0.5)")
        self.options_ = Options(seed=self.seed, margin=self.margin, tolerance=self.tolerance,
                                resolution=self.resolution)
        return self

    def predict_verdicts(self, X) -> list:
        check_is_fitted(self, "options_")
        return [classify_point(check_variety(V), p, self.options_) for V, p in X]

    def predict(self, X) -> np.ndarray:
        return np.array([v.kind for v in self.predict_verdicts(X)], dtype=object)


class LowerDensityEstimator(BaseEstimator):
    """Density ratios of a variety at a point; ``liminf_`` is the estimate."""

    def __init__(self, radius_ladder=DEFAULT_RADII, resolution: float = DEFAULT_RESOLUTION, seed: int = 42):
        self.radius_ladder = radius_ladder
        self.resolution = resolution
        self.seed = seed

    def fit(self, V, p):
        V = check_variety(V)
        est = lower_density(V, as_point(p, V.ndim), self.radius_ladder, self.resolution, self.seed)
        self.radii_ = np.asarray(est.radii)
        self.ratios_ = np.asarray(est.ratios)
        self.liminf_ = est.liminf_estimate
        self.estimate_ = est
        return self

    def transform(self, X=None) -> np.ndarray:
        """The ratio table as rows ``(r, ratio)``."""
        check_is_fitted(self, "ratios_")
        return np.column_stack([self.radii_, self.ratios_])


class SupportRadiusEstimator(TransformerMixin, BaseEstimator):
    """Support radii of a sampled hypersurface; ``transform`` gives per-point radii on both sides."""

    def __init__(self, spacing: float = 0.01, r_max: float | None = None, seed: int = 42):
        self.spacing = spacing
        self.r_max = r_max
        self.seed = seed

    def fit(self, f, region):
        f = check_variety(f).polynomial
        box = check_region(region, f.nvars)
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        self.surface_ = sample_surface(f, box, self.spacing, seed=self.seed)
        rep = positive_support(self.surface_, r_max=self.r_max)
        self.uniform_r_ = rep.uniform_r
        self.double_uniform_r_ = rep.double_uniform_r
        self.report_ = rep
        return self

    def transform(self, X) -> np.ndarray:
        """Radii ``(r_plus, r_minus)`` at the samples nearest to each row of ``X``."""
        check_is_fitted(self, "surface_")
        S = self.surface_
        X = check_points(X, S.points.shape[1])
        from scipy.spatial import cKDTree

        _, idx = cKDTree(S.points).query(X)
        pts = S.all_points()
        normals = np.concatenate([S.normals, np.zeros((len(pts) - len(S.points), pts.shape[1]))])
        r_max = S.diameter if self.r_max is None else self.r_max
        return np.column_stack([_radii(pts, normals, idx, side, r_max, S.spacing) for side in (1, -1)])
