import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conelab.estimators import (
    LowerDensityEstimator,
    SingularityClassifier,
    SupportRadiusEstimator,
    check_region,
)
from conelab.variety import Variety


def test_classifier_params_roundtrip():
    est = SingularityClassifier(margin=0.2)
    assert est.get_params()["margin"] == 0.2
    assert clone(est).set_params(seed=7).get_params()["seed"] == 7


def test_classifier_not_fitted():
    with pytest.raises(NotFittedError):
        SingularityClassifier().predict([("y^2 - x^3", "0,0")])


def test_classifier_bad_margin():
    with pytest.raises(ValueError):
        SingularityClassifier(margin=0.7).fit()


def test_classifier_predict():
    est = SingularityClassifier().fit()
    pred = est.predict([("y^2 - x^3", "0,0"), ("y^3 - x^4", (0, 0))])
    assert pred.tolist() == ["Cusp", "C1_Hypersurface"]


def test_density_estimator():
    est = LowerDensityEstimator().fit("y^2 - x^3", (0, 0))
    assert est.liminf_ == pytest.approx(1.0, rel=5e-2)
    table = est.transform()
    assert table.shape == (len(est.radii_), 2)
    assert np.all(np.diff(table[:, 0]) < 0)


def test_density_estimator_not_fitted():
    with pytest.raises(NotFittedError):
        LowerDensityEstimator().transform()


def test_support_estimator_circle():
    est = SupportRadiusEstimator(spacing=0.01, r_max=4.0).fit("x^2 + y^2 - 1", [(-1.5, 1.5), (-1.5, 1.5)])
    assert est.double_uniform_r_ == pytest.approx(1.0, rel=2e-2)
    R = est.transform([[1, 0], [0, -1]])
    assert R.shape == (2, 2)
    # one side is the unit disc, the other reaches r_max
    assert np.allclose(np.sort(R, axis=1), [[1, 4], [1, 4]], rtol=2e-2)


def test_support_estimator_accepts_variety():
    est = SupportRadiusEstimator(spacing=0.02).fit(Variety.from_text("y - x^2"), (-1, 1))
    assert est.uniform_r_ > 0


def test_support_estimator_validation():
    with pytest.raises(ValueError):
        SupportRadiusEstimator(spacing=0).fit("y", [(-1, 1), (-1, 1)])
    with pytest.raises(TypeError):
        SupportRadiusEstimator().fit(3.5, [(-1, 1), (-1, 1)])
    with pytest.raises(ValueError):
        check_region([(1, 0), (0, 1)], 2)
