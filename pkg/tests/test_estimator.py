import numpy as np
import pytest
from sklearn.base import clone

from pll_lockin import ConservativeLockInEstimator, conservative_lock_in, LoopParameters

X = np.array([[0.0633, 0.0225, 250.0], [0.5, 0.0225, 100.0], [0.5, 2.0, 250.0]])


def test_predict_matches_solver_in_order():
    est = ConservativeLockInEstimator().fit(X)
    expected = [conservative_lock_in(LoopParameters(*row)).omega_lc for row in X]
    assert np.array_equal(est.predict(X), expected)
    assert np.array_equal(ConservativeLockInEstimator(n_jobs=2).fit(X).predict(X), expected)


def test_transform_columns():
    est = ConservativeLockInEstimator().fit(X)
    out = est.transform(X)
    assert out.shape == (3, 3)
    assert np.array_equal(out[:, 0], X[:, 2])
    assert np.all(out[:, 2] < out[:, 0])
    assert list(est.get_feature_names_out()) == ["hold_in", "pull_in_lower_bound", "omega_lc"]


def test_oracle_method_close_to_exact():
    est = ConservativeLockInEstimator(method="oracle").fit(X[:1])
    assert est.predict(X[:1])[0] == pytest.approx(73.747016722, abs=1e-4)


def test_params_and_clone():
    est = ConservativeLockInEstimator(method="oracle", tol=1e-8)
    assert clone(est).get_params()["tol"] == 1e-8


@pytest.mark.parametrize(
    "kwargs, data",
    [({}, X[:, :2]), ({"method": "magic"}, X), ({"on_error": "ignore"}, X)],
)
def test_validation_errors(kwargs, data):
    with pytest.raises(ValueError):
        ConservativeLockInEstimator(**kwargs).fit(data)


def test_on_error_nan(monkeypatch):
    import pll_lockin.estimator as mod
    from pll_lockin import NoBracket

    def fail(_p):
        raise NoBracket("none")

    monkeypatch.setattr(mod, "conservative_lock_in", fail)
    assert np.isnan(ConservativeLockInEstimator(on_error="nan").fit(X).predict(X)).all()
    with pytest.raises(NoBracket):
        ConservativeLockInEstimator().fit(X).predict(X)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ConservativeLockInEstimator().predict(X)
