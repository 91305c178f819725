"""scikit-learn style front end for batches of loop designs.

Each sample is one loop design, a row ``(tau1, tau2, kvco)``.
"""

from __future__ import annotations

import math

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import SolverError
from .lockin import conservative_lock_in
from .model import LoopParameters, hold_in_frequency
from .oracle import DEFAULT_EPSILON, DEFAULT_TOL, numeric_conservative_lock_in
from .stability import pull_in_lower_bound

FEATURES = ("tau1", "tau2", "kvco")
OUTPUTS = ("hold_in", "pull_in_lower_bound", "omega_lc")


def _lock_in_row(row, method, tol, epsilon, on_error):
    params = LoopParameters(*map(float, row))
    try:
        if method == "exact":
            return conservative_lock_in(params).omega_lc
        return numeric_conservative_lock_in(params, tol=tol, epsilon=epsilon)
    except SolverError:
        if on_error == "nan":
            return math.nan
        raise


class ConservativeLockInEstimator(TransformerMixin, BaseEstimator):
    """Map loop designs to their frequency ranges.

    The estimator is stateless; ``fit`` only validates the input shape.

    Parameters
    ----------
    method : {"exact", "oracle"}, default="exact"
        ``"exact"`` solves the closed-form lock-in system, ``"oracle"``
        bisects on traced separatrices.
    tol : float, default=1e-9
        Integration and bisection tolerance of the oracle.
    epsilon : float, default=1e-7
        Separatrix seed offset of the oracle.
    on_error : {"raise", "nan"}, default="raise"
        What to do for designs where no lock-in boundary is bracketed.
    n_jobs : int or None, default=None
        Rows are solved in parallel with joblib; output order is input order.
    """

    def __init__(self, method="exact", tol=DEFAULT_TOL, epsilon=DEFAULT_EPSILON, on_error="raise", n_jobs=None):
        self.method = method
        self.tol = tol
        self.epsilon = epsilon
        self.on_error = on_error
        self.n_jobs = n_jobs

    def _validate(self, X, reset):
        if self.method not in ("exact", "oracle"):
            raise ValueError(f"method must be 'exact' or 'oracle', got {self.method!r}")
        if self.on_error not in ("raise", "nan"):
            raise ValueError(f"on_error must be 'raise' or 'nan', got {self.on_error!r}")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != len(FEATURES):
            raise ValueError(f"expected {len(FEATURES)} columns {FEATURES}, got {X.shape[1]}")
        if reset:
            self.n_features_in_ = X.shape[1]
        return X

    def fit(self, X, y=None):
        self._validate(X, reset=True)
        return self

    def predict(self, X):
        """Conservative lock-in frequency of every design."""
        check_is_fitted(self, "n_features_in_")
        X = self._validate(X, reset=False)
        values = Parallel(n_jobs=self.n_jobs)(
            delayed(_lock_in_row)(row, self.method, self.tol, self.epsilon, self.on_error) for row in X
        )
        return np.asarray(values, dtype=float)

    def transform(self, X):
        """Columns ``hold_in, pull_in_lower_bound, omega_lc`` for every design."""
        lock = self.predict(X)
        X = check_array(X, dtype=np.float64)
        rows = []
        for row, w in zip(X, lock):
            params = LoopParameters(*row)
            rows.append((hold_in_frequency(params), pull_in_lower_bound(params).pull_in_lower_bound, w))
        return np.asarray(rows, dtype=float)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(OUTPUTS, dtype=object)
