"""Scikit-learn style front end for the collective spectral density fit.

Rows are samples here, so a panel of m series of length n enters as an
(m, n) array; the transformer maps each series to its K-dimensional score
vector on the shared adaptive basis.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .basis import BasisSpec, eval_basis, penalty_for
from .engine import FitConfig, fit
from .spectral import TimeSeriesSet, periodogram, truncate_band
from .validation import floor_ordinates

__all__ = ["CollectiveSpectralDensity"]


class CollectiveSpectralDensity(TransformerMixin, BaseEstimator):
    """Collective log-SDF estimator with a low-dimensional score transform.

    Parameters
    ----------
    n_components : int
        Number of shared adaptive basis functions K.
    n_basis : int
        Size L of the rich B-spline basis.
    degree : int
        Spline degree of the rich basis.
    penalty : str
        "difference" or "second_derivative".
    diff_order : int
        Difference order when ``penalty="difference"``.
    lambda_mode : str
        "fixed", "auto", or "aic_grid".
    lambda_value : float
        Fixed value or auto-mode starting value of the tuning parameter.
    lambda_grid : sequence of float, optional
        Grid for "aic_grid" mode.
    truncate : int, optional
        Keep only this many lowest frequencies of the periodogram.
    max_iter : int
        Cap on outer Newton iterations.
    tol : float
        Relative objective-change convergence threshold.

    Attributes
    ----------
    theta_ : ndarray of shape (n_basis, n_components)
        Canonicalized weights of the adaptive basis functions.
    scores_ : ndarray of shape (n_series, n_components)
        Per-series coordinates of the fitted log-SDFs.
    basis_values_ : ndarray of shape (n_freq, n_basis)
        Rich basis evaluated on the fitted frequency grid.
    frequencies_ : ndarray of shape (n_freq,)
        Fourier frequencies (cycles per sample) used in the fit.
    fit_result_ : FitResult
        Full diagnostics of the optimization.
    """

    def __init__(
        self,
        n_components=3,
        n_basis=40,
        degree=3,
        penalty="difference",
        diff_order=2,
        lambda_mode="auto",
        lambda_value=1.0,
        lambda_grid=None,
        truncate=None,
        max_iter=500,
        tol=1e-8,
    ):
        self.n_components = n_components
        self.n_basis = n_basis
        self.degree = degree
        self.penalty = penalty
        self.diff_order = diff_order
        self.lambda_mode = lambda_mode
        self.lambda_value = lambda_value
        self.lambda_grid = lambda_grid
        self.truncate = truncate
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        """Fit all log-SDFs of the series in the rows of X collectively."""
        pgram = self._periodogram(X)
        spec = BasisSpec(n_basis=self.n_basis, degree=self.degree)
        basis = eval_basis(pgram.grid, spec)
        penalty = penalty_for(spec, self.penalty, self.diff_order)
        config = FitConfig(
            n_components=self.n_components,
            lambda_mode=self.lambda_mode,
            lambda_value=self.lambda_value,
            lambda_grid=tuple(self.lambda_grid) if self.lambda_grid else None,
            penalty_kind=self.penalty,
            penalty_order=self.diff_order,
            max_outer_iters=self.max_iter,
            tol=self.tol,
        )
        result = fit(pgram, basis, penalty, config)
        self.fit_result_ = result
        self.theta_ = result.coefficients.theta
        self.scores_ = result.coefficients.scores
        self.basis_values_ = basis.values
        self.frequencies_ = pgram.grid.omegas
        self.n_features_in_ = X.shape[1] if hasattr(X, "shape") else len(X[0])
        return self

    def transform(self, X):
        """Score series on the learned adaptive basis.

        Each row of X is projected by minimizing its own Whittle deviance over
        the K score coordinates with the shared weights held fixed (a Newton
        solve per series), so previously unseen series can be embedded.
        """
        check_is_fitted(self, "theta_")
        pgram = self._periodogram(X)
        if len(pgram.grid) != self.frequencies_.size or not np.allclose(
            pgram.grid.omegas, self.frequencies_
        ):
            raise ValueError(
                "series length (hence frequency grid) must match the fitted grid"
            )
        G = self.basis_values_ @ self.theta_
        I = floor_ordinates(pgram.ordinates)
        out = np.zeros((I.shape[1], self.theta_.shape[1]))
        for i in range(I.shape[1]):
            out[i] = self._score_series(G, I[:, i])
        return out

    def fit_transform(self, X, y=None):
        return self.fit(X).scores_

    def log_sdf(self):
        """Fitted log-SDF matrix (n_freq x n_series)."""
        check_is_fitted(self, "theta_")
        return self.basis_values_ @ self.theta_ @ self.scores_.T

    def _periodogram(self, X):
        X = check_array(X, dtype=float, ensure_min_samples=1, ensure_min_features=8)
        ts = TimeSeriesSet(np.asarray(X, dtype=float).T)
        pgram = periodogram(ts)
        if self.truncate is not None:
            pgram = truncate_band(pgram, int(self.truncate))
        return pgram

    @staticmethod
    def _score_series(G, target, max_iters=100, tol=1e-10):
        alpha = np.zeros(G.shape[1])
        u = G @ alpha
        dev = float(u.sum() + (target * np.exp(-u)).sum())
        for _ in range(max_iters):
            w = target * np.exp(-u)
            grad = G.T @ (1.0 - w)
            hess = (G * w[:, None]).T @ G
            step = cho_solve(cho_factor(hess), grad)
            tau = 1.0
            moved = False
            for _ in range(31):
                trial = alpha - tau * step
                u_try = G @ trial
                with np.errstate(over="ignore"):
                    d_try = float(u_try.sum() + (target * np.exp(-u_try)).sum())
                if np.isfinite(d_try) and d_try < dev:
                    alpha, u = trial, u_try
                    moved = True
                    break
                tau *= 0.5
            if not moved or dev - d_try < tol * max(1.0, abs(dev)):
                dev = d_try if moved else dev
                break
            dev = d_try
        return alpha
