"""The six competing spectral density estimators.

Five non-collective references (raw periodograms, basis-smoothed
periodograms, their rank-truncated version, separate Whittle fits, and their
rank-truncated version) plus the collective fit itself, all producing a
strictly positive (n_freq x m) SDF matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .engine import Coefficients, FitConfig, FitResult, fit
from .validation import check_positive_ordinates, floor_ordinates, readonly

__all__ = [
    "EstimatorKind",
    "SdfEstimate",
    "estimate_ps",
    "estimate_sps",
    "estimate_tsvd_ps",
    "estimate_nsde",
    "estimate_tsvd_nsde",
    "estimate_ncsde",
    "smoothed_log_periodograms",
    "nsde_coefficient_matrix",
]


class EstimatorKind(str, Enum):
    PS = "Ps"
    SPS = "S.Ps"
    TSVD_PS = "tSVD.Ps"
    NSDE = "NSDE"
    TSVD_NSDE = "tSVD.NSDE"
    NCSDE = "NCSDE"


@dataclass(frozen=True)
class SdfEstimate:
    """A strictly positive SDF matrix plus how it was obtained.

    ``coefficients`` carries the (theta, scores) pair for the low-rank kinds;
    ``fit_result`` is attached for the collective estimator.
    """

    values: np.ndarray
    kind: EstimatorKind
    coefficients: Coefficients | None = None
    fit_result: FitResult | None = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise ValueError("SDF estimates must be strictly positive and finite")
        object.__setattr__(self, "values", readonly(arr))

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    def metadata(self) -> dict:
        out = {"kind": self.kind.value}
        if self.coefficients is not None:
            out["K"] = self.coefficients.n_components
            out["L"] = self.coefficients.theta.shape[0]
        return out


def _matrix(x):
    for attr in ("values", "ordinates"):
        if hasattr(x, attr):
            return np.asarray(getattr(x, attr), dtype=float)
    return np.asarray(x, dtype=float)


def _floored(pgram):
    I = floor_ordinates(_matrix(pgram))
    check_positive_ordinates(I)
    return I


def estimate_ps(pgram) -> SdfEstimate:
    """Raw periodograms (floored away from zero)."""
    return SdfEstimate(_floored(pgram), EstimatorKind.PS)


def _projection_coefficients(pgram, basis, ridge=1e-8):
    """Least-squares coefficients of log I on the rich basis (L x m)."""
    B = _matrix(basis)
    target = B.T @ np.log(_floored(pgram))
    gram = B.T @ B
    try:
        return cho_solve(cho_factor(gram), target)
    except np.linalg.LinAlgError:
        gram = gram + ridge * np.eye(B.shape[1])
        try:
            return cho_solve(cho_factor(gram), target)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"basis Gram matrix irreparably rank deficient: {exc}"
            ) from exc


def smoothed_log_periodograms(pgram, basis, ridge=1e-8) -> np.ndarray:
    """Projection of the log-periodograms onto the basis span (n_freq x m)."""
    B = _matrix(basis)
    return B @ _projection_coefficients(pgram, basis, ridge)


def estimate_sps(pgram, basis) -> SdfEstimate:
    """Basis-smoothed periodograms: exp of the log-periodogram projection."""
    return SdfEstimate(np.exp(smoothed_log_periodograms(pgram, basis)), EstimatorKind.SPS)


def _truncate(psi, n_components):
    U, s, Vt = np.linalg.svd(psi, full_matrices=False)
    theta = U[:, :n_components]
    scores = Vt[:n_components].T * s[:n_components]
    return Coefficients(theta, scores)


def estimate_tsvd_ps(pgram, basis, n_components: int) -> SdfEstimate:
    """Rank-truncated smoothed periodograms via SVD of the projection."""
    B = _matrix(basis)
    psi = _projection_coefficients(pgram, basis)
    _check_rank(n_components, B.shape[1], psi.shape[1])
    coeff = _truncate(psi, n_components)
    values = np.exp(B @ coeff.theta @ coeff.scores.T)
    return SdfEstimate(values, EstimatorKind.TSVD_PS, coefficients=coeff)


def nsde_coefficient_matrix(
    pgram,
    basis,
    ridge: float = 1e-8,
    grad_tol: float = 1e-7,
    max_iters: int = 200,
    max_halvings: int = 30,
) -> np.ndarray:
    """Separate Whittle fits: one Newton solve per series, no penalty.

    Returns the L x m coefficient matrix. A tiny ridge stabilizes Hessians
    that go singular as the fit approaches interpolation of the
    log-periodogram. Series that fail to converge are reported in a warning.
    """
    B = _matrix(basis)
    I = _floored(pgram)
    gram = B.T @ B
    try:
        chol = cho_factor(gram)
    except np.linalg.LinAlgError:
        chol = cho_factor(gram + ridge * np.eye(B.shape[1]))
    eye = np.eye(B.shape[1])
    psi = np.empty((B.shape[1], I.shape[1]))
    stubborn = []
    for i in range(I.shape[1]):
        target = I[:, i]
        # column-wise solve keeps batched and single-series runs bit-identical
        coef = cho_solve(chol, B.T @ np.log(target))
        u = B @ coef
        dev = float(u.sum() + (target * np.exp(-u)).sum())
        ok = False
        for _ in range(max_iters):
            w = target * np.exp(-u)
            grad = B.T @ (1.0 - w)
            if float(np.linalg.norm(grad)) < grad_tol:
                ok = True
                break
            hess = (B * w[:, None]).T @ B + ridge * eye
            try:
                step = cho_solve(cho_factor(hess), grad)
            except np.linalg.LinAlgError:
                break
            tau = 1.0
            moved = False
            for _ in range(max_halvings + 1):
                trial = coef - tau * step
                u_try = B @ trial
                with np.errstate(over="ignore"):
                    d_try = float(u_try.sum() + (target * np.exp(-u_try)).sum())
                if np.isfinite(d_try) and d_try < dev:
                    coef, u, dev = trial, u_try, d_try
                    moved = True
                    break
                tau *= 0.5
            if not moved:
                # Line search exhausted: accept the stationary-ish point.
                ok = True
                break
        if not ok:
            stubborn.append(i)
        psi[:, i] = coef
    if stubborn:
        warnings.warn(
            f"separate Whittle fit did not converge for series {stubborn}",
            stacklevel=2,
        )
    return psi


def estimate_nsde(pgram, basis, psi: np.ndarray | None = None) -> SdfEstimate:
    """Separate (non-collective) Whittle estimates on the rich basis."""
    B = _matrix(basis)
    if psi is None:
        psi = nsde_coefficient_matrix(pgram, basis)
    return SdfEstimate(np.exp(B @ psi), EstimatorKind.NSDE)


def estimate_tsvd_nsde(pgram, basis, n_components: int, psi: np.ndarray | None = None) -> SdfEstimate:
    """Rank-truncated separate Whittle estimates."""
    B = _matrix(basis)
    if psi is None:
        psi = nsde_coefficient_matrix(pgram, basis)
    _check_rank(n_components, B.shape[1], psi.shape[1])
    coeff = _truncate(psi, n_components)
    values = np.exp(B @ coeff.theta @ coeff.scores.T)
    return SdfEstimate(values, EstimatorKind.TSVD_NSDE, coefficients=coeff)


def estimate_ncsde(pgram, basis, penalty, config: FitConfig) -> SdfEstimate:
    """The collective fit, wrapped as an SDF estimate."""
    B = _matrix(basis)
    result = fit(pgram, basis, penalty, config)
    coeff = result.coefficients
    values = np.exp(B @ coeff.theta @ coeff.scores.T)
    return SdfEstimate(values, EstimatorKind.NCSDE, coefficients=coeff, fit_result=result)


def _check_rank(n_components, L, m):
    if not 1 <= n_components <= min(L, m):
        raise ValueError(
            f"rank must be in [1, min(L={L}, m={m})], got {n_components}"
        )
