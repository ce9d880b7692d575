"""Collective log-spectral-density estimation via penalized Whittle likelihood.

All m log-SDFs are written as columns of U = B @ theta @ scores.T, where B is
a rich fixed basis, theta (L x K) holds the weights of K shared adaptive basis
functions, and scores (m x K) holds per-series coordinates. The deviance

    sum_ij { U_ij + I_ij * exp(-U_ij) }

plus a quadratic roughness penalty lambda * tr(theta' R theta) is minimized by
blockwise Newton-Raphson with step-halving, alternating over score rows and
weight columns; the tuning parameter can be refreshed inside the iteration
from an effective-degrees-of-freedom ratio.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .validation import check_positive_ordinates, floor_ordinates, readonly

__all__ = [
    "Coefficients",
    "FitConfig",
    "FitResult",
    "WhittleEvaluationError",
    "StallError",
    "whittle_deviance",
    "penalized_objective",
    "alpha_gradient_hessian",
    "theta_gradient_hessian",
    "initialize",
    "fit",
    "update_lambda",
    "degrees_of_freedom",
    "aic",
    "canonicalize",
    "log_sdf",
    "sdf",
]

LAMBDA_MIN = 1e-8
LAMBDA_MAX = 1e8
SV_TIE_RTOL = 1e-10
SIGN_EPS = 1e-12


class WhittleEvaluationError(ArithmeticError):
    """Non-finite value while evaluating the deviance (exp overflow)."""

    def __init__(self, freq_index, series):
        self.freq_index = int(freq_index)
        self.series = int(series)
        super().__init__(
            f"deviance overflow at frequency index {freq_index}, series {series}"
        )


class StallError(RuntimeError):
    """Every block update was rejected in one outer iteration."""


@dataclass(frozen=True)
class Coefficients:
    """The pair (theta, scores) parameterizing all log-SDFs as B theta scores'.

    theta is L x K (weights of the shared adaptive basis functions in the rich
    basis); scores is m x K (row i holds the coordinates of series i).
    """

    theta: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        th = np.atleast_2d(np.asarray(self.theta, dtype=float))
        sc = np.atleast_2d(np.asarray(self.scores, dtype=float))
        if th.shape[1] != sc.shape[1]:
            raise ValueError(
                f"theta has {th.shape[1]} columns but scores has {sc.shape[1]}"
            )
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(sc))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "theta", readonly(th))
        object.__setattr__(self, "scores", readonly(sc))

    @property
    def n_components(self) -> int:
        return self.theta.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the collective fit.

    lambda_mode is one of "fixed" (use lambda_value, 0 allowed for an
    unpenalized fit), "auto" (start at lambda_value and refresh once per outer
    iteration), or "aic_grid" (fit at each value of lambda_grid, keep the AIC
    minimizer).
    """

    n_components: int
    lambda_mode: str = "auto"
    lambda_value: float = 1.0
    lambda_grid: tuple[float, ...] | None = None
    penalty_kind: str = "difference"
    penalty_order: int = 2
    max_outer_iters: int = 500
    tol: float = 1e-8
    max_halvings: int = 30
    init_ridge: float = 1e-8
    lambda_min: float = LAMBDA_MIN
    lambda_max: float = LAMBDA_MAX

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("need at least one adaptive basis function")
        if self.lambda_mode not in ("fixed", "auto", "aic_grid"):
            raise ValueError(f"unknown lambda_mode '{self.lambda_mode}'")
        if self.lambda_mode == "fixed" and self.lambda_value < 0:
            raise ValueError("fixed lambda must be >= 0")
        if self.lambda_mode == "auto" and self.lambda_value <= 0:
            raise ValueError("auto mode needs a positive starting lambda")
        if self.lambda_mode == "aic_grid":
            if not self.lambda_grid:
                raise ValueError("aic_grid mode needs a non-empty lambda_grid")
            if any(v < 0 for v in self.lambda_grid):
                raise ValueError("lambda grid values must be >= 0")

    def to_json(self) -> dict:
        out = {
            "K": self.n_components,
            "lambda_mode": self.lambda_mode,
            "lambda_value": self.lambda_value,
            "penalty": {"kind": self.penalty_kind, "a": self.penalty_order},
            "max_outer_iters": self.max_outer_iters,
            "tol": self.tol,
            "max_halvings": self.max_halvings,
            "init_ridge": self.init_ridge,
        }
        if self.lambda_grid is not None:
            out["lambda_grid"] = list(self.lambda_grid)
        return out

    @classmethod
    def from_json(cls, payload) -> "FitConfig":
        if isinstance(payload, str):
            payload = json.loads(payload)
        penalty = payload.get("penalty", {})
        grid = payload.get("lambda_grid")
        return cls(
            n_components=int(payload["K"]),
            lambda_mode=payload.get("lambda_mode", "auto"),
            lambda_value=float(payload.get("lambda_value", 1.0)),
            lambda_grid=tuple(float(v) for v in grid) if grid is not None else None,
            penalty_kind=penalty.get("kind", "difference"),
            penalty_order=int(penalty.get("a", 2)),
            max_outer_iters=int(payload.get("max_outer_iters", 500)),
            tol=float(payload.get("tol", 1e-8)),
            max_halvings=int(payload.get("max_halvings", 30)),
            init_ridge=float(payload.get("init_ridge", 1e-8)),
        )


@dataclass(frozen=True)
class FitResult:
    """Converged coefficients plus fitting diagnostics.

    ``coefficients`` is the canonicalized pair; ``objective_trace`` holds the
    penalized objective at the end of each outer iteration evaluated at the
    lambda then in force (non-increasing whenever lambda is held fixed).
    df and aic are evaluated at the fitted, pre-canonicalization state.
    """

    coefficients: Coefficients
    lambda_trace: tuple[float, ...]
    objective_trace: tuple[float, ...]
    deviance: float
    df: float
    aic: float
    converged: bool
    iterations: int
    flags: tuple[str, ...] = ()
    block_objectives: tuple[float, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda_final(self) -> float:
        return self.lambda_trace[-1]

    def to_json(self) -> dict:
        return {
            "theta": self.coefficients.theta.tolist(),
            "scores": self.coefficients.scores.tolist(),
            "lambda_trace": list(self.lambda_trace),
            "objective_trace": list(self.objective_trace),
            "deviance": self.deviance,
            "df": self.df,
            "aic": self.aic,
            "lambda": self.lambda_final,
            "converged": self.converged,
            "iterations": self.iterations,
            "flags": list(self.flags),
            "diagnostics": self.diagnostics,
        }


def _matrix(x):
    """Accept BasisMatrix / PeriodogramSet wrappers or plain arrays."""
    for attr in ("values", "ordinates"):
        if hasattr(x, attr):
            return np.asarray(getattr(x, attr), dtype=float)
    return np.asarray(x, dtype=float)


def _penalty(x):
    return _matrix(x)


def log_sdf(coeff: Coefficients, basis) -> np.ndarray:
    """All fitted log-SDFs on the basis grid: U = B theta scores'."""
    B = _matrix(basis)
    return B @ coeff.theta @ coeff.scores.T


def sdf(coeff: Coefficients, basis) -> np.ndarray:
    """Fitted spectral densities, exp of :func:`log_sdf` (strictly positive)."""
    return np.exp(log_sdf(coeff, basis))


def whittle_deviance(coeff: Coefficients, basis, pgram) -> float:
    """Sum over series and frequencies of u + I * exp(-u).

    This is the frequency-domain negative log-likelihood (up to constants) and
    the quantity the fitter minimizes; smaller is better.
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    check_positive_ordinates(I)
    U = B @ coeff.theta @ coeff.scores.T
    with np.errstate(over="ignore"):
        E = np.exp(-U)
    terms = U + I * E
    if not np.all(np.isfinite(terms)):
        j, i = np.argwhere(~np.isfinite(terms))[0]
        raise WhittleEvaluationError(j, i)
    return float(terms.sum())


def penalized_objective(coeff: Coefficients, basis, pgram, penalty, lam: float) -> float:
    """Deviance plus lambda * tr(theta' R theta)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    R = _penalty(penalty)
    rough = float(np.einsum("lk,lj,jk->", coeff.theta, R, coeff.theta))
    return whittle_deviance(coeff, basis, pgram) + lam * rough


def alpha_gradient_hessian(i: int, coeff: Coefficients, basis, pgram):
    """Gradient and Hessian of the deviance in the score row of series ``i``.

    With G = B theta and w = I_i * exp(-u_i): gradient = G'(1 - w) and
    Hessian = G' diag(w) G, positive definite whenever the ordinates are
    positive and G has full column rank.
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    if not 0 <= i < coeff.scores.shape[0]:
        raise IndexError(f"series index {i} out of range")
    G = B @ coeff.theta
    u = G @ coeff.scores[i]
    with np.errstate(over="ignore"):
        w = I[:, i] * np.exp(-u)
    if not np.all(np.isfinite(w)):
        raise WhittleEvaluationError(int(np.argwhere(~np.isfinite(w))[0]), i)
    grad = G.T @ (1.0 - w)
    hess = (G * w[:, None]).T @ G
    return grad, hess


def theta_gradient_hessian(k: int, coeff: Coefficients, basis, pgram, penalty, lam: float):
    """Penalized gradient and Hessian of the objective in weight column ``k``.

    gradient = B' (1 - W) a_k + 2 lambda R theta_k,
    Hessian  = B' diag(W a_k^2) B + 2 lambda R,
    where W = I * exp(-U) and a_k is the k-th score column.
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    R = _penalty(penalty)
    if not 0 <= k < coeff.n_components:
        raise IndexError(f"component index {k} out of range")
    U = B @ coeff.theta @ coeff.scores.T
    with np.errstate(over="ignore"):
        W = I * np.exp(-U)
    if not np.all(np.isfinite(W)):
        j, i = np.argwhere(~np.isfinite(W))[0]
        raise WhittleEvaluationError(j, i)
    a_k = coeff.scores[:, k]
    grad = B.T @ ((1.0 - W) @ a_k) + 2.0 * lam * (R @ coeff.theta[:, k])
    v = W @ (a_k**2)
    hess = (B * v[:, None]).T @ B + 2.0 * lam * R
    return grad, hess


def initialize(basis, pgram, n_components: int, init_ridge: float = 1e-8) -> Coefficients:
    """Project log-periodograms onto the rich basis and truncate by SVD.

    A small ridge keeps the normal equations solvable when basis functions
    have little support on the grid. The returned theta is orthonormal.
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    check_positive_ordinates(I)
    L = B.shape[1]
    m = I.shape[1]
    if not 1 <= n_components <= min(L, m):
        raise ValueError(
            f"number of components must be in [1, min(L={L}, m={m})], got {n_components}"
        )
    gram = B.T @ B + init_ridge * np.eye(L)
    try:
        chol = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"basis Gram matrix is singular beyond ridge repair: {exc}"
        ) from exc
    psi = cho_solve(chol, B.T @ np.log(I))
    U, s, Vt = np.linalg.svd(psi, full_matrices=False)
    theta = U[:, :n_components]
    scores = Vt[:n_components].T * s[:n_components]
    return Coefficients(theta, scores)


def canonicalize(coeff: Coefficients) -> Coefficients:
    """Restate (theta, scores) through the unique SVD of theta @ scores'.

    The result has orthonormal theta columns, diagonal scores' scores with
    strictly decreasing diagonal, and a positive leading entry in every theta
    column; the product theta @ scores' is preserved. Singular values tied
    within relative 1e-10 are ordered by lexicographic comparison of the theta
    columns (deterministic) and a warning is issued.
    """
    theta, scores = _svd_canonical(coeff.theta, coeff.scores, warn=True)
    return Coefficients(theta, scores)


def _svd_canonical(theta, scores, warn):
    K = theta.shape[1]
    M = theta @ scores.T
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    theta = U[:, :K].copy()
    svals = s[:K].copy()
    V = Vt[:K].T.copy()

    # Sign rule: first entry of each theta column beyond the noise threshold
    # must be positive.
    for k in range(K):
        col = theta[:, k]
        nz = np.argwhere(np.abs(col) > SIGN_EPS)
        if nz.size and col[nz[0, 0]] < 0:
            theta[:, k] = -theta[:, k]
            V[:, k] = -V[:, k]

    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    tied = np.abs(np.diff(svals)) <= SV_TIE_RTOL * scale
    if np.any(tied):
        if warn:
            warnings.warn(
                "tied singular values in canonicalization; ordering tied columns "
                "lexicographically",
                stacklevel=3,
            )
        order = list(range(K))
        start = 0
        while start < K:
            stop = start
            while stop + 1 < K and tied[stop]:
                stop += 1
            if stop > start:
                group = sorted(order[start : stop + 1], key=lambda k: tuple(theta[:, k]))
                order[start : stop + 1] = group
            start = stop + 1
        theta = theta[:, order]
        svals = svals[order]
        V = V[:, order]

    return theta, V * svals


def degrees_of_freedom(coeff: Coefficients, basis, pgram, penalty, lam: float) -> float:
    """Effective degrees of freedom: sum_k tr{(H_k + 2 lambda R)^-1 H_k}.

    H_k is the unpenalized Hessian of weight column k. Equals K*L at lambda=0
    and decays toward K times the penalty null-space dimension as lambda grows.
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    R = _penalty(penalty)
    if lam == 0:
        return float(coeff.n_components * B.shape[1])
    U = B @ coeff.theta @ coeff.scores.T
    with np.errstate(over="ignore"):
        W = I * np.exp(-U)
    if not np.all(np.isfinite(W)):
        j, i = np.argwhere(~np.isfinite(W))[0]
        raise WhittleEvaluationError(j, i)
    return _df_from_weights(B, W, coeff.scores, R, lam)


def _df_from_weights(B, W, scores, R, lam) -> float:
    if lam == 0:
        return float(scores.shape[1] * B.shape[1])
    total = 0.0
    for k in range(scores.shape[1]):
        v = W @ (scores[:, k] ** 2)
        H = (B * v[:, None]).T @ B
        M = H + 2.0 * lam * R
        try:
            chol = cho_factor(M)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"penalized Hessian for component {k} is singular "
                f"(condition estimate {np.linalg.cond(M):.3e})"
            ) from exc
        total += float(np.trace(cho_solve(chol, H)))
    return total


def update_lambda(
    coeff: Coefficients,
    basis,
    pgram,
    penalty,
    lambda_old: float,
    order: int,
    lambda_min: float = LAMBDA_MIN,
    lambda_max: float = LAMBDA_MAX,
) -> float:
    """One within-iteration refresh of the tuning parameter.

    lambda_new = (df(lambda_old) - (order - 1)) / tr(theta' R theta), where
    ``order`` is the difference/derivative order of the penalty. A vanishing
    roughness sends lambda to lambda_max; a df at or below order-1 keeps the
    old value (both flagged by a warning).
    """
    R = _penalty(penalty)
    rough = float(np.einsum("lk,lj,jk->", coeff.theta, R, coeff.theta))
    dfv = degrees_of_freedom(coeff, basis, pgram, penalty, lambda_old)
    if rough <= 1e-14:
        warnings.warn("roughness is numerically zero; capping lambda", stacklevel=2)
        return float(lambda_max)
    if dfv <= order - 1:
        warnings.warn(
            f"df ({dfv:.3g}) does not exceed order-1 ({order - 1}); keeping lambda",
            stacklevel=2,
        )
        return float(lambda_old)
    lam = (dfv - (order - 1)) / rough
    return float(min(max(lam, lambda_min), lambda_max))


def aic(coeff: Coefficients, basis, pgram, penalty, lam: float) -> float:
    """Akaike criterion on the deviance scale: 2*deviance + 2*df(lambda)."""
    return 2.0 * whittle_deviance(coeff, basis, pgram) + 2.0 * degrees_of_freedom(
        coeff, basis, pgram, penalty, lam
    )


def _solve_newton(H, grad, what):
    """Cholesky solve with one jitter retry, then a hard error."""
    try:
        return cho_solve(cho_factor(H), grad)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * float(np.mean(np.diag(H)))
        try:
            return cho_solve(cho_factor(H + jitter * np.eye(H.shape[0])), grad)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"{what} Hessian not positive definite even after jitter "
                f"(condition estimate {np.linalg.cond(H):.3e})"
            ) from exc


def fit(
    pgram,
    basis,
    penalty,
    config: FitConfig,
    init: Coefficients | None = None,
    progress=None,
) -> FitResult:
    """Run the alternating blockwise Newton fit.

    ``progress``, if given, is called as progress(iteration, objective,
    lambda) at the end of every outer iteration. ``init`` overrides the
    projection-based initializer (useful for warm starts).
    """
    B = _matrix(basis)
    I = floor_ordinates(_matrix(pgram))
    check_positive_ordinates(I)
    R = _penalty(penalty)
    if B.shape[0] != I.shape[0]:
        raise ValueError(
            f"basis has {B.shape[0]} rows but the periodogram has {I.shape[0]}"
        )
    if R.shape[0] != B.shape[1]:
        raise ValueError("penalty size does not match the basis size")

    if config.lambda_mode == "aic_grid":
        return _fit_grid(I, B, R, config, init, progress)
    lam = config.lambda_value
    return _fit_core(I, B, R, config, lam, auto=config.lambda_mode == "auto",
                     init=init, progress=progress)


def _fit_grid(I, B, R, config, init, progress):
    best = None
    trail = []
    for lam in config.lambda_grid:
        res = _fit_core(I, B, R, config, lam, auto=False, init=init, progress=progress)
        trail.append((lam, res.aic))
        if best is None or res.aic < best.aic:
            best = res
    diag = dict(best.diagnostics)
    diag["lambda_grid"] = [{"lambda": lam, "aic": a} for lam, a in trail]
    return replace(best, diagnostics=diag)


def _fit_core(I, B, R, config, lam, auto, init, progress):
    K = config.n_components
    m = I.shape[1]
    if init is None:
        coeff0 = initialize(B, I, K, config.init_ridge)
    else:
        if init.theta.shape != (B.shape[1], K) or init.scores.shape != (m, K):
            raise ValueError("initial coefficients have the wrong shape")
        coeff0 = init
    theta = coeff0.theta.copy()
    scores = coeff0.scores.copy()

    U = B @ theta @ scores.T
    col_dev = _column_deviance(U, I)
    rough_cols = np.einsum("lk,lj,jk->k", theta, R, theta)
    obj = float(col_dev.sum() + lam * rough_cols.sum())
    objective_trace = [obj]
    lambda_trace = [float(lam)]
    block_objectives = []
    flags = []
    converged = False
    iterations = 0

    for outer in range(1, config.max_outer_iters + 1):
        iterations = outer
        accepted = 0
        prev_obj = obj
        prev_lam = lam

        # Score rows, one Newton step each against the latest weights.
        G = B @ theta
        for i in range(m):
            w = I[:, i] * np.exp(-U[:, i])
            grad = G.T @ (1.0 - w)
            hess = (G * w[:, None]).T @ G
            step = _solve_newton(hess, grad, f"score row {i}")
            base = col_dev[i]
            tau = 1.0
            for _ in range(config.max_halvings + 1):
                trial = scores[i] - tau * step
                u_try = G @ trial
                with np.errstate(over="ignore"):
                    c_try = float(u_try.sum() + (I[:, i] * np.exp(-u_try)).sum())
                if np.isfinite(c_try) and c_try < base:
                    scores[i] = trial
                    U[:, i] = u_try
                    col_dev[i] = c_try
                    obj -= base - c_try
                    block_objectives.append(obj)
                    accepted += 1
                    break
                tau *= 0.5
            else:
                flags.append(f"iter {outer}: score row {i} skipped")

        # Weight columns; the objective here includes the penalty.
        for k in range(K):
            W = I * np.exp(-U)
            a_k = scores[:, k]
            grad = B.T @ ((1.0 - W) @ a_k) + 2.0 * lam * (R @ theta[:, k])
            v = W @ (a_k**2)
            hess = (B * v[:, None]).T @ B + 2.0 * lam * R
            step = _solve_newton(hess, grad, f"weight column {k}")
            delta_u = B @ step
            tau = 1.0
            for _ in range(config.max_halvings + 1):
                trial = theta[:, k] - tau * step
                U_try = U - tau * np.outer(delta_u, a_k)
                with np.errstate(over="ignore"):
                    col_try = _column_deviance(U_try, I)
                rough_try = float(trial @ R @ trial)
                obj_try = float(
                    col_try.sum() + lam * (rough_cols.sum() - rough_cols[k] + rough_try)
                )
                if np.isfinite(obj_try) and obj_try < obj:
                    theta[:, k] = trial
                    U = U_try
                    col_dev = col_try
                    rough_cols[k] = rough_try
                    obj = obj_try
                    block_objectives.append(obj)
                    accepted += 1
                    break
                tau *= 0.5
            else:
                flags.append(f"iter {outer}: weight column {k} skipped")

        if auto:
            # The factorization has a scale gauge: shrinking theta while
            # growing scores leaves every fitted log-SDF unchanged but drains
            # the penalty, so the tuning-parameter ratio has no fixed point in
            # a drifting gauge. Re-gauge to the canonical representative
            # (orthonormal theta) before each refresh; the fit U is preserved.
            theta, scores = _svd_canonical(theta, scores, warn=False)
            U = B @ theta @ scores.T
            col_dev = _column_deviance(U, I)
            rough_cols = np.einsum("lk,lj,jk->k", theta, R, theta)
            W = I * np.exp(-U)
            rough_total = float(rough_cols.sum())
            if rough_total <= 1e-14:
                lam_new = config.lambda_max
                flags.append(f"iter {outer}: roughness ~ 0, lambda capped")
            else:
                dfv = _df_from_weights(B, W, scores, R, lam)
                if dfv <= config.penalty_order - 1:
                    lam_new = lam
                    flags.append(f"iter {outer}: df <= a-1, lambda kept")
                else:
                    lam_new = (dfv - (config.penalty_order - 1)) / rough_total
                    lam_new = min(max(lam_new, config.lambda_min), config.lambda_max)
            lam = lam_new
            obj = float(col_dev.sum() + lam * rough_cols.sum())

        objective_trace.append(obj)
        lambda_trace.append(float(lam))
        if progress is not None:
            progress(outer, obj, float(lam))

        rel = abs(prev_obj - obj) / max(1.0, abs(prev_obj))
        if rel < config.tol:
            converged = True
            break
        if accepted == 0 and lam == prev_lam:
            raise StallError(
                f"no block update accepted in outer iteration {outer} "
                "and the objective did not settle"
            )

    fitted = Coefficients(theta, scores)
    deviance = float(col_dev.sum())
    W = I * np.exp(-U)
    dfv = _df_from_weights(B, W, scores, R, lam)
    aic_value = 2.0 * deviance + 2.0 * dfv
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # tied-singular-value warning recorded below
        canonical = canonicalize(fitted)
    return FitResult(
        coefficients=canonical,
        lambda_trace=tuple(lambda_trace),
        objective_trace=tuple(objective_trace),
        deviance=deviance,
        df=float(dfv),
        aic=float(aic_value),
        converged=converged,
        iterations=iterations,
        flags=tuple(flags),
        block_objectives=tuple(block_objectives),
        diagnostics={"final_objective": obj},
    )


def _column_deviance(U, I):
    with np.errstate(over="ignore"):
        return (U + I * np.exp(-U)).sum(axis=0)
