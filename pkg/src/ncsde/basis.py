"""B-spline basis construction and roughness penalty matrices.

The rich fixed basis is a clamped B-spline family on a frequency interval;
smoothness of the fitted adaptive basis functions is controlled either by the
integrated squared second derivative or by a discrete difference penalty on
the coefficient sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline

from .spectral import FrequencyGrid
from .validation import readonly

__all__ = [
    "BasisSpec",
    "BasisMatrix",
    "PenaltyMatrix",
    "eval_basis",
    "second_derivative_penalty",
    "difference_penalty",
    "penalty_for",
    "spec_to_config",
    "spec_from_config",
]

DEFAULT_L = 40


@dataclass(frozen=True)
class BasisSpec:
    """Clamped B-spline basis: ``n_basis`` functions of ``degree`` on ``domain``.

    Interior knots are equally spaced; boundary knots are repeated degree+1
    times so the basis interpolates at the endpoints.
    """

    n_basis: int = DEFAULT_L
    degree: int = 3
    domain: tuple[float, float] = (0.0, 0.5)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"domain must satisfy lo < hi, got {self.domain}")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.n_basis < self.degree + 1:
            raise ValueError(
                f"need at least degree+1 = {self.degree + 1} basis functions, got {self.n_basis}"
            )

    @property
    def knots(self) -> np.ndarray:
        """Full clamped knot vector (length n_basis + degree + 1)."""
        lo, hi = self.domain
        n_interior = self.n_basis - self.degree - 1
        interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
        return np.concatenate(
            [np.full(self.degree + 1, lo), interior, np.full(self.degree + 1, hi)]
        )


@dataclass(frozen=True)
class BasisMatrix:
    """Basis evaluated on a frequency grid: entry (j, l) = b_l(omega_j)."""

    values: np.ndarray
    spec: BasisSpec
    grid: FrequencyGrid

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (len(self.grid), self.spec.n_basis):
            raise ValueError(
                f"basis matrix shape {arr.shape} does not match "
                f"({len(self.grid)}, {self.spec.n_basis})"
            )
        object.__setattr__(self, "values", readonly(arr))

    @property
    def n_basis(self) -> int:
        return self.spec.n_basis


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric PSD penalty R so that roughness(theta) = theta' R theta."""

    values: np.ndarray
    kind: str  # "second_derivative" or "difference"
    order: int  # derivative/difference order a

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("penalty matrix must be square")
        if not np.allclose(arr, arr.T, rtol=0, atol=1e-12 * max(1.0, np.abs(arr).max())):
            raise ValueError("penalty matrix must be symmetric")
        object.__setattr__(self, "values", readonly(arr))

    @property
    def n_basis(self) -> int:
        return self.values.shape[0]


def eval_basis(grid: FrequencyGrid, spec: BasisSpec) -> BasisMatrix:
    """Evaluate the B-spline basis at every grid frequency.

    Cox-de Boor recursion via scipy; rows sum to one exactly (partition of
    unity) because the knots are clamped and all points lie in the domain.
    """
    lo, hi = spec.domain
    om = grid.omegas
    if om[0] < lo or om[-1] > hi:
        raise ValueError(
            f"grid range [{om[0]}, {om[-1]}] falls outside the basis domain [{lo}, {hi}]"
        )
    design = BSpline.design_matrix(om, spec.knots, spec.degree).toarray()
    return BasisMatrix(design, spec=spec, grid=grid)


def second_derivative_penalty(spec: BasisSpec) -> PenaltyMatrix:
    """Integrated squared-second-derivative penalty R1 = int b''(w) b''(w)' dw.

    Exact per knot span: the integrand is piecewise polynomial of degree
    2*(degree-2), so Gauss-Legendre with degree+1 points per span integrates
    it without error (up to round-off).
    """
    if spec.degree < 2:
        raise ValueError("second-derivative penalty needs a basis of degree >= 2")
    knots = spec.knots
    L = spec.n_basis
    # Second-derivative design evaluated through one vector-valued spline.
    dd = BSpline(knots, np.eye(L), spec.degree).derivative(2)
    spans = np.unique(knots)
    nodes, weights = leggauss(spec.degree + 1)
    R = np.zeros((L, L))
    for a, b in zip(spans[:-1], spans[1:]):
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * nodes
        D = dd(x)  # (#points, L)
        R += half * (D.T * weights) @ D
    R = 0.5 * (R + R.T)
    return PenaltyMatrix(R, kind="second_derivative", order=2)


def difference_penalty(n_basis: int, order: int) -> PenaltyMatrix:
    """Difference penalty R2 = D_a' D_a from the order-``order`` difference matrix.

    D_1 has rows (1, -1, 0, ...); higher orders apply the first-difference
    stencil recursively, e.g. order 2 rows are (1, -2, 1).
    """
    if order < 1:
        raise ValueError("difference order must be at least 1")
    if order >= n_basis:
        raise ValueError(f"difference order {order} must be below the basis size {n_basis}")
    diff = difference_matrix(n_basis, order)
    return PenaltyMatrix(diff.T @ diff, kind="difference", order=order)


def difference_matrix(n_basis: int, order: int) -> np.ndarray:
    """The (n_basis - order) x n_basis matrix of order-``order`` differences."""
    diff = np.eye(n_basis)
    for size in range(n_basis, n_basis - order, -1):
        first = np.zeros((size - 1, size))
        idx = np.arange(size - 1)
        first[idx, idx] = 1.0
        first[idx, idx + 1] = -1.0
        diff = first @ diff
    return diff


def penalty_for(spec: BasisSpec, kind: str, order: int = 2) -> PenaltyMatrix:
    """Build the requested penalty for a basis spec."""
    if kind == "second_derivative":
        return second_derivative_penalty(spec)
    if kind == "difference":
        return difference_penalty(spec.n_basis, order)
    raise ValueError(f"unknown penalty kind '{kind}'")


def spec_to_config(spec: BasisSpec, penalty: PenaltyMatrix | None = None) -> dict:
    """Serialize a basis spec (and optional penalty choice) to a JSON block."""
    config = {
        "L": spec.n_basis,
        "degree": spec.degree,
        "domain": [spec.domain[0], spec.domain[1]],
    }
    if penalty is not None:
        config["penalty"] = {"kind": penalty.kind, "a": penalty.order}
    return config


def spec_from_config(config: dict) -> tuple[BasisSpec, PenaltyMatrix | None]:
    """Inverse of :func:`spec_to_config`."""
    spec = BasisSpec(
        n_basis=int(config.get("L", DEFAULT_L)),
        degree=int(config.get("degree", 3)),
        domain=tuple(config.get("domain", (0.0, 0.5))),
    )
    penalty = None
    if "penalty" in config:
        block = config["penalty"]
        penalty = penalty_for(spec, block["kind"], int(block.get("a", 2)))
    return spec, penalty
