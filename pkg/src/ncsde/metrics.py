"""Clustering and subspace quality measures."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

__all__ = ["adjusted_rand_index", "canonical_angle"]


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two partitions.

    Hubert-Arabie form computed from the contingency table in exact integer
    arithmetic (one float rounding at the end). Identical partitions score 1;
    the value is invariant to renaming the labels, and can be slightly
    negative for worse-than-chance agreement (not clamped).
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.size != b.size:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least two observations")
    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)

    def pairs(x):
        return int((x * (x - 1) // 2).sum())

    sum_cells = pairs(table)
    sum_rows = pairs(table.sum(axis=1))
    sum_cols = pairs(table.sum(axis=0))
    total = int(a.size) * (int(a.size) - 1) // 2
    expected = Fraction(sum_rows * sum_cols, total)
    max_index = Fraction(sum_rows + sum_cols, 2)
    if max_index == expected:
        # Both partitions trivial (all-singleton or single-cluster): perfect
        # agreement by convention.
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def canonical_angle(basis_a, basis_b) -> float:
    """Largest principal angle (degrees) between two column spaces.

    Both inputs must have full column rank; each is orthonormalized by QR and
    the angle is arccos of the smallest singular value of the cross-Gram
    matrix, clamped into [0, 90] degrees.
    """
    A = _orthonormal_columns(basis_a, "first")
    B = _orthonormal_columns(basis_b, "second")
    sigma = np.linalg.svd(A.T @ B, compute_uv=False)
    rho = float(np.clip(sigma.min(), 0.0, 1.0))
    return float(np.degrees(np.arccos(rho)))


def _orthonormal_columns(matrix, which):
    M = np.asarray(matrix, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[0] < M.shape[1]:
        raise ValueError(f"{which} matrix has more columns than rows")
    Q, R = np.linalg.qr(M)
    diag = np.abs(np.diag(R))
    tol = max(M.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < M.shape[1]:
        raise ValueError(
            f"{which} matrix is rank deficient: numerical rank {rank} < {M.shape[1]} columns"
        )
    return Q
