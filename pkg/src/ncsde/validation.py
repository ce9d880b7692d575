"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

# Periodogram ordinates are floored at this fraction of the per-series maximum
# before any log or exp(-u)*I product; keeps Newton Hessians positive definite.
RELATIVE_FLOOR = 1e-12


def as_float_matrix(values, name="values"):
    """Coerce to a 2-D float64 array, rejecting non-finite entries.

    Raises ``ValueError`` naming the first offending column so callers can
    report which series is broken.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        bad = np.where(~np.isfinite(arr).all(axis=0))[0]
        raise ValueError(f"{name} contains non-finite entries in column(s) {bad.tolist()}")
    return arr


def as_float_vector(values, name="values"):
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def readonly(arr):
    """Return a C-contiguous read-only view-copy of ``arr``.

    Container types hand these out so concurrent readers can never trip over
    shared mutable state.
    """
    out = np.ascontiguousarray(arr)
    if out is arr or out.base is arr:
        out = out.copy()
    out.setflags(write=False)
    return out


def floor_ordinates(ordinates):
    """Floor periodogram ordinates at ``RELATIVE_FLOOR`` times each series max.

    Applied only where an ordinate falls below the floor; columns that are
    identically zero stay zero (and are rejected by the likelihood code).
    """
    ordinates = np.asarray(ordinates, dtype=float)
    floor = RELATIVE_FLOOR * ordinates.max(axis=0, keepdims=True)
    return np.maximum(ordinates, floor)


def check_positive_ordinates(ordinates, name="ordinates"):
    """Require strictly positive entries (post-flooring) for likelihood work."""
    if np.any(ordinates <= 0):
        bad = np.argwhere(ordinates <= 0)[0]
        raise ValueError(
            f"{name} must be strictly positive after flooring; "
            f"entry (row {bad[0]}, series {bad[1]}) is not. "
            "Constant or all-zero series cannot be fit."
        )
