"""Hierarchical Ward clustering, WSS curves, and elbow selection.

Agglomeration follows the ward.D2 convention: the Lance-Williams recurrence
runs on squared Euclidean distances and merge heights are square roots of the
recurrence values. Ties are broken on the smallest (id, id) pair so the merge
sequence is deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import as_float_matrix, readonly

__all__ = [
    "Dendrogram",
    "ClusterAssignment",
    "euclidean_distances",
    "ward_linkage",
    "cut",
    "wss_curve",
    "elbow",
    "select_K",
]


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering.

    ``merges`` has one row per merge: (left id, right id, height, size).
    Leaves carry ids 0..m-1; the cluster created by merge step s has id m+s.
    """

    merges: np.ndarray
    n_leaves: int
    leaf_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.merges, dtype=float)
        if arr.shape != (self.n_leaves - 1, 4):
            raise ValueError(f"expected {self.n_leaves - 1} merge rows, got {arr.shape}")
        heights = arr[:, 2]
        if np.any(np.diff(heights) < -1e-9 * max(1.0, heights.max(initial=0.0))):
            raise ValueError("merge heights must be non-decreasing")
        object.__setattr__(self, "merges", readonly(arr))

    def to_json(self) -> dict:
        payload = {
            "n_leaves": self.n_leaves,
            "merges": [
                {"left": int(l), "right": int(r), "height": float(h), "size": int(s)}
                for l, r, h, s in self.merges
            ],
        }
        if self.leaf_labels is not None:
            payload["leaf_labels"] = list(self.leaf_labels)
        return payload


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster labels 1..k for each of m items; every cluster is non-empty."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=int)
        present = np.unique(arr)
        if not np.array_equal(present, np.arange(1, self.k + 1)):
            raise ValueError(f"labels must cover 1..{self.k} with no empty cluster")
        object.__setattr__(self, "labels", readonly(arr))


def euclidean_distances(points) -> np.ndarray:
    """Pairwise Euclidean distance matrix of the rows of ``points``."""
    X = as_float_matrix(points, "points")
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def ward_linkage(dist, leaf_labels=None) -> Dendrogram:
    """Agglomerate under the Ward.D2 criterion.

    ``dist`` is a full symmetric m x m distance matrix with zero diagonal.
    """
    D = as_float_matrix(dist, "distance matrix")
    m = D.shape[0]
    if D.shape != (m, m):
        raise ValueError("distance matrix must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, D.max(initial=0.0))):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(D < 0):
        raise ValueError("distances must be non-negative")
    if m < 2:
        raise ValueError("need at least two items to cluster")

    d2 = D.astype(float) ** 2
    ids = list(range(m))
    sizes = np.ones(m)
    active = d2.copy()
    merges = np.zeros((m - 1, 4))
    for step in range(m - 1):
        n_act = active.shape[0]
        work = active.copy()
        work[np.tril_indices(n_act)] = np.inf
        best = work.min()
        # Exact ties resolved on the smallest (id, id) pair.
        cand = np.argwhere(work == best)
        pair = min(cand.tolist(), key=lambda ij: tuple(sorted((ids[ij[0]], ids[ij[1]]))))
        i, j = sorted(pair)
        ni, nj, nk = sizes[i], sizes[j], sizes
        merged = (ni + nk) * active[i] + (nj + nk) * active[j] - nk * active[i, j]
        merged /= ni + nj + nk
        left, right = sorted((ids[i], ids[j]))
        merges[step] = (left, right, np.sqrt(max(best, 0.0)), ni + nj)

        keep = [r for r in range(n_act) if r != j]
        active = active[np.ix_(keep, keep)]
        new_row = np.delete(merged, j)
        pos = keep.index(i)
        active[pos, :] = new_row
        active[:, pos] = new_row
        active[pos, pos] = 0.0
        sizes = np.delete(sizes, j)
        sizes[pos] = ni + nj
        del ids[j]
        ids[pos] = m + step
    return Dendrogram(merges, n_leaves=m, leaf_labels=leaf_labels)


def cut(dend: Dendrogram, k: int) -> ClusterAssignment:
    """Cut the tree into ``k`` clusters by dropping the k-1 highest merges."""
    m = dend.n_leaves
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    parent = list(range(2 * m - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    # Heights are non-decreasing, so the last k-1 merges are the highest.
    for step in range(m - k):
        left, right = int(dend.merges[step, 0]), int(dend.merges[step, 1])
        parent[find(left)] = parent[find(right)] = m + step
    roots = [find(i) for i in range(m)]
    labels = np.zeros(m, dtype=int)
    seen = {}
    for i, root in enumerate(roots):
        if root not in seen:
            seen[root] = len(seen) + 1
        labels[i] = seen[root]
    return ClusterAssignment(labels, k=k)


def wss_curve(points, k_max: int) -> np.ndarray:
    """Total within-cluster sum of squares for k = 1..k_max Ward partitions."""
    X = as_float_matrix(points, "points")
    m = X.shape[0]
    if not 1 <= k_max <= m:
        raise ValueError(f"k_max must be in [1, {m}], got {k_max}")
    dend = ward_linkage(euclidean_distances(X))
    curve = np.zeros(k_max)
    for k in range(1, k_max + 1):
        labels = cut(dend, k).labels
        total = 0.0
        for lab in range(1, k + 1):
            block = X[labels == lab]
            total += float(np.sum((block - block.mean(axis=0)) ** 2))
        curve[k - 1] = total
    return curve


def elbow(wss) -> int:
    """Turning point of a WSS curve: the k maximizing the second difference.

    The curve itself should always be reported alongside the suggestion so a
    human can override it.
    """
    w = np.asarray(wss, dtype=float).ravel()
    if w.size < 3:
        raise ValueError("need a WSS curve of length >= 3 to locate an elbow")
    second = w[:-2] - 2.0 * w[1:-1] + w[2:]
    return int(np.argmax(second)) + 2  # interior k, 1-based


def select_K(pgram, basis, k_max: int) -> int:
    """Suggest the shared basis size / cluster count from smoothed periodograms.

    Projects the log-periodograms onto the rich basis, treats each series as a
    point, and returns the elbow of the Ward WSS curve. A flat curve (near
    identical series) yields an unreliable suggestion and raises a warning.
    """
    from .baselines import smoothed_log_periodograms

    smooth = smoothed_log_periodograms(pgram, basis)
    points = smooth.T
    k_max = min(k_max, points.shape[0])
    curve = wss_curve(points, k_max)
    scale = float(np.sum((points - points.mean(axis=0)) ** 2))
    if curve.size and (scale <= 0 or curve[0] <= 1e-12 * max(scale, 1.0)):
        warnings.warn(
            "WSS curve is degenerate (series nearly identical); elbow suggestion unreliable",
            stacklevel=2,
        )
    return elbow(curve)
