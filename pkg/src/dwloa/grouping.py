"""Grouping of hierarchy nodes by k-means so clustered nodes share one weight."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .refinement import ColorHierarchy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    assignment: np.ndarray
    centroids: np.ndarray
    inertia_trace: tuple = ()
    requested_k: int | None = None
    notes: tuple = field(default_factory=tuple)

    @property
    def inertia(self) -> float:
        return self.inertia_trace[-1] if self.inertia_trace else 0.0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def node_feature_vectors(hier: ColorHierarchy) -> sp.csr_matrix:
    """Per-node vectors of per-graph vertex counts, shape (n_nodes, n_graphs).

    Component ``i`` of node ``v`` is the number of vertices of graph ``i``
    in the subtree below ``v``, i.e. holding ``v``'s color. The synthetic root
    is not included.
    """
    return hier.counts.astype(np.float64).tocsr()


def _sq_norms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


def _sq_dist(X, x_norms, centers) -> np.ndarray:
    """Squared distances, shape (n_points, n_centers). Exact for integer data."""
    centers = np.atleast_2d(centers)
    cross = X @ centers.T
    cross = np.asarray(cross)
    d = x_norms[:, None] - 2.0 * cross + np.einsum("ij,ij->i", centers, centers)[None, :]
    return np.maximum(d, 0.0)


def _row(X, i) -> np.ndarray:
    return X[i].toarray().ravel() if sp.issparse(X) else np.asarray(X[i], dtype=np.float64)


def _n_distinct(X) -> int:
    if sp.issparse(X):
        X = X.tocsr()
        X.sort_indices()
        keys = {
            (X.indices[X.indptr[i]:X.indptr[i + 1]].tobytes(), X.data[X.indptr[i]:X.indptr[i + 1]].tobytes())
            for i in range(X.shape[0])
        }
        return len(keys)
    return np.unique(X, axis=0).shape[0]


def _plusplus(X, x_norms, k, rng) -> np.ndarray:
    n = X.shape[0]
    centers = [_row(X, int(rng.integers(n)))]
    closest = _sq_dist(X, x_norms, centers[0])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            break
        idx = int(rng.choice(n, p=closest / total))
        centers.append(_row(X, idx))
        closest = np.minimum(closest, _sq_dist(X, x_norms, centers[-1])[:, 0])
    return np.array(centers)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding.

    ``points`` may be a dense array or a scipy sparse matrix (one point per
    row). Distances are squared Euclidean; ties go to the lowest cluster id.
    If fewer than ``k`` distinct points exist, ``k`` is reduced. A cluster
    that empties is reseeded once from the farthest point and dropped if it
    empties again.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    X = points.tocsr().astype(np.float64) if sp.issparse(points) else np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("no points to cluster")
    notes = []
    n_distinct = _n_distinct(X)
    k_eff = min(k, n_distinct)
    if k_eff < k:
        notes.append(f"k reduced from {k} to {k_eff} distinct points")
    rng = np.random.default_rng(seed)
    x_norms = _sq_norms(X)
    centers = _plusplus(X, x_norms, k_eff, rng)
    reseeded: set[int] = set()
    alive = np.ones(len(centers), dtype=bool)
    trace = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dist(X, x_norms, centers)
        d[:, ~alive] = np.inf
        new_labels = np.argmin(d, axis=1)
        best = d[np.arange(n), new_labels]
        trace.append(float(best.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sizes = np.bincount(labels, minlength=len(centers))
        for c in np.flatnonzero((sizes == 0) & alive):
            if c in reseeded:
                alive[c] = False
                notes.append(f"dropped empty cluster {c}")
                continue
            far = int(np.argmax(best))
            reseeded.add(int(c))
            notes.append(f"reseeded empty cluster {c} at point {far}")
            centers[c] = _row(X, far)
            best[far] = 0.0
            labels[far] = c
        sizes = np.bincount(labels, minlength=len(centers))
        member = sp.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(len(centers), n))
        sums = np.asarray((member @ X).todense()) if sp.issparse(X) else member @ X
        nonempty = sizes > 0
        centers[nonempty] = sums[nonempty] / sizes[nonempty, None]
    else:
        d = _sq_dist(X, x_norms, centers)
        d[:, ~alive] = np.inf
        labels = np.argmin(d, axis=1)
        trace.append(float(d[np.arange(n), labels].sum()))

    used = np.unique(labels)
    if used.size < len(centers):
        notes.append(f"{len(centers) - used.size} empty cluster(s) removed")
    remap = np.full(len(centers), -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    for note in notes:
        log.info("kmeans: %s", note)
    return ClusterAssignment(
        k=int(used.size),
        assignment=remap[labels],
        centroids=centers[used],
        inertia_trace=tuple(trace),
        requested_k=k,
        notes=tuple(notes),
    )


def identity_assignment(hier: ColorHierarchy) -> ClusterAssignment:
    """Every node in its own cluster (no grouping)."""
    n = hier.n_nodes
    return ClusterAssignment(k=n, assignment=np.arange(n), centroids=np.zeros((0, hier.n_graphs)), requested_k=n)


def write_assignment(hier: ColorHierarchy, assignment: ClusterAssignment, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("node,level,cluster\n")
        for node, (lvl, c) in enumerate(zip(hier.level.tolist(), assignment.assignment.tolist())):
            fh.write(f"{node},{lvl},{c}\n")
