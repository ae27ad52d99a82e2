"""Kernel matrices over a color hierarchy.

All assignment-type kernels are computed through the unary expansion of the
count table (see :class:`dwloa.refinement.UnaryExpansion`): a weighted
histogram intersection is ``E.T @ diag(w) @ E``. Integer weights give exact
int64 results.
"""
from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .errors import CoverageError, NormalizationError, OracleSizeError
from .refinement import ColorHierarchy, graph_vertices, similarity_matrix

ENUMERATION_LIMIT = 7


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values.T))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values.astype(np.float64))[0])

    def psd_margin(self) -> float:
        """Allowed negative eigenvalue magnitude: ``1e-8 * trace / n``."""
        return 1e-8 * float(np.trace(self.values)) / max(self.n, 1)

    def is_psd(self) -> bool:
        return self.min_eigenvalue() >= -self.psd_margin()

    def submatrix(self, rows, cols=None) -> np.ndarray:
        rows = np.asarray(rows)
        cols = rows if cols is None else np.asarray(cols)
        return self.values[np.ix_(rows, cols)]


def _symmetrize(values: np.ndarray) -> np.ndarray:
    if values.dtype.kind in "iu":
        return values
    return (values + values.T) / 2


def _is_integral(weights, root_weight) -> bool:
    return np.asarray(weights).dtype.kind in "iub" and isinstance(root_weight, (int, np.integer))


def wl_subtree_matrix(hier: ColorHierarchy) -> KernelMatrix:
    """Dot products of per-graph color histograms summed over all levels."""
    c = hier.counts
    values = np.asarray((c.T @ c).todense(), dtype=np.int64)
    return KernelMatrix(values, f"wl h={hier.h}")


def _weighted_intersection(expansion, row_weights, integral: bool) -> np.ndarray:
    e = expansion.matrix
    dtype = np.int64 if integral else np.float64
    scaled = sp.diags(row_weights.astype(dtype), dtype=dtype) @ e.astype(dtype)
    values = np.asarray((e.T.astype(dtype) @ scaled).todense())
    return _symmetrize(values)


def wloa_matrix(hier: ColorHierarchy) -> KernelMatrix:
    """Weighted histogram intersection over all hierarchy nodes.

    Entry (g, g') is ``sum_v min(count(v, g), count(v, g')) * w(v)`` plus
    ``root_weight * min(|V(g)|, |V(g')|)``; this is the optimal assignment
    value under the hierarchy's vertex similarity.
    """
    integral = _is_integral(hier.weights, hier.root_weight)
    ex = hier.unary
    values = _weighted_intersection(ex, hier.weights[ex.row_node], integral)
    if hier.root_weight:
        sizes = hier.graph_sizes
        values = values + hier.root_weight * np.minimum.outer(sizes, sizes)
    return KernelMatrix(values, f"wloa h={hier.h}")


class GroupedKernels:
    """Family of min-kernels, one per group of hierarchy nodes.

    Kernel ``r`` is ``sum_{v in group r} min(count(v, g), count(v, g'))``.
    Nothing is materialised: quadratic forms, the average kernel and weighted
    combinations are all evaluated from the unary expansion.
    """

    def __init__(self, hier: ColorHierarchy, node_group: np.ndarray, n_groups: int | None = None):
        node_group = np.asarray(node_group, dtype=np.int64)
        if node_group.shape != (hier.n_nodes,) or (node_group.size and node_group.min() < 0):
            raise CoverageError(f"assignment must map all {hier.n_nodes} hierarchy nodes to a cluster id >= 0")
        self.hier = hier
        self.node_group = node_group
        self.n_kernels = int(node_group.max()) + 1 if n_groups is None else int(n_groups)
        ex = hier.unary
        self.row_group = node_group[ex.row_node]
        self._e_csc = ex.matrix.tocsc()

    @property
    def n(self) -> int:
        return self.hier.n_graphs

    def quadratic_forms(self, z: np.ndarray, index) -> np.ndarray:
        """``z.T @ K_r[index, index] @ z`` for every kernel ``r``."""
        ez = self._e_csc[:, np.asarray(index)] @ np.asarray(z, dtype=np.float64)
        return np.bincount(self.row_group, weights=ez * ez, minlength=self.n_kernels)

    def average(self, index) -> np.ndarray:
        """Mean of all kernels restricted to ``index``."""
        e = self._e_csc[:, np.asarray(index)]
        return np.asarray((e.T @ e).todense(), dtype=np.float64) / self.n_kernels

    def combine(self, alpha) -> KernelMatrix:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != (self.n_kernels,):
            raise ValueError(f"expected {self.n_kernels} coefficients, got shape {alpha.shape}")
        values = _weighted_intersection(self.hier.unary, alpha[self.row_group], integral=False)
        return KernelMatrix(values, f"combined groups={self.n_kernels} h={self.hier.h}")

    def node_weights(self, alpha) -> np.ndarray:
        """Per-node hierarchy weights implied by per-group coefficients."""
        return np.asarray(alpha, dtype=np.float64)[self.node_group]

    def matrices(self) -> list[KernelMatrix]:
        ex = self.hier.unary
        out = []
        for r in range(self.n_kernels):
            e = ex.matrix[self.row_group == r]
            out.append(KernelMatrix(np.asarray((e.T @ e).todense(), dtype=np.int64), f"group {r} h={self.hier.h}"))
        return out


class MatrixFamily:
    """Explicit list of kernel matrices with the same interface as :class:`GroupedKernels`."""

    def __init__(self, matrices):
        self.mats = [np.asarray(m.values if isinstance(m, KernelMatrix) else m, dtype=np.float64) for m in matrices]
        if not self.mats:
            raise ValueError("need at least one kernel")
        shape = self.mats[0].shape
        if any(m.shape != shape for m in self.mats):
            raise ValueError("all kernel matrices must have the same shape")
        self.n_kernels = len(self.mats)

    @property
    def n(self) -> int:
        return self.mats[0].shape[0]

    def quadratic_forms(self, z, index) -> np.ndarray:
        ix = np.ix_(index, index)
        return np.array([z @ m[ix] @ z for m in self.mats])

    def average(self, index) -> np.ndarray:
        ix = np.ix_(index, index)
        return sum(m[ix] for m in self.mats) / self.n_kernels

    def combine(self, alpha) -> KernelMatrix:
        return combine(self.mats, alpha)


def group_kernel_matrices(hier: ColorHierarchy, assignment) -> list[KernelMatrix]:
    """One min-kernel matrix per cluster of hierarchy nodes.

    ``assignment`` is a :class:`dwloa.grouping.ClusterAssignment` or a plain
    per-node array of cluster ids.
    """
    node_group = getattr(assignment, "assignment", assignment)
    n_groups = getattr(assignment, "k", None)
    return GroupedKernels(hier, node_group, n_groups).matrices()


def bruteforce_assignment(hier: ColorHierarchy, g: int, g2: int, exact_limit: int = 200):
    """Optimal assignment value between the vertex sets of two graphs.

    The smaller vertex set is padded with dummies of similarity 0. Up to
    ``ENUMERATION_LIMIT`` elements every bijection is enumerated; larger
    instances up to ``exact_limit`` use the Hungarian method.
    """
    sim = similarity_matrix(hier, graph_vertices(hier, g), graph_vertices(hier, g2))
    n = max(sim.shape)
    if n > exact_limit:
        raise OracleSizeError(f"assignment instance of size {n} exceeds oracle limit {exact_limit}")
    padded = np.zeros((n, n), dtype=sim.dtype)
    padded[:sim.shape[0], :sim.shape[1]] = sim
    if n == 0:
        return padded.dtype.type(0)
    if n <= ENUMERATION_LIMIT:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        return padded[np.arange(n), perms].sum(axis=1).max()
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return padded[rows, cols].sum()


def normalize_unit_diagonal(K: KernelMatrix) -> KernelMatrix:
    values = np.asarray(K.values, dtype=np.float64)
    diag = np.diag(values).copy()
    bad = np.flatnonzero(~(diag > 0))
    if bad.size:
        raise NormalizationError(f"cannot normalize: diagonal entry of graph {int(bad[0])} is {diag[bad[0]]}")
    root = np.sqrt(diag)
    out = values / np.outer(root, root)
    np.fill_diagonal(out, 1.0)
    return KernelMatrix(out, (K.provenance + " normalized").strip())


def combine(matrices, alpha) -> KernelMatrix:
    """Non-negative weighted sum of kernel matrices."""
    mats = [np.asarray(m.values if isinstance(m, KernelMatrix) else m) for m in matrices]
    alpha = np.asarray(alpha, dtype=np.float64)
    if len(mats) != alpha.size:
        raise ValueError(f"{len(mats)} matrices but {alpha.size} coefficients")
    if np.any(alpha < 0):
        raise ValueError("combination coefficients must be non-negative")
    shape = mats[0].shape
    for m in mats:
        if m.shape != shape:
            raise ValueError(f"dimension mismatch: {m.shape} vs {shape}")
    out = np.zeros(shape, dtype=np.float64)
    for a, m in zip(alpha, mats):
        if a:
            out += a * m
    return KernelMatrix(_symmetrize(out), f"combination of {len(mats)} kernels")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_kernel(K: KernelMatrix, out, fmt: str = "csv", labels=None) -> None:
    """Export a kernel matrix as ``csv``, ``precomputed`` (LIBSVM) or ``json``.

    ``out`` is a path or an open text file.
    """
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w") as fh:
            write_kernel(K, fh, fmt, labels)
        return
    fh = out
    values = K.values
    if fmt == "csv":
        fh.write(f"# {K.provenance}\n")
        for row in values:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    elif fmt == "precomputed":
        fh.write(f"# {K.provenance}\n")
        for i, row in enumerate(values):
            head = _fmt(labels[i]) if labels is not None else str(i + 1)
            fh.write(f"{head} 0:{i + 1} " + " ".join(f"{j + 1}:{_fmt(x)}" for j, x in enumerate(row)) + "\n")
    elif fmt == "json":
        json.dump({"provenance": K.provenance, "n": K.n, "values": values.tolist()}, fh)
        fh.write("\n")
    else:
        raise ValueError(f"unknown kernel format {fmt!r}")


def read_kernel(path: str, fmt: str = "csv") -> KernelMatrix:
    with open(path) as fh:
        text = fh.read()
    if fmt == "json":
        obj = json.loads(text)
        return KernelMatrix(np.array(obj["values"]), obj.get("provenance", ""))
    lines = text.splitlines()
    provenance = lines[0][2:] if lines and lines[0].startswith("# ") else ""
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if fmt == "csv":
        rows = [[float(x) for x in ln.split(",")] for ln in body]
    elif fmt == "precomputed":
        rows = [[float(tok.split(":")[1]) for tok in ln.split()[2:]] for ln in body]
    else:
        raise ValueError(f"unknown kernel format {fmt!r}")
    values = np.array(rows, dtype=np.float64)
    if values.size and np.all(values == np.round(values)) and np.abs(values).max() < 2 ** 53:
        values = values.astype(np.int64)
    return KernelMatrix(values.reshape(len(rows), -1), provenance)


def dense_bytes(n: int, count: int = 1) -> int:
    """Bytes needed for ``count`` dense float64 matrices of order ``n``."""
    return int(count) * int(n) * int(n) * 8


__all__ = [
    "KernelMatrix", "wl_subtree_matrix", "wloa_matrix", "GroupedKernels", "MatrixFamily",
    "group_kernel_matrices", "bruteforce_assignment", "normalize_unit_diagonal", "combine",
    "write_kernel", "read_kernel", "dense_bytes",
]
