"""EasyMKL-style kernel weight learning.

Stage one minimises ``(1 - lam) * g' Y K Y g + lam * |g|^2`` over the
bi-simplex (one probability simplex per class) for the average kernel ``K``.
Stage two sets each kernel's coefficient proportional to its own quadratic
form at that ``g`` and rescales the coefficient vector to unit Euclidean norm.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ClassError, NumericError
from .kernels import KernelMatrix, MatrixFamily

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaSolution:
    gamma: np.ndarray
    objective_trace: tuple
    n_iter: int
    converged: bool
    duality_gap: float


@dataclass(frozen=True)
class MKLWeights:
    alpha: np.ndarray
    gamma: np.ndarray
    lam: float
    objective_trace: tuple
    quadratic_forms: np.ndarray
    n_iter: int = 0
    converged: bool = True
    degenerate: bool = False

    @property
    def sparsity(self) -> float:
        """Fraction of coefficients below 1e-6."""
        return float(np.mean(self.alpha < 1e-6)) if self.alpha.size else 0.0


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=np.float64)
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= 1e-15:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ks > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _check_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ClassError("both classes (+1 and -1) must be present")
    if not np.all(np.abs(y) == 1):
        raise ValueError("labels must be +1 or -1")
    return y


def project_bisimplex(v, labels) -> np.ndarray:
    """Project ``v`` onto the product of the positive- and negative-class simplices."""
    y = _check_labels(labels)
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    for cls in (1, -1):
        mask = y == cls
        out[mask] = project_simplex(v[mask])
    return out


def _uniform_gamma(y: np.ndarray) -> np.ndarray:
    g = np.empty_like(y)
    for cls in (1, -1):
        mask = y == cls
        g[mask] = 1.0 / mask.sum()
    return g


def solve_gamma(K, labels, lam: float, tol: float = 1e-6, max_iter: int = 1000) -> GammaSolution:
    """Projected gradient with backtracking for the inner EasyMKL problem.

    Starts from the class-uniform distribution. Iteration stops when the
    relative objective decrease falls below ``tol``. Every iterate is
    feasible and the objective never increases.
    """
    K = np.asarray(K.values if isinstance(K, KernelMatrix) else K, dtype=np.float64)
    y = _check_labels(labels)
    if K.shape != (y.size, y.size):
        raise ValueError(f"kernel shape {K.shape} does not match {y.size} labels")
    if not np.all(np.isfinite(K)):
        raise NumericError("kernel matrix contains non-finite entries")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")

    Q = (1.0 - lam) * (y[:, None] * K * y[None, :])
    Q[np.diag_indices_from(Q)] += lam

    def objective(g):
        return float(g @ Q @ g)

    gamma = _uniform_gamma(y)
    f = objective(gamma)
    trace = [f]
    # Gershgorin bound on the largest eigenvalue of 2Q
    lipschitz = 2.0 * max(float(np.abs(Q).sum(axis=1).max()), 1e-300)
    step = 1.0 / lipschitz
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (Q @ gamma)
        step *= 2.0
        while True:
            cand = project_bisimplex(gamma - step * grad, y)
            diff = cand - gamma
            f_cand = objective(cand)
            if f_cand <= f + grad @ diff + (diff @ diff) / (2.0 * step) or step < 1e-300:
                break
            step *= 0.5
        if f_cand > f or not np.any(diff):
            converged = True
            break
        decrease = f - f_cand
        gamma, f = cand, f_cand
        trace.append(f)
        if decrease <= tol * max(abs(f), 1e-300):
            converged = True
            break
    grad = 2.0 * (Q @ gamma)
    gap = float(sum(grad[y == c] @ gamma[y == c] - grad[y == c].min() for c in (1, -1)))
    return GammaSolution(gamma, tuple(trace), it, converged, gap)


def _as_family(kernels):
    if hasattr(kernels, "quadratic_forms"):
        return kernels
    return MatrixFamily(kernels)


def compute_alpha(kernels, gamma, labels, lam: float, index=None):
    """Kernel coefficients from the quadratic forms at ``gamma``.

    Returns ``(alpha, d, degenerate)`` where ``d[r] = (1 - lam) * z' K_r z``
    with ``z = labels * gamma``. ``alpha`` is the unit-norm direction of the
    raw forms ``z' K_r z`` (the common ``1 - lam`` factor cancels); if all
    forms vanish, ``alpha`` is uniform.
    """
    family = _as_family(kernels)
    y = np.asarray(labels, dtype=np.float64)
    index = np.arange(family.n) if index is None else np.asarray(index)
    z = y * np.asarray(gamma, dtype=np.float64)
    raw = np.maximum(family.quadratic_forms(z, index), 0.0)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0 or not np.isfinite(norm):
        log.warning("all kernel quadratic forms are zero; using uniform weights")
        alpha = np.full(family.n_kernels, 1.0 / np.sqrt(family.n_kernels))
        return alpha, (1.0 - lam) * raw, True
    return raw / norm, (1.0 - lam) * raw, False


def learn_weights(kernels, labels, lam: float, index=None, tol: float = 1e-6, max_iter: int = 1000) -> MKLWeights:
    """Learn coefficients for ``kernels`` from the training examples ``index``.

    ``kernels`` is a list of matrices or an implicit family such as
    :class:`dwloa.kernels.GroupedKernels`; ``labels`` are aligned with
    ``index`` (all examples when ``index`` is None).
    """
    family = _as_family(kernels)
    index = np.arange(family.n) if index is None else np.asarray(index)
    sol = solve_gamma(family.average(index), labels, lam, tol=tol, max_iter=max_iter)
    alpha, d, degenerate = compute_alpha(family, sol.gamma, labels, lam, index)
    if np.any(alpha < 0):
        raise NumericError("negative kernel coefficient; input kernels are not PSD")
    return MKLWeights(alpha, sol.gamma, lam, sol.objective_trace, d, sol.n_iter, sol.converged, degenerate)


def write_weights(path: str, weights: MKLWeights, ids=None, header: str = "id") -> None:
    """CSV of (id, alpha), preceded by solver diagnostics as comment lines."""
    ids = range(weights.alpha.size) if ids is None else ids
    with open(path, "w") as fh:
        fh.write(f"# lambda={weights.lam} iterations={weights.n_iter} converged={weights.converged} "
                 f"objective={format(weights.objective_trace[-1], '.17g')} degenerate={weights.degenerate}\n")
        fh.write(f"{header},alpha\n")
        for i, a in zip(ids, weights.alpha):
            fh.write(f"{i},{format(float(a), '.17g')}\n")
