"""Binary C-SVM on precomputed kernels, trained by SMO.

The solver minimises ``f(a) = a' Q a / 2 - sum(a)`` with ``Q = Y K Y``
subject to ``0 <= a <= C`` and ``y' a = 0``, choosing the maximal violating
pair at every step. No shrinking and no kernel cache: the matrix is resident.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ClassError, NumericError

TAU = 1e-12


@numba.njit(cache=True)
def _select_pair(a, G, y, C):
    gmax = -np.inf
    gmin = np.inf
    i = -1
    j = -1
    for t in range(a.size):
        v = -y[t] * G[t]
        if (y[t] > 0 and a[t] < C) or (y[t] < 0 and a[t] > 0):
            if v > gmax:
                gmax = v
                i = t
        if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
            if v < gmin:
                gmin = v
                j = t
    return i, j, gmax - gmin


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_iter, record):
    n = y.size
    a = np.zeros(n)
    G = -np.ones(n)
    trace = np.empty(max_iter + 1 if record else 0)
    if record:
        trace[0] = 0.0
    it = 0
    gap = np.inf
    while it < max_iter:
        i, j, gap = _select_pair(a, G, y, C)
        if i < 0 or j < 0 or gap < tol:
            break
        Qii = K[i, i]
        Qjj = K[j, j]
        Qij = y[i] * y[j] * K[i, j]
        old_ai = a[i]
        old_aj = a[j]
        if y[i] != y[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if s > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = s - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = s
            if s > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = s - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = s
        dai = a[i] - old_ai
        daj = a[j] - old_aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)
        it += 1
        if record:
            obj = 0.0
            for t in range(n):
                obj += a[t] * (G[t] - 1.0)
            trace[it] = -0.5 * obj
    return a, G, it, gap, trace[: it + 1] if record else trace


def _bias(a, G, y, C) -> float:
    yG = y * G
    upper = a >= C
    lower = a <= 0
    free = ~upper & ~lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (upper & (y < 0)) | (lower & (y > 0))
        lb_mask = (upper & (y > 0)) | (lower & (y < 0))
        ub = float(yG[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yG[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return -rho


@dataclass(frozen=True)
class SVMModel:
    dual_coef: np.ndarray
    bias: float
    support: np.ndarray
    C: float
    train_index: np.ndarray
    alpha: np.ndarray
    n_iter: int
    kkt_gap: float
    dual_objective: float
    objective_trace: tuple = ()

    def decision_function(self, K_cross) -> np.ndarray:
        K_cross = np.asarray(K_cross, dtype=np.float64)
        if K_cross.ndim != 2 or K_cross.shape[1] != self.dual_coef.size:
            raise ValueError(f"cross kernel must have {self.dual_coef.size} columns, got shape {K_cross.shape}")
        return K_cross @ self.dual_coef + self.bias


def train_svm(K, labels, C: float, tol: float = 1e-3, max_iter: int | None = None,
              train_index=None, record_objective: bool = False) -> SVMModel:
    """Fit a C-SVM on a precomputed training kernel.

    ``train_index`` is stored on the model so callers can slice cross
    kernels consistently; it does not change the computation.
    """
    K = np.ascontiguousarray(getattr(K, "values", K), dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if K.shape != (y.size, y.size):
        raise ValueError(f"kernel shape {K.shape} does not match {y.size} labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ClassError("SVM training needs both classes")
    if not np.all(np.isfinite(K)):
        raise NumericError("kernel matrix contains non-finite entries")
    if C <= 0:
        raise ValueError("C must be positive")
    if max_iter is None:
        max_iter = max(10_000_000, 100 * y.size)
    a, G, n_iter, gap, trace = _smo(K, y, float(C), float(tol), int(max_iter), bool(record_objective))
    dual = -0.5 * float(a @ (G - 1.0))
    support = np.flatnonzero(a > 0)
    idx = np.arange(y.size) if train_index is None else np.asarray(train_index)
    return SVMModel(
        dual_coef=y * a,
        bias=_bias(a, G, y, C),
        support=support,
        C=float(C),
        train_index=idx,
        alpha=a,
        n_iter=int(n_iter),
        kkt_gap=float(gap),
        dual_objective=dual,
        objective_trace=tuple(trace.tolist()),
    )


def predict(model: SVMModel, K_cross) -> np.ndarray:
    """Labels in {-1, +1}; a decision value of exactly 0 maps to +1."""
    return np.where(model.decision_function(K_cross) >= 0, 1, -1)


def dual_objective(K, labels, a) -> float:
    """``sum(a) - a' Y K Y a / 2``."""
    z = np.asarray(labels, dtype=np.float64) * np.asarray(a, dtype=np.float64)
    return float(np.sum(a) - 0.5 * z @ np.asarray(K, dtype=np.float64) @ z)


def kkt_violation(K, labels, a, C) -> float:
    """Maximal violating pair gap ``m(a) - M(a)`` (<= 0 means optimal)."""
    y = np.asarray(labels, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    G = y * (np.asarray(K, dtype=np.float64) @ (y * a)) - 1.0
    return float(_select_pair(a, G, y, float(C))[2])


def write_model(path: str, model: SVMModel) -> None:
    with open(path, "w") as fh:
        fh.write(f"# C={model.C} bias={format(model.bias, '.17g')} iterations={model.n_iter}\n")
        fh.write("index,dual_coef\n")
        for s in model.support:
            fh.write(f"{int(model.train_index[s])},{format(float(model.dual_coef[s]), '.17g')}\n")
