"""Slow reference implementations used only as test oracles.

None of these share code with the package: refinement keeps full nested
signatures instead of compressed ids, the QP solver enumerates active sets,
and the gamma problem is solved by grid search.
"""
import itertools
from collections import Counter

import numpy as np


def nested_colors(graphs, h):
    """Per level, per graph, per vertex: the uncompressed refinement signature."""
    levels = [[tuple(("c", c) for c in g.initial_color) for g in graphs]]
    for _ in range(h):
        prev = levels[-1]
        levels.append([
            tuple((prev[gi][v], tuple(sorted(prev[gi][u] for u in g.adjacency[v]))) for v in range(g.num_vertices))
            for gi, g in enumerate(graphs)
        ])
    return levels


def histogram_intersection(graphs, h, weight=None):
    """Sum over levels and colors of min(count_g, count_g') * weight(level, color)."""
    levels = nested_colors(graphs, h)
    n = len(graphs)
    K = np.zeros((n, n), dtype=object)
    for lvl in levels:
        hists = [Counter(cols) for cols in lvl]
        for a in range(n):
            for b in range(n):
                K[a, b] += sum(min(cnt, hists[b][c]) * (1 if weight is None else weight(lvl, c))
                               for c, cnt in hists[a].items())
    return K


def wl_dot(graphs, h):
    levels = nested_colors(graphs, h)
    n = len(graphs)
    K = np.zeros((n, n), dtype=np.int64)
    for lvl in levels:
        hists = [Counter(cols) for cols in lvl]
        for a in range(n):
            for b in range(n):
                K[a, b] += sum(cnt * hists[b][c] for c, cnt in hists[a].items())
    return K


def simplex_grid(m, step):
    """All points of the (m-1)-simplex with coordinates on a grid of ``step``."""
    res = int(round(1 / step))
    pts = [c for c in itertools.product(range(res + 1), repeat=m - 1) if sum(c) <= res]
    arr = np.array([list(c) + [res - sum(c)] for c in pts], dtype=np.float64) / res
    return arr


def gamma_grid_min(K, labels, lam, step=1e-3):
    """Minimum of (1-lam) z'Kz + lam |g|^2 over a grid of the bi-simplex."""
    y = np.asarray(labels, dtype=np.float64)
    pos, neg = np.flatnonzero(y > 0), np.flatnonzero(y < 0)
    gp, gn = simplex_grid(pos.size, step), simplex_grid(neg.size, step)
    Q = (1 - lam) * (y[:, None] * K * y[None, :]) + lam * np.eye(y.size)
    best = np.inf
    # split the quadratic form into positive block, negative block and cross term
    Qpp, Qnn, Qpn = Q[np.ix_(pos, pos)], Q[np.ix_(neg, neg)], Q[np.ix_(pos, neg)]
    fp = np.einsum("ij,jk,ik->i", gp, Qpp, gp)
    fn = np.einsum("ij,jk,ik->i", gn, Qnn, gn)
    cross = gp @ Qpn  # (n_p_points, |neg|)
    for start in range(0, gp.shape[0], 2048):
        block = fp[start:start + 2048, None] + fn[None, :] + 2 * cross[start:start + 2048] @ gn.T
        best = min(best, float(block.min()))
    return best


def svm_dual_exact(K, y, C):
    """Exact maximum of sum(a) - a'YKYa/2 over the box with y'a = 0.

    Enumerates every split of the variables into (at 0, at C, free); on each
    face the stationary point of the equality-constrained quadratic is found
    by least squares and kept if feasible.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    Q = y[:, None] * K * y[None, :]
    best, best_a = -np.inf, None
    for state in itertools.product((0, 1, 2), repeat=n):  # 0: lower, 1: upper, 2: free
        state = np.array(state)
        free = np.flatnonzero(state == 2)
        a = np.where(state == 1, C, 0.0).astype(np.float64)
        if free.size:
            bound = np.flatnonzero(state != 2)
            m = free.size
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = Q[np.ix_(free, free)]
            A[:m, m] = y[free]
            A[m, :m] = y[free]
            rhs = np.concatenate([1.0 - Q[np.ix_(free, bound)] @ a[bound], [-(y[bound] @ a[bound])]])
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            a[free] = sol[:m]
            if not np.allclose(A @ sol, rhs, atol=1e-9):
                continue
        if abs(y @ a) > 1e-9 or np.any(a < -1e-12) or np.any(a > C + 1e-12):
            continue
        a = np.clip(a, 0, C)
        val = a.sum() - 0.5 * a @ Q @ a
        if val > best:
            best, best_a = val, a
    return best, best_a
