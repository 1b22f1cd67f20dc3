"""Independent reference computations shared by the compression tests."""
import itertools

import numpy as np


def column_l1_max(A):
    """||A^T||_inf by explicit loops over columns and rows."""
    best = 0.0
    for i in range(A.shape[1]):
        best = max(best, sum(abs(A[j, i]) for j in range(A.shape[0])))
    return best


def _objective(V, params, d):
    """Batch objective for n = 2: params rows are (u1.., u2.., b1, b2, w0) with u_k of length d."""
    P = np.atleast_2d(params)
    u1, u2 = P[:, :d], P[:, d:2 * d]
    b1, b2, w0 = P[:, 2 * d], P[:, 2 * d + 1], P[:, 2 * d + 2]
    # columns 00, 01, 10, 11 with unit 1 as the most significant bit
    W = [np.zeros_like(u1), u2, u1, u1 + u2]
    B = [w0, w0 + b2, w0 + b1, w0 + b1 + b2]
    cols = []
    for i in range(4):
        r = np.abs(V[:d, i][None, :] - W[i]).sum(axis=1) + np.abs(V[d, i] - B[i])
        cols.append(r)
    return np.max(cols, axis=0)


def zoom_grid_min(V, start, halfwidth, points=9, shrink=0.6, tol=1e-6):
    """Coarse-to-fine grid search for the n = 2 factorization objective."""
    d = V.shape[0] - 1
    center = np.asarray(start, dtype=np.float64)
    k = center.size
    offsets = np.array(list(itertools.product(np.linspace(-1, 1, points), repeat=k)))
    best = float(_objective(V, center, d)[0])
    h = halfwidth
    while h > tol:
        cand = center + h * offsets
        vals = _objective(V, cand, d)
        i = int(np.argmin(vals))
        if vals[i] <= best:
            best, center = float(vals[i]), cand[i]
        h *= shrink
    return best, center


def n2_params_from_U(U):
    d = U.shape[0] - 1
    return np.concatenate([U[:d, 0], U[:d, 1], [U[d, 0], U[d, 1], U[d, 2]]])
