"""Binary-encoding compression of OR-threshold networks into rectifier networks.

Matrices follow one layout throughout: a column per unit, weights on top and
the bias in the last row.

* ``V`` is (d+1) x 2^n: threshold unit k is column k, ``(v_k; d_k)``.
* ``U`` is (d+1) x (n+1): columns ``(u_k; b_k)`` for the n rectifier units and
  a last column ``(0; w0)``.
* ``T`` is the n x 2^n binary encoding matrix with an all-ones row appended,
  so that a factorable ``V`` equals ``U @ T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import simplex
from .network import AffineUnit, ReluNetwork, ThresholdNetwork

EXACT_TOL = 1e-9
GAP_TOL = 1e-7
MAX_LP_N = 10
REJECT = -1


class NotFactorableError(ValueError):
    """``V`` is not ``U @ T`` for any admissible ``U``; ``column`` is 1-based."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column} violates the encoding structure")


class SolverGuardError(ValueError):
    pass


class MarginBoundViolation(AssertionError):
    pass


def encoding_matrix(n: int) -> np.ndarray:
    """n x 2^n matrix whose i-th column is i-1 in binary, most significant bit first."""
    if int(n) != n or not 1 <= n <= 20:
        raise ValueError(f"n must be in 1..20, got {n!r}")
    i = np.arange(1 << n)
    shifts = np.arange(n - 1, -1, -1)
    return ((i[None, :] >> shifts[:, None]) & 1).astype(np.float64)


def extended_encoding(n: int) -> np.ndarray:
    """``[T_n; 1 ... 1]``; for n = 0 this is the 1 x 1 matrix ``[[1]]``."""
    if n == 0:
        return np.ones((1, 1))
    return np.vstack([encoding_matrix(n), np.ones(1 << n)])


def n_from_columns(k: int) -> int:
    if k < 1 or k & (k - 1):
        raise ValueError(f"column count must be a power of two, got {k}")
    return k.bit_length() - 1


def check_U(U) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] < 1:
        raise ValueError(f"U must be a (d+1) x (n+1) matrix, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("U has non-finite entries")
    if np.any(U[:-1, -1] != 0):
        raise ValueError("last column of U must have a zero weight block")
    return U


def check_V(V) -> tuple[np.ndarray, int]:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 1:
        raise ValueError(f"V must be a (d+1) x 2^n matrix, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValueError("V has non-finite entries")
    return V, n_from_columns(V.shape[1])


def expand(U) -> np.ndarray:
    U = check_U(U)
    return U @ extended_encoding(U.shape[1] - 1)


def units_from_matrix(M) -> list[AffineUnit]:
    M = np.asarray(M, dtype=np.float64)
    return [AffineUnit(col[:-1], col[-1]) for col in M.T]


def compressed_relu(U) -> ReluNetwork:
    """``sgn(w0 + sum_k R(u_k . x + b_k))``."""
    U = check_U(U)
    d = U.shape[0] - 1
    return ReluNetwork(d, tuple(units_from_matrix(U[:, :-1])), (), U[-1, -1])


def expand_compressed(U) -> tuple[np.ndarray, ThresholdNetwork]:
    """``V = U T`` and the OR-threshold network over the 2^n columns of ``V``."""
    U = check_U(U)
    d = U.shape[0] - 1
    if d < 1:
        raise ValueError("networks need at least one input dimension")
    V = expand(U)
    return V, ThresholdNetwork.disjunction(units_from_matrix(V), d)


def exact_factorize(V, tol: float = EXACT_TOL) -> np.ndarray:
    """Read ``U`` off the constant and singleton columns and verify ``V = U T``.

    Raises :class:`NotFactorableError` naming the first offending column.
    """
    V, n = check_V(V)
    d = V.shape[0] - 1
    if np.any(np.abs(V[:-1, 0]) > tol):
        raise NotFactorableError(1, "column 1 must have a zero weight block")
    w0 = V[-1, 0]
    U = np.zeros((d + 1, n + 1))
    U[-1, n] = w0
    for k in range(n):
        col = 1 << (n - 1 - k)
        U[:-1, k] = V[:-1, col]
        U[-1, k] = V[-1, col] - w0
    bad = np.flatnonzero(np.any(np.abs(V - U @ extended_encoding(n)) > tol, axis=0))
    if bad.size:
        raise NotFactorableError(int(bad[0]) + 1)
    return U


def induced_inf_norm_T(A) -> float:
    """``||A^T||_inf``: the largest L1 norm over the columns of ``A``."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=0).max())


def residual_norm(V, U) -> float:
    return induced_inf_norm_T(np.asarray(V, dtype=np.float64) - expand(U))


@dataclass(frozen=True)
class FactorResult:
    U: np.ndarray
    objective: float
    duality_gap: float
    method: str


def _lp_problem(V: np.ndarray, n: int, columns):
    """Sparse LP data for min t with |V - U T| <= s and column sums of s <= t."""
    d1, K = V.shape
    T = extended_encoding(n)
    cols = np.arange(K) if columns is None else np.asarray(sorted(set(columns)))
    if cols.size == 0 or cols.min() < 0 or cols.max() >= K:
        raise ValueError("columns must be a nonempty subset of V's column indices")
    m = cols.size
    # vec(U T) over the selected columns, row-major, as a map from row-major vec(U)
    full = sp.kron(sp.eye(d1), sp.csr_matrix(T[:, cols].T), format="csr")
    keep = np.ones(d1 * (n + 1), bool)
    keep[[j * (n + 1) + n for j in range(d1 - 1)]] = False
    P = full[:, np.flatnonzero(keep)]
    n_u = P.shape[1]
    n_s = d1 * m
    target = V[:, cols].reshape(-1)
    I = sp.eye(n_s, format="csr")
    zero_t = sp.csr_matrix((n_s, 1))
    rows_upper = sp.hstack([-P, -I, zero_t])
    rows_lower = sp.hstack([P, -I, zero_t])
    # s is laid out row-major (j, i); column i of the residual sums over j
    col_sum = sp.kron(sp.csr_matrix(np.ones((1, d1))), sp.eye(m))
    rows_t = sp.hstack([sp.csr_matrix((m, n_u)), col_sum, -sp.csr_matrix(np.ones((m, 1)))])
    A = sp.vstack([rows_upper, rows_lower, rows_t], format="csr")
    b = np.concatenate([-target, target, np.zeros(m)])
    c = np.zeros(n_u + n_s + 1)
    c[-1] = 1.0
    free = np.zeros(c.size, bool)
    free[:n_u] = True
    free[-1] = True
    return c, A, b, free, keep, n_u


def min_infnorm_factor(V, method: str = "highs", columns=None) -> FactorResult:
    """``argmin_U ||(V - U T)^T||_inf`` with U's zero block enforced, as an LP.

    ``method`` is ``"highs"`` (scipy) or ``"simplex"`` (the dense Bland's rule
    solver in :mod:`rectex.simplex`). ``columns`` restricts the objective to a
    subset of V's columns (0-based).
    """
    V, n = check_V(V)
    if n > MAX_LP_N:
        raise SolverGuardError(f"LP limited to n <= {MAX_LP_N}, got n = {n}")
    c, A, b, free, keep, n_u = _lp_problem(V, n, columns)
    if method == "highs":
        bounds = [(None, None) if f else (0, None) for f in free]
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status != 0:
            raise RuntimeError(f"LP solver failed unexpectedly: {res.message}")
        z, obj = res.x, float(res.fun)
        gap = abs(obj - float(b @ res.ineqlin.marginals))
    elif method == "simplex":
        res = simplex.solve(c, A.toarray(), b, free)
        z, obj, gap = res.x, res.objective, res.duality_gap
    else:
        raise ValueError(f"unknown method {method!r}")
    d1 = V.shape[0]
    flat = np.zeros(d1 * (n + 1))
    flat[keep] = z[:n_u]
    U = flat.reshape(d1, n + 1)
    return FactorResult(U=U, objective=obj, duality_gap=gap, method=method)


def hidden_layer_predict(M, x_aug) -> int:
    """Index of the best-scoring unit, or ``REJECT`` if every score is negative.

    ``M`` has one column per unit (bias last); ``x_aug`` ends with a constant 1.
    Ties go to the lowest index.
    """
    M = np.asarray(M, dtype=np.float64)
    x_aug = np.asarray(x_aug, dtype=np.float64)
    if x_aug.shape != (M.shape[0],):
        raise ValueError(f"x_aug must have length {M.shape[0]}, got shape {x_aug.shape}")
    if x_aug[-1] != 1:
        raise ValueError("x_aug must end with the constant 1")
    scores = x_aug @ M
    if np.all(scores < 0):
        return REJECT
    return int(np.argmax(scores))


def augment(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass(frozen=True)
class MarginAudit:
    """Per-example margin bound check for hidden-layer equivalence."""

    residual_norm: float
    gamma: np.ndarray
    x_inf_norm: np.ndarray
    bound: np.ndarray
    passes: np.ndarray
    argmax_V: np.ndarray
    argmax_UT: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        """Rows that meet the bound but whose argmax changed."""
        return np.flatnonzero(self.passes & (self.argmax_V != self.argmax_UT))

    def rows(self):
        for i in range(len(self.gamma)):
            yield {
                "gamma": float(self.gamma[i]),
                "x_inf_norm": float(self.x_inf_norm[i]),
                "bound": float(self.bound[i]),
                "residual": self.residual_norm,
                "passes": bool(self.passes[i]),
                "argmax_V": int(self.argmax_V[i]),
                "argmax_UT": int(self.argmax_UT[i]),
            }


def margin_audit(V, U, data, include_bias: bool = True, strict: bool = True) -> MarginAudit:
    """Compare ``||(V - U T)^T||_inf`` with ``gamma(x) / (2 ||x||_inf)`` per example.

    ``data`` rows are augmented inputs (trailing 1). Whenever the bound holds
    the argmax under ``U T`` must equal the argmax under ``V``; with
    ``strict`` a violation raises :class:`MarginBoundViolation`.
    """
    V, _ = check_V(V)
    UT = expand(U)
    if UT.shape != V.shape:
        raise ValueError(f"U T has shape {UT.shape}, V has shape {V.shape}")
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if X.shape[1] != V.shape[0]:
        raise ValueError(f"data rows must have length {V.shape[0]}, got {X.shape[1]}")
    eps = induced_inf_norm_T(V - UT)
    sv = X @ V
    if V.shape[1] == 1:
        gamma = np.full(len(X), np.inf)
    else:
        top2 = np.sort(sv, axis=1)[:, -2:]
        gamma = top2[:, 1] - top2[:, 0]
    xs = X if include_bias else X[:, :-1]
    xnorm = np.abs(xs).max(axis=1) if xs.shape[1] else np.zeros(len(X))
    if np.any(xnorm == 0):
        raise ValueError("examples with zero infinity norm have no margin bound")
    bound = gamma / (2 * xnorm)
    passes = eps <= bound
    audit = MarginAudit(
        residual_norm=eps,
        gamma=gamma,
        x_inf_norm=xnorm,
        bound=bound,
        passes=passes,
        argmax_V=np.argmax(sv, axis=1),
        argmax_UT=np.argmax(X @ UT, axis=1),
    )
    if strict and audit.violations.size:
        i = int(audit.violations[0])
        raise MarginBoundViolation(
            f"example {i} meets the margin bound but argmax moved "
            f"{audit.argmax_V[i]} -> {audit.argmax_UT[i]}"
        )
    return audit


def passing_radius(V, U, direction, data, include_bias: bool = True,
                   hi: float = 1.0, iters: int = 60) -> float:
    """Largest ``delta`` (by bisection) with every example passing for ``U + delta * direction``."""
    direction = check_U(direction)

    def ok(delta):
        return bool(margin_audit(V, U + delta * direction, data, include_bias).passes.all())

    lo = 0.0
    if not ok(lo):
        return 0.0
    while ok(hi):
        lo, hi = hi, hi * 2
        if hi > 1e12:
            return np.inf
    for _ in range(iters):
        mid = (lo + hi) / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
