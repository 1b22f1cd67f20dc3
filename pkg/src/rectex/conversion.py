"""Constructive conversions between rectifier and threshold networks.

A general-form rectifier net with positive units P and negative units N is
positive at x iff some subset S1 of P makes

    w0 + sum_{k in S1} a_k(x) - sum_{k in S2} a_k(x) >= 0

hold for every subset S2 of N (and, equivalently, iff every S2 has such an
S1). Each (S1, S2) inequality is one linear threshold unit, so the network is
a DNF (or CNF) over 2^(n1+n2) hyperplanes.

Subsets are bitmasks: bit k set means the k-th unit of that side, in
declaration order.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .network import (
    AffineUnit,
    Layer,
    ReluNetwork,
    ThresholdNetwork,
    normalize_to_general_form,
    relu,
)

MAX_FIRST_LAYER_UNITS = 65_536
MAX_ORACLE_UNITS = 20


class ConversionError(ValueError):
    pass


class SizeGuardError(ConversionError):
    """The requested construction would exceed the exponential-size guard."""


class NotCoplanarError(ConversionError):
    """The third weight vector is not a combination of the first two."""


class DependentBiasError(ConversionError):
    """The third bias follows the same combination as its weights."""


@dataclass(frozen=True)
class BooleanUnitIndex:
    s1: int = 0
    s2: int = 0

    def check(self, n1: int, n2: int) -> None:
        if not (0 <= self.s1 < 1 << n1 and 0 <= self.s2 < 1 << n2):
            raise IndexError(f"subset index {self} out of range for n1={n1}, n2={n2}")


@dataclass(frozen=True)
class ConversionReport:
    n1: int
    n2: int
    first_layer_units: int
    second_layer_units: int
    form: str

    def to_dict(self) -> dict:
        return asdict(self)


def subset_masks(n: int) -> np.ndarray:
    """(2^n, n) 0/1 matrix; row m has bit k of m in column k."""
    m = np.arange(1 << n)[:, None]
    return ((m >> np.arange(n)[None, :]) & 1).astype(np.float64)


def boolean_unit(net: ReluNetwork, idx: BooleanUnitIndex) -> AffineUnit:
    """The hyperplane unit for one (S1, S2) pair."""
    idx.check(net.n1, net.n2)
    w = np.zeros(net.dim)
    b = net.w0
    for k, u in enumerate(net.positive):
        if idx.s1 >> k & 1:
            w = w + u.weights
            b += u.bias
    for k, u in enumerate(net.negative):
        if idx.s2 >> k & 1:
            w = w - u.weights
            b -= u.bias
    return AffineUnit(w, b)


def boolean_unit_table(net: ReluNetwork) -> tuple[np.ndarray, np.ndarray]:
    """All boolean units at once.

    Returns ``W`` of shape (2^n1, 2^n2, d) and ``b`` of shape (2^n1, 2^n2),
    indexed by the S1 and S2 bitmasks.
    """
    M1, M2 = subset_masks(net.n1), subset_masks(net.n2)
    Wp, bp = net._P
    Wn, bn = net._N
    pos_w, pos_b = M1 @ Wp, net.w0 + M1 @ bp
    neg_w, neg_b = M2 @ Wn, M2 @ bn
    W = pos_w[:, None, :] - neg_w[None, :, :]
    b = pos_b[:, None] - neg_b[None, :]
    return W, b


def _guard(net: ReluNetwork, force: bool) -> None:
    total = 1 << net.n
    if total > MAX_FIRST_LAYER_UNITS and not force:
        raise SizeGuardError(
            f"conversion needs 2^{net.n} = {total} first-layer units "
            f"(limit {MAX_FIRST_LAYER_UNITS}); pass force=True to override"
        )


def _group_layer(groups: int, size: int, bias: float) -> Layer:
    W = np.kron(np.eye(groups), np.ones((1, size)))
    return Layer(W, np.full(groups, bias))


def relu_to_threshold_dnf(net: ReluNetwork, force: bool = False):
    """Three-layer threshold net: OR over S1 of AND over S2 of B(S1, S2).

    First-layer unit ``s1 * 2^n2 + s2`` is ``boolean_unit(s1, s2)``.
    """
    _guard(net, force)
    W, b = boolean_unit_table(net)
    g1, g2 = 1 << net.n1, 1 << net.n2
    first = Layer(W.reshape(g1 * g2, net.dim), b.reshape(-1))
    second = _group_layer(g1, g2, 1 - g2)
    out = Layer(np.ones((1, g1)), [g1 - 1])
    report = ConversionReport(net.n1, net.n2, g1 * g2, g1, "dnf")
    return ThresholdNetwork(net.dim, (first, second, out)), report


def relu_to_threshold_cnf(net: ReluNetwork, force: bool = False):
    """Three-layer threshold net: AND over S2 of OR over S1 of B(S1, S2).

    First-layer unit ``s2 * 2^n1 + s1`` is ``boolean_unit(s1, s2)``.
    """
    _guard(net, force)
    W, b = boolean_unit_table(net)
    g1, g2 = 1 << net.n1, 1 << net.n2
    first = Layer(W.transpose(1, 0, 2).reshape(g1 * g2, net.dim), b.T.reshape(-1))
    second = _group_layer(g2, g1, g1 - 1)
    out = Layer(np.ones((1, g2)), [1 - g2])
    report = ConversionReport(net.n1, net.n2, g1 * g2, g2, "cnf")
    return ThresholdNetwork(net.dim, (first, second, out)), report


def flatten_pure(net: ReluNetwork) -> ThresholdNetwork:
    """Two-layer threshold equivalent of a net whose units are all on one side.

    All-positive nets become an OR of 2^n1 units, all-negative nets an AND of
    2^n2 units.
    """
    if net.n1 and net.n2:
        raise ConversionError("flattening needs P or N to be empty")
    W, b = boolean_unit_table(net)
    units = [AffineUnit(w, c) for w, c in zip(W.reshape(-1, net.dim), b.reshape(-1))]
    if net.n2 == 0:
        return ThresholdNetwork.disjunction(units, net.dim)
    return ThresholdNetwork.conjunction(units, net.dim)


def distinct_hyperplanes(net: ThresholdNetwork) -> list[AffineUnit]:
    """First-layer units with nonzero weights, exact duplicates removed, in order."""
    seen, out = set(), []
    for u in net.hidden_units():
        if not np.any(u.weights) or u in seen:
            continue
        seen.add(u)
        out.append(u)
    return out


def _activations(net: ReluNetwork, x) -> tuple[list[float], list[float]]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.dim,):
        raise ValueError(f"expected a point of dimension {net.dim}, got shape {x.shape}")
    return [u(x) for u in net.positive], [u(x) for u in net.negative]


def _oracle_guard(net: ReluNetwork) -> None:
    if net.n > MAX_ORACLE_UNITS:
        raise SizeGuardError(f"enumeration oracle limited to {MAX_ORACLE_UNITS} units, net has {net.n}")


def _subsets(values: Sequence[float]):
    idx = range(len(values))
    for r in range(len(values) + 1):
        for combo in combinations(idx, r):
            yield sum(values[k] for k in combo)


def check_condition2(net: ReluNetwork, x) -> int:
    """Brute force: exists S1 such that for all S2 the inequality holds."""
    _oracle_guard(net)
    a_pos, a_neg = _activations(net, x)
    for p in _subsets(a_pos):
        if all(net.w0 + p - q >= 0 for q in _subsets(a_neg)):
            return 1
    return -1


def check_condition3(net: ReluNetwork, x) -> int:
    """Brute force: for all S2 there exists S1 such that the inequality holds."""
    _oracle_guard(net)
    a_pos, a_neg = _activations(net, x)
    for q in _subsets(a_neg):
        if not any(net.w0 + p - q >= 0 for p in _subsets(a_pos)):
            return -1
    return 1


def sign_unit_to_relu_pair(v: AffineUnit, eps: float) -> tuple[AffineUnit, AffineUnit]:
    """Units shifted by +eps and -eps whose ReLU difference ramps sgn(v.x + d)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    return AffineUnit(v.weights, v.bias + eps), AffineUnit(v.weights, v.bias - eps)


def ramp_surrogate(v: AffineUnit, eps: float, x) -> float:
    """``(R(v.x + d + eps) - R(v.x + d - eps)) / eps - 1``."""
    plus, minus = sign_unit_to_relu_pair(v, eps)
    return float((relu(plus(x)) - relu(minus(x))) / eps - 1)


def threshold2_to_relu(net: ThresholdNetwork, eps: float) -> ReluNetwork:
    """Rectifier net with two units per hidden sign unit.

    Exact wherever every hidden pre-activation is at least ``eps`` away from 0.
    """
    if len(net.layers) != 2:
        raise ConversionError(f"expected a 2-layer threshold network, got {len(net.layers)} layers")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    out = net.layers[1]
    w = out.weights[0]
    hidden, weights = [], []
    for unit, wk in zip(net.hidden_units(), w):
        plus, minus = sign_unit_to_relu_pair(unit, eps)
        hidden += [plus, minus]
        weights += [wk / eps, -wk / eps]
    w0 = float(out.bias[0]) - float(w.sum())
    return normalize_to_general_form(hidden, weights, w0, net.dim)


def three_sign_to_two_relu(v1: AffineUnit, v2: AffineUnit, v3: AffineUnit,
                           tol: float = 1e-9) -> ReluNetwork:
    """Two-ReLU net for ``sgn(2 + sum_k sgn(v_k . x + d_k))`` when v3's weights
    are p*v1 + q*v2 but its bias is not p*d1 + q*d2.
    """
    A = np.column_stack([v1.weights, v2.weights])
    G = A.T @ A
    try:
        p, q = np.linalg.solve(G, A.T @ v3.weights)
    except np.linalg.LinAlgError:
        p, q = np.linalg.lstsq(A, v3.weights, rcond=None)[0]
    residual = float(np.linalg.norm(A @ [p, q] - v3.weights))
    if residual > tol:
        raise NotCoplanarError(f"v3 is not in the span of v1, v2 (residual {residual:.3g})")
    gap = v3.bias - p * v1.bias - q * v2.bias
    if abs(gap) <= tol:
        raise DependentBiasError(f"bias also dependent: d3 - p d1 - q d2 = {gap:.3g}")
    r = 1.0 / gap
    u1 = AffineUnit(p * r * v1.weights, p * r * v1.bias + 1)
    u2 = AffineUnit(q * r * v2.weights, q * r * v2.bias + 1)
    return ReluNetwork(v1.dim, (u1, u2), (), -1.0)


def make_tightness_network(n: int, d: int) -> ReluNetwork:
    """``sgn(-1 + R(x_1) + ... + R(x_n))``: needs 2^n - 1 threshold units."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if d < n:
        raise ValueError(f"need d >= n, got d={d}, n={n}")
    units = tuple(AffineUnit(np.eye(d)[i], 0.0) for i in range(n))
    return ReluNetwork(d, units, (), -1.0)


def tightness_witness(n: int, d: int, S: Iterable[int]) -> np.ndarray:
    """A point where only the hyperplane ``-1 + sum_{i in S} x_i`` is nonnegative.

    ``S`` holds 1-based coordinate indices.
    """
    S = sorted(set(S))
    if not S:
        raise ValueError("S must be nonempty")
    if d < n:
        raise ValueError(f"need d >= n, got d={d}, n={n}")
    if S[0] < 1 or S[-1] > n:
        raise ValueError(f"S must be a subset of 1..{n}, got {S}")
    s = len(S)
    x = np.zeros(d)
    if s == 1:
        x[:n] = -3.0
        x[S[0] - 1] = 2.0
    else:
        x[:n] = -2.0 / (s - 1)
        x[[i - 1 for i in S]] = (1.0 / s + 1.0 / (s - 1)) / 2
    return x


def nonempty_subsets(n: int) -> list[tuple[int, ...]]:
    """All nonempty subsets of 1..n, ordered by bitmask."""
    return [tuple(i + 1 for i in range(n) if m >> i & 1) for m in range(1, 1 << n)]


def make_any_nonnegative_network(n: int, d: int) -> ThresholdNetwork:
    """``sgn(n - 1 + sgn(x_1) + ... + sgn(x_n))``: positive unless every x_i < 0."""
    if n <= 1:
        raise ValueError(f"n must exceed 1, got {n}")
    if d < n:
        raise ValueError(f"need d >= n, got d={d}, n={n}")
    units = [AffineUnit(np.eye(d)[i], 0.0) for i in range(n)]
    return ThresholdNetwork.disjunction(units, d)


def on_hyperplane(unit: AffineUnit, x0) -> np.ndarray:
    """Orthogonal projection of ``x0`` onto ``unit(x) = 0`` (``x0`` if the weights vanish)."""
    x0 = np.asarray(x0, dtype=np.float64)
    nrm = float(unit.weights @ unit.weights)
    if nrm == 0:
        return x0.copy()
    return x0 - (unit(x0) / nrm) * unit.weights

