"""Data model and exact evaluation for two-layer rectifier and threshold networks.

All networks are immutable: arrays are copied to float64 and frozen on
construction, and every transformation returns a new object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "sign", "compressed_tanh")


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def sgn(z):
    """Sign with ``sgn(0) = +1``; no tolerance.

    Works on scalars (returns ``int``) and arrays (returns float64 array of
    ``+1.0``/``-1.0``). Non-finite input raises ``ValueError``.
    """
    if np.ndim(z) == 0:
        z = float(z)
        if not np.isfinite(z):
            raise ValueError(f"sgn of non-finite value {z!r}")
        return 1 if z >= 0 else -1
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("sgn of non-finite values")
    return np.where(z >= 0, 1.0, -1.0)


def relu(z):
    return np.maximum(z, 0.0)


@dataclass(frozen=True, eq=False)
class AffineUnit:
    """A hidden unit ``x -> weights . x + bias``."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, 1, "weights"))
        b = float(self.bias)
        if not np.isfinite(b):
            raise ValueError("bias must be finite")
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x) -> float:
        return float(self.weights @ np.asarray(x, dtype=np.float64) + self.bias)

    def scaled(self, factor: float) -> "AffineUnit":
        return AffineUnit(self.weights * factor, self.bias * factor)

    def __eq__(self, other):
        if not isinstance(other, AffineUnit):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.weights.tobytes(), self.bias))

    def __repr__(self):
        return f"AffineUnit(weights={self.weights.tolist()}, bias={self.bias!r})"


def _stack(units: Sequence[AffineUnit], dim: int) -> tuple[np.ndarray, np.ndarray]:
    if not units:
        return np.zeros((0, dim)), np.zeros(0)
    return np.stack([u.weights for u in units]), np.array([u.bias for u in units])


def _as_points(X, dim: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected input of dimension {dim}, got shape {np.shape(X)}")
    return X, single


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Two-layer rectifier network in general form.

    ``y = sgn(w0 + sum_{k in P} R(a_k(x)) - sum_{k in N} R(a_k(x)))`` where the
    output weights are implicitly +1 on ``positive`` and -1 on ``negative``.
    """

    dim: int
    positive: tuple[AffineUnit, ...] = ()
    negative: tuple[AffineUnit, ...] = ()
    w0: float = 0.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "positive", tuple(self.positive))
        object.__setattr__(self, "negative", tuple(self.negative))
        for u in self.positive + self.negative:
            if not isinstance(u, AffineUnit):
                raise TypeError(f"expected AffineUnit, got {type(u).__name__}")
            if u.dim != self.dim:
                raise ValueError(f"unit has {u.dim} weights, network dim is {self.dim}")
        w0 = float(self.w0)
        if not np.isfinite(w0):
            raise ValueError("w0 must be finite")
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "_P", _stack(self.positive, self.dim))
        object.__setattr__(self, "_N", _stack(self.negative, self.dim))

    @property
    def n1(self) -> int:
        return len(self.positive)

    @property
    def n2(self) -> int:
        return len(self.negative)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def units(self) -> tuple[AffineUnit, ...]:
        return self.positive + self.negative

    def decision_function(self, X) -> np.ndarray:
        """Output pre-activation for each row of ``X`` (or a scalar for one point)."""
        X, single = _as_points(X, self.dim)
        Wp, bp = self._P
        Wn, bn = self._N
        z = self.w0 + relu(X @ Wp.T + bp).sum(axis=1) - relu(X @ Wn.T + bn).sum(axis=1)
        return float(z[0]) if single else z

    def predict(self, X):
        return sgn(self.decision_function(X))

    def __eq__(self, other):
        if not isinstance(other, ReluNetwork):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.w0 == other.w0
            and self.positive == other.positive
            and self.negative == other.negative
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Layer:
    """Dense layer ``activation(weights @ h + bias)``; ``weights`` is (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "sign"
    c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, 2, "layer weights"))
        object.__setattr__(self, "bias", _frozen(self.bias, 1, "layer bias"))
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"weights have {self.weights.shape[0]} rows but bias has {self.bias.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.activation == "compressed_tanh":
            if self.c is None or not float(self.c) > 0:
                raise ValueError("compressed_tanh requires c > 0")
            object.__setattr__(self, "c", float(self.c))
        elif self.c is not None:
            raise ValueError(f"c is only meaningful for compressed_tanh, not {self.activation}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def preactivation(self, H: np.ndarray) -> np.ndarray:
        return H @ self.weights.T + self.bias

    def activate(self, Z: np.ndarray) -> np.ndarray:
        if self.activation == "sign":
            return sgn(Z)
        if self.activation == "relu":
            return relu(Z)
        return np.tanh(self.c * Z)

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.c == other.c
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GeneralNetwork:
    """Feed-forward network whose hidden layers carry their own activation.

    The final layer always has a single sign unit.
    """

    dim: int
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("network needs at least an output layer")
        width = self.dim
        for i, layer in enumerate(layers):
            if layer.n_in != width:
                raise ValueError(f"layer {i} expects {layer.n_in} inputs, previous width is {width}")
            width = layer.n_out
        if width != 1:
            raise ValueError(f"final layer must have exactly 1 unit, has {width}")
        if layers[-1].activation != "sign":
            raise ValueError("output activation must be sign")

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.n_out for layer in self.layers[:-1])

    def decision_function(self, X):
        X, single = _as_points(X, self.dim)
        H = X
        for layer in self.layers[:-1]:
            H = layer.activate(layer.preactivation(H))
        z = self.layers[-1].preactivation(H)[:, 0]
        return float(z[0]) if single else z

    def predict(self, X):
        return sgn(self.decision_function(X))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.dim == other.dim and self.layers == other.layers

    __hash__ = None


class ThresholdNetwork(GeneralNetwork):
    """Sign-activation network with one or two hidden layers."""

    def __post_init__(self):
        super().__post_init__()
        if len(self.layers) not in (2, 3):
            raise ValueError(f"threshold networks have 2 or 3 layers, got {len(self.layers)}")
        for layer in self.layers:
            if layer.activation != "sign":
                raise ValueError("threshold networks use sign activations only")

    @classmethod
    def from_units(cls, units: Sequence[AffineUnit], out_weights, w0: float, dim: int | None = None):
        """Two-layer net ``sgn(w0 + sum_k w_k sgn(v_k . x + d_k))``."""
        if dim is None:
            if not units:
                raise ValueError("dim is required when there are no hidden units")
            dim = units[0].dim
        W, b = _stack(list(units), dim)
        out = np.asarray(out_weights, dtype=np.float64).reshape(1, -1)
        return cls(dim, (Layer(W, b), Layer(out, [w0])))

    @classmethod
    def disjunction(cls, units: Sequence[AffineUnit], dim: int | None = None):
        """Positive iff at least one hidden unit fires."""
        m = len(units)
        return cls.from_units(units, np.ones(m), m - 1, dim)

    @classmethod
    def conjunction(cls, units: Sequence[AffineUnit], dim: int | None = None):
        """Positive iff every hidden unit fires."""
        m = len(units)
        return cls.from_units(units, np.ones(m), 1 - m, dim)

    def hidden_units(self, layer: int = 0) -> list[AffineUnit]:
        if layer != 0:
            raise ValueError("only first-layer units are affine in the input")
        L = self.layers[0]
        return [AffineUnit(w, b) for w, b in zip(L.weights, L.bias)]


def eval_relu(net: ReluNetwork, x) -> int:
    """Classify a single point with a general-form rectifier network."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("eval_relu takes a single point; use net.predict for batches")
    return sgn(net.decision_function(x))


def eval_threshold(net: GeneralNetwork, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("eval_threshold takes a single point; use net.predict for batches")
    return sgn(net.decision_function(x))


def normalize_to_general_form(hidden: Sequence[AffineUnit], out_weights, w0: float,
                              dim: int | None = None) -> ReluNetwork:
    """Absorb output-weight magnitudes into the hidden units.

    Uses ``c * R(z) = sgn(c) * R(|c| z)``; units with zero output weight are
    dropped.
    """
    out_weights = np.asarray(out_weights, dtype=np.float64)
    if out_weights.shape != (len(hidden),):
        raise ValueError(f"{len(hidden)} hidden units but {out_weights.shape} output weights")
    if dim is None:
        if not hidden:
            raise ValueError("dim is required when there are no hidden units")
        dim = hidden[0].dim
    pos, neg = [], []
    for unit, w in zip(hidden, out_weights):
        if w > 0:
            pos.append(unit.scaled(w))
        elif w < 0:
            neg.append(unit.scaled(-w))
    return ReluNetwork(dim, tuple(pos), tuple(neg), w0)


def region_count(n: int, d: int) -> int:
    """Number of regions cut out by ``n`` hyperplanes in general position in R^d."""
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    return sum(comb(int(n), s) for s in range(min(int(n), int(d)) + 1))


def as_general(net) -> GeneralNetwork:
    """View any supported network as a :class:`GeneralNetwork` (layers only).

    Rectifier networks become one relu layer followed by a sign output with
    weights +1 on the positive units and -1 on the negative ones.
    """
    if isinstance(net, GeneralNetwork):
        return GeneralNetwork(net.dim, net.layers)
    W, b = _stack(list(net.units), net.dim)
    out = np.concatenate([np.ones(net.n1), -np.ones(net.n2)]).reshape(1, -1)
    return GeneralNetwork(net.dim, (Layer(W, b, "relu"), Layer(out, [net.w0])))
