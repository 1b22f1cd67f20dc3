"""Synthetic data from random rectifier networks and shallow-network training.

:class:`ShallowNetworkClassifier` is a scikit-learn compatible estimator
trained by minibatch SGD on the logistic loss; :func:`train` wraps it with
learning-rate selection on a validation split, and :func:`run_experiment`
compares rectifier and compressed-tanh learners on generated data.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .network import AffineUnit, GeneralNetwork, Layer, ReluNetwork, sgn
from .seeding import max_workers, rng_for

log = logging.getLogger(__name__)

DEFAULT_LR_GRID = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
MAX_HIDDEN = 1024

# stream ids for rng_for
_NET, _DATA, _SPLIT, _RUN = 1, 2, 3, 4


class TrainingDivergedError(RuntimeError):
    pass


class GeneratorRetryError(RuntimeError):
    pass


def _activate(kind: str, c: float, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Activation and its derivative (ReLU uses slope 1 at 0)."""
    if kind == "relu":
        return np.maximum(Z, 0.0), (Z >= 0).astype(np.float64)
    if kind == "compressed_tanh":
        H = np.tanh(c * Z)
        return H, c * (1.0 - H * H)
    raise ValueError(f"unknown activation {kind!r}")


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray, activation: str,
                  c: float = 1.0, l2: float = 0.0):
    """Mean logistic loss plus ``l2/2 * ||weights||^2`` and its gradient.

    ``params`` has ``W1`` (h, d), ``b1`` (h,), ``w2`` (h,), ``b2`` (scalar).
    Biases are not regularized.
    """
    W1, b1, w2, b2 = params["W1"], params["b1"], params["w2"], params["b2"]
    Z = X @ W1.T + b1
    H, dH = _activate(activation, c, Z)
    z = H @ w2 + b2
    margin = y * z
    loss = np.logaddexp(0.0, -margin).mean() + 0.5 * l2 * (np.sum(W1 * W1) + w2 @ w2)
    g = -y * expit(-margin) / len(y)
    dZ = np.outer(g, w2) * dH
    grad = {
        "W1": dZ.T @ X + l2 * W1,
        "b1": dZ.sum(axis=0),
        "w2": H.T @ g + l2 * w2,
        "b2": g.sum(),
    }
    return float(loss), grad


class ShallowNetworkClassifier(ClassifierMixin, BaseEstimator):
    """One-hidden-layer binary classifier with ``+1/-1`` labels.

    Trained by minibatch SGD on the logistic loss of the output
    pre-activation, with early stopping on a validation split. Predictions
    are ``sgn`` of the pre-activation.

    Parameters
    ----------
    hidden_units : int
    activation : {"relu", "compressed_tanh"}
    c : float
        Slope of the compressed tanh, ``tanh(c * z)``.
    learning_rate, l2, max_epochs, batch_size : training controls.
    patience : int
        Epochs without a new best validation error before stopping.
    validation_fraction : float
        Used when ``fit`` is not given an explicit validation set.
    random_state : int
    """

    def __init__(self, hidden_units=3, activation="relu", c=10000.0, learning_rate=0.01,
                 l2=1e-4, max_epochs=1000, batch_size=20, patience=50,
                 validation_fraction=0.1, random_state=0):
        self.hidden_units = hidden_units
        self.activation = activation
        self.c = c
        self.learning_rate = learning_rate
        self.l2 = l2
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _init_params(self, d: int, rng: np.random.Generator) -> dict:
        h = self.hidden_units
        return {
            "W1": rng.normal(0.0, np.sqrt(1.0 / d), size=(h, d)),
            "b1": np.zeros(h),
            "w2": rng.normal(0.0, np.sqrt(1.0 / h), size=h),
            "b2": 0.0,
        }

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.float64)
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        if self.activation not in ("relu", "compressed_tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be positive")
        rng = rng_for(self.random_state, _RUN)
        if X_val is None:
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            perm = rng.permutation(len(X))
            X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
            X, y = X[perm[n_val:]], y[perm[n_val:]]
        else:
            X_val, y_val = check_X_y(X_val, y_val, dtype=np.float64)
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = X.shape[1]

        params = self._init_params(X.shape[1], rng)
        best = {k: np.copy(v) for k, v in params.items()}
        best_err, since_best = np.inf, 0
        self.loss_curve_, self.validation_curve_ = [], []
        self.diverged_ = False
        lr, bs, act, c = self.learning_rate, self.batch_size, self.activation, self.c
        n = len(X)
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.max_epochs):
                perm = rng.permutation(n)
                for start in range(0, n, bs):
                    idx = perm[start:start + bs]
                    _, grad = loss_and_grad(params, X[idx], y[idx], act, c, self.l2)
                    for k in params:
                        params[k] = params[k] - lr * grad[k]
                loss, _ = loss_and_grad(params, X, y, act, c, self.l2)
                if not np.isfinite(loss) or not all(np.all(np.isfinite(v)) for v in params.values()):
                    self.diverged_ = True
                    break
                self.loss_curve_.append(loss)
                err = float(np.mean(self._decide(params, X_val) != y_val))
                self.validation_curve_.append(err)
                if err < best_err:
                    best_err, since_best = err, 0
                    best = {k: np.copy(v) for k, v in params.items()}
                else:
                    since_best += 1
                    if since_best >= self.patience:
                        break
        self.epochs_run_ = len(self.loss_curve_)
        self.best_validation_error_ = best_err
        self.params_ = best
        return self

    def _decide(self, params, X):
        H, _ = _activate(self.activation, self.c, X @ params["W1"].T + params["b1"])
        return sgn(H @ params["w2"] + params["b2"])

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        p = self.params_
        H, _ = _activate(self.activation, self.c, X @ p["W1"].T + p["b1"])
        return H @ p["w2"] + p["b2"]

    def predict(self, X):
        return sgn(self.decision_function(X)).astype(int)

    def to_network(self) -> GeneralNetwork:
        check_is_fitted(self, "params_")
        p = self.params_
        c = self.c if self.activation == "compressed_tanh" else None
        hidden = Layer(p["W1"], p["b1"], self.activation, c)
        out = Layer(p["w2"].reshape(1, -1), [p["b2"]])
        return GeneralNetwork(self.n_features_in_, (hidden, out))


@dataclass(frozen=True)
class TrainConfig:
    hidden_units: int
    activation: str = "relu"
    c: float = 10000.0
    lr_grid: tuple = DEFAULT_LR_GRID
    l2: float = 1e-4
    max_epochs: int = 1000
    minibatch: int = 20
    early_stop_patience: int = 50
    validation_fraction: float = 0.1
    cv_folds: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be positive")
        if self.activation not in ("relu", "compressed_tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.activation == "compressed_tanh" and not self.c > 0:
            raise ValueError("c must be positive")
        if not self.lr_grid:
            raise ValueError("lr_grid must not be empty")
        if self.cv_folds < 1:
            raise ValueError("cv_folds must be at least 1")

    def estimator(self, lr: float, run: int = 0) -> ShallowNetworkClassifier:
        return ShallowNetworkClassifier(
            hidden_units=self.hidden_units,
            activation=self.activation,
            c=self.c,
            learning_rate=lr,
            l2=self.l2,
            max_epochs=self.max_epochs,
            batch_size=self.minibatch,
            patience=self.early_stop_patience,
            validation_fraction=self.validation_fraction,
            random_state=int(rng_for(self.seed, _RUN, run).integers(2**63)),
        )


@dataclass
class Dataset:
    """Labelled points; the last ``test_size`` rows are the test split."""

    X: np.ndarray
    y: np.ndarray
    test_size: int
    generator: ReluNetwork | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError("X must be 2-D with one label per row")
        if not 0 <= self.test_size < len(self.X):
            raise ValueError("test split must be smaller than the dataset")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_train(self) -> int:
        return len(self.X) - self.test_size

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[:self.n_train], self.y[:self.n_train]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[self.n_train:], self.y[self.n_train:]


@dataclass
class TrainResult:
    network: GeneralNetwork
    train_error: float
    test_error: float
    chosen_lr: float
    epochs_run: int
    loss_curve: list = field(default_factory=list)
    validation_errors: dict = field(default_factory=dict)

    def loss_monotone_fraction(self) -> float:
        """Share of epochs whose training loss did not increase."""
        c = np.asarray(self.loss_curve)
        if len(c) < 2:
            return 1.0
        return float(np.mean(np.diff(c) <= 0))


def generate_network(n: int, d: int, seed: int, min_minority: float = 0.05,
                     probe: int = 10_000, max_retries: int = 100) -> ReluNetwork:
    """Random general-form rectifier net with N(0, 1) parameters.

    Each unit lands in P or N with probability 1/2. Networks whose minority
    class covers less than ``min_minority`` of a standard-normal probe sample
    are redrawn.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = rng_for(seed, _NET)
    for _ in range(max_retries):
        W = rng.normal(size=(n, d))
        b = rng.normal(size=n)
        w0 = rng.normal()
        side = rng.random(n) < 0.5
        units = [AffineUnit(w, c) for w, c in zip(W, b)]
        net = ReluNetwork(
            d,
            tuple(u for u, s in zip(units, side) if s),
            tuple(u for u, s in zip(units, side) if not s),
            w0,
        )
        frac = float(np.mean(net.predict(rng.normal(size=(probe, d))) > 0))
        if min(frac, 1 - frac) >= min_minority:
            return net
    raise GeneratorRetryError(f"no balanced network after {max_retries} draws (n={n}, d={d})")


def generate_dataset(net: ReluNetwork, total: int = 10_000, test: int = 1_500,
                     seed: int = 0) -> Dataset:
    if not 0 <= test < total:
        raise ValueError("need 0 <= test < total")
    X = rng_for(seed, _DATA).normal(size=(total, net.dim))
    return Dataset(X, net.predict(X), test, net)


def _fit_one(args):
    est, X, y, X_val, y_val = args
    return est.fit(X, y, X_val, y_val)


def _map(fn, items):
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _error(est, X, y) -> float:
    return float(np.mean(est.predict(X) != y))


def train(data: Dataset, cfg: TrainConfig) -> TrainResult:
    """Pick the learning rate with the lowest validation error and report errors.

    Runs whose loss goes non-finite are dropped from the grid.
    """
    X, y = data.train
    rng = rng_for(cfg.seed, _SPLIT)
    perm = rng.permutation(len(X))
    if cfg.cv_folds == 1:
        n_val = max(1, int(round(cfg.validation_fraction * len(X))))
        folds = [perm[:n_val]]
    else:
        folds = np.array_split(perm, cfg.cv_folds)
    jobs, keys = [], []
    for i, lr in enumerate(cfg.lr_grid):
        for f, val in enumerate(folds):
            fit_idx = np.setdiff1d(perm, val, assume_unique=True)
            est = cfg.estimator(lr, run=i * len(folds) + f)
            jobs.append((est, X[fit_idx], y[fit_idx], X[val], y[val]))
            keys.append((i, f))
    fitted = _map(_fit_one, jobs)

    scores: dict[float, float] = {}
    models: dict[float, ShallowNetworkClassifier] = {}
    for (i, f), est in zip(keys, fitted):
        lr = cfg.lr_grid[i]
        if est.diverged_:
            log.info("lr=%g diverged after %d epochs", lr, est.epochs_run_)
            scores[lr] = np.nan
        else:
            scores[lr] = scores.get(lr, 0.0) + est.best_validation_error_ / len(folds)
        if f == 0:
            models[lr] = est
    usable = [lr for lr in cfg.lr_grid if lr in models and not np.isnan(scores[lr])]
    if not usable:
        raise TrainingDivergedError("every learning rate in the grid diverged")
    chosen = min(usable, key=lambda lr: scores[lr])
    est = models[chosen]
    X_test, y_test = data.test
    return TrainResult(
        network=est.to_network(),
        train_error=_error(est, X, y),
        test_error=_error(est, X_test, y_test) if len(y_test) else float("nan"),
        chosen_lr=chosen,
        epochs_run=est.epochs_run_,
        loss_curve=list(est.loss_curve_),
        validation_errors={lr: scores[lr] for lr in cfg.lr_grid},
    )


SETTINGS = ("relu_n", "ctanh_n", "ctanh_2n")


def setting_config(setting: str, n: int, base: TrainConfig) -> TrainConfig:
    if setting == "relu_n":
        return replace(base, hidden_units=n, activation="relu")
    if setting == "ctanh_n":
        return replace(base, hidden_units=n, activation="compressed_tanh")
    if setting == "ctanh_2n":
        if 2 ** n > MAX_HIDDEN:
            raise ValueError(f"2^{n} hidden units exceeds the cap of {MAX_HIDDEN}")
        return replace(base, hidden_units=2 ** n, activation="compressed_tanh")
    raise ValueError(f"unknown setting {setting!r}")


@dataclass
class ExperimentRun:
    rows: list
    generators: dict
    datasets: dict


REPORT_FIELDS = ("n", "d", "setting", "hidden_units", "train_error", "test_error",
                 "chosen_lr", "epochs")


def run_experiment(dims, ns, seed: int = 0, total: int = 10_000, test: int = 1_500,
                   base: TrainConfig | None = None, settings=SETTINGS) -> ExperimentRun:
    """Generate one dataset per (n, d) and train every setting on it.

    Rows come out ordered by n, then d, then setting.
    """
    base = base or TrainConfig(hidden_units=1, seed=seed)
    for n in ns:
        if "ctanh_2n" in settings and 2 ** n > MAX_HIDDEN:
            raise ValueError(f"2^{n} hidden units exceeds the cap of {MAX_HIDDEN}")
    rows, generators, datasets = [], {}, {}
    for n in ns:
        for d in dims:
            key = (n, d)
            data_seed = int(rng_for(seed, _DATA, n, d).integers(2**63))
            net = generate_network(n, d, data_seed)
            data = generate_dataset(net, total, test, data_seed)
            generators[key], datasets[key] = net, data
            for j, setting in enumerate(settings):
                run_seed = int(rng_for(seed, _RUN, n, d, j).integers(2**63))
                cfg = replace(setting_config(setting, n, base), seed=run_seed)
                res = train(data, cfg)
                log.info("n=%d d=%d %s: train %.4f test %.4f (lr %g, %d epochs)",
                         n, d, setting, res.train_error, res.test_error,
                         res.chosen_lr, res.epochs_run)
                rows.append({
                    "n": n,
                    "d": d,
                    "setting": setting,
                    "hidden_units": cfg.hidden_units,
                    "train_error": res.train_error,
                    "test_error": res.test_error,
                    "chosen_lr": res.chosen_lr,
                    "epochs": res.epochs_run,
                })
    return ExperimentRun(rows, generators, datasets)
