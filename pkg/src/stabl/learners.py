"""Base learners A(D; xi) and the dataset type they consume.

A learner is a pure function of (dataset, xi) with xi in [0, 1); anything
random inside it is drawn from a stream derived from xi.  Learners declare
``symmetric`` (row order never matters), ``output_range`` (every prediction
lies in [a, b]) and ``randomized`` (predictions depend on xi).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import DomainError, ParseError
from .streams import SeedStream, derive_key, mix64_array, to_unit, uniforms_from_keys


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows (x_i, y_i) in a meaningful order; X has shape (n, d)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DomainError(f"X must be (n, d) and y (n,), got {X.shape} and {y.shape}")
        object.__setattr__(self, "X", np.ascontiguousarray(X))
        object.__setattr__(self, "y", y)

    @classmethod
    def from_rows(cls, rows) -> "Dataset":
        rows = list(rows)
        X = np.array([np.atleast_1d(np.asarray(x, dtype=np.float64)) for x, _ in rows]).reshape(len(rows), -1)
        return cls(X, np.array([y for _, y in rows], dtype=np.float64))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, bag) -> "Dataset":
        bag = np.asarray(bag, dtype=np.int64)
        return Dataset(self.X[bag], self.y[bag])

    def drop(self, i: int) -> "Dataset":
        keep = np.arange(self.n) != i
        return Dataset(self.X[keep], self.y[keep])

    def replace(self, i: int, x, y: float) -> "Dataset":
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.shape != (self.d,):
            raise DomainError(f"replacement covariate has shape {x.shape}, expected ({self.d},)")
        X, Y = self.X.copy(), self.y.copy()
        X[i], Y[i] = x, y
        return Dataset(X, Y)

    def permute(self, perm) -> "Dataset":
        return self.take(perm)


def _as_point(x) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))


class Model:
    """A fitted prediction function."""

    def predict(self, x) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class _FnModel(Model):
    fn: object = field(repr=False)

    def predict(self, x) -> float:
        return float(self.fn(_as_point(x)))


class Learner:
    symmetric: bool = False
    output_range: tuple[float, float] | None = None
    randomized: bool = False

    def fit(self, data: Dataset, xi: float = 0.0) -> Model:
        raise NotImplementedError

    def fit_predict(self, data: Dataset, xi: float, x) -> float:
        return self.fit(data, xi).predict(x)

    def support_values(self, data: Dataset, counts: np.ndarray, x) -> np.ndarray | None:
        """Predictions for every bag class given by index counts, or None if not vectorized.

        Only deterministic symmetric learners implement this; it must agree with
        fitting on ``data.take(bag)`` for any bag with those counts.
        """
        return None

    def spec(self) -> str:
        raise NotImplementedError


# ---------------------------------------------------------------- reference


@dataclass(frozen=True)
class ConstantLearner(Learner):
    value: float = 0.0
    symmetric = True
    randomized = False

    @property
    def output_range(self):
        return (self.value, self.value)

    def fit(self, data, xi=0.0):
        v = float(self.value)
        return _FnModel(lambda x: v)

    def support_values(self, data, counts, x):
        return np.full(counts.shape[0], float(self.value))

    def spec(self):
        return f"constant:{self.value!r}"


@dataclass(frozen=True)
class MemorizerLearner(Learner):
    """Predicts 1 exactly when the query equals (bitwise) some training covariate."""

    symmetric = True
    output_range = (0.0, 1.0)

    def fit(self, data, xi=0.0):
        seen = frozenset(row.tobytes() for row in data.X)
        return _FnModel(lambda x: 1.0 if x.tobytes() in seen else 0.0)

    def support_values(self, data, counts, x):
        key = _as_point(x).tobytes()
        hits = np.array([row.tobytes() == key for row in data.X], dtype=bool)
        return (counts[:, hits] > 0).any(axis=1).astype(np.float64)

    def spec(self):
        return "memorizer"


def _binary_column(data: Dataset) -> np.ndarray:
    if data.d != 1 or not np.all((data.X == 0.0) | (data.X == 1.0)):
        raise DomainError("threshold learner needs scalar covariates in {0, 1}")
    return data.X[:, 0].astype(np.int64)


@dataclass(frozen=True)
class ThresholdLearner(Learner):
    """Predicts 1 iff the bag's covariate sum exceeds m K / n, m the bag length.

    ``n`` and ``K`` are fixed parameters; the comparison is done in integers.
    """

    n: int
    K: int
    symmetric = True
    output_range = (0.0, 1.0)

    def fit(self, data, xi=0.0):
        s = int(_binary_column(data).sum()) if data.n else 0
        value = 1.0 if s * self.n > data.n * self.K else 0.0
        return _FnModel(lambda x: value)

    def support_values(self, data, counts, x):
        col = _binary_column(data)
        sums = counts.astype(np.int64) @ col
        sizes = counts.sum(axis=1, dtype=np.int64)
        return (sums * self.n > sizes * self.K).astype(np.float64)

    def spec(self):
        return f"threshold:{self.K}"


def row_hashes(data: Dataset) -> np.ndarray:
    """64-bit content hash of each (x, y) row."""
    out = np.empty(data.n, dtype=np.uint64)
    for i in range(data.n):
        h = hashlib.blake2b(data.X[i].tobytes() + data.y[i:i + 1].tobytes(), digest_size=8).digest()
        out[i] = int.from_bytes(h, "little")
    return mix64_array(out)


def multiset_keys(hashes: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Order-free key of each bag class: sum of count * row hash, mod 2^64."""
    return (counts.astype(np.uint64) * hashes[None, :]).sum(axis=1, dtype=np.uint64)


@dataclass(frozen=True)
class LookupTableLearner(Learner):
    """Ignores x; predicts a seeded hash of the training multiset, scaled to [low, high].

    A random function of the bag, so a family over seeds probes the
    "any algorithm" quantifier.  Ranges other than [0, 1] give unbounded-style
    test learners for clipping.
    """

    seed: int = 0
    low: float = 0.0
    high: float = 1.0
    symmetric = True

    @property
    def output_range(self):
        return (self.low, self.high)

    @property
    def seedword(self) -> int:
        return derive_key(self.seed, "table")

    def _value(self, keys: np.ndarray) -> np.ndarray:
        u = to_unit(mix64_array(keys ^ np.uint64(self.seedword)))
        return self.low + (self.high - self.low) * u

    def fit(self, data, xi=0.0):
        key = multiset_keys(row_hashes(data), np.ones((1, data.n), dtype=np.int64))
        value = float(self._value(key)[0])
        return _FnModel(lambda x: value)

    def support_values(self, data, counts, x):
        return self._value(multiset_keys(row_hashes(data), counts))

    def spec(self):
        return f"table:{self.seed}"


# ----------------------------------------------------------------- trained


def _check_binary(y: np.ndarray) -> None:
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DomainError("responses must be binary (0 or 1)")


@dataclass(frozen=True)
class _LinearModel(Model):
    theta: np.ndarray

    def predict(self, x) -> float:
        return float(expit(_as_point(x) @ self.theta))


@dataclass(frozen=True)
class LogisticLearner(Learner):
    """L2-regularized logistic regression without intercept.

    Minimizes ``c * sum(logloss) + 0.5 |theta|^2`` by ``iters`` full-gradient
    steps from zero with step 1/(c lambda_max(X^T X)/4 + 1).
    """

    c: float = 1.0
    iters: int = 100
    symmetric = True
    output_range = (0.0, 1.0)

    def fit(self, data, xi=0.0):
        _check_binary(data.y)
        return _LinearModel(kernels.logistic_gd(data.X, data.y, float(self.c), int(self.iters)))

    def spec(self):
        return f"logistic:{self.c!r},{self.iters}"


def logistic_objective(theta, X, y, c) -> float:
    z = X @ theta
    # log(1 + e^z) - y z, stably
    return float(c * np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * theta @ theta)


@dataclass(frozen=True)
class _MLPModel(Model):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float

    def predict(self, x) -> float:
        a = np.maximum(_as_point(x) @ self.W1 + self.b1, 0.0)
        return float(expit(a @ self.W2 + self.b2))


@dataclass(frozen=True)
class MLPLearner(Learner):
    """One hidden ReLU layer, logistic output, log-loss with L2 penalty alpha.

    Trained by mini-batch SGD with Nesterov momentum.  Glorot-uniform
    initialization and the per-epoch shuffles come from the xi stream.
    """

    hidden: int = 40
    lr: float = 0.2
    epochs: int = 8
    alpha: float = 1e-4
    momentum: float = 0.9
    batch: int = 200
    randomized = True
    output_range = (0.0, 1.0)

    def init_params(self, d: int, stream: SeedStream):
        h = self.hidden
        u = stream.child("init").uniforms(d * h + 2 * h + 1)
        b_in = math.sqrt(6.0 / (d + h))
        b_out = math.sqrt(6.0 / (h + 1))
        W1 = (-b_in + 2 * b_in * u[: d * h]).reshape(d, h)
        b1 = -b_in + 2 * b_in * u[d * h: d * h + h]
        W2 = -b_out + 2 * b_out * u[d * h + h: d * h + 2 * h]
        b2 = float(-b_out + 2 * b_out * u[-1])
        return W1, b1, W2, b2

    def shuffles(self, m: int, stream: SeedStream) -> np.ndarray:
        base = stream.child("shuffle")
        keys = np.array([base.child("epoch", e).key for e in range(self.epochs)], dtype=np.uint64)
        if not len(keys) or m == 0:
            return np.zeros((len(keys), m), dtype=np.int64)
        return np.argsort(uniforms_from_keys(keys, m), axis=1, kind="stable")

    def fit(self, data, xi=0.0):
        stream = SeedStream.from_xi(xi)
        params = self.init_params(data.d, stream)
        if self.epochs > 0 and data.n > 0:
            perms = self.shuffles(data.n, stream)
            params = kernels.mlp_train(data.X, data.y, *params, perms, float(self.lr), float(self.alpha),
                                       float(self.momentum), int(min(self.batch, data.n)))
        return _MLPModel(*params)

    def spec(self):
        return f"mlp:{self.hidden},{self.lr!r},{self.epochs}"


@dataclass(frozen=True)
class _TreeModel(Model):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x) -> float:
        x = _as_point(x)
        node = 0
        while self.left[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return float(self.value[node])

    @property
    def node_count(self) -> int:
        return len(self.value)


@dataclass(frozen=True)
class TreeLearner(Learner):
    """CART regression tree: greedy variance-reduction splits at midpoints, leaf means.

    Ties between equally good splits go to the lowest feature, then the
    lowest threshold.
    """

    max_depth: int = 50
    symmetric = True

    def fit(self, data, xi=0.0):
        if data.n == 0:
            raise DomainError("cannot fit a tree on an empty dataset")
        return _TreeModel(*kernels.tree_build(data.X, data.y, int(self.max_depth)))

    def spec(self):
        return f"tree:{self.max_depth}"


def parse_learner(spec: str, n: int | None = None) -> Learner:
    """Build a learner from ``memorizer``, ``threshold:K``, ``table:seed``,
    ``logistic:c,iters``, ``mlp:h,lr,epochs``, ``tree:depth`` or ``constant:v``.

    ``n`` (the dataset size) is needed by ``threshold`` and is the default
    scale for ``logistic`` (c = 1000/n when c is omitted).
    """
    name, _, args = spec.partition(":")
    parts = [a.strip() for a in args.split(",")] if args else []

    def num(i, cast, default=None):
        if i < len(parts) and parts[i] != "":
            try:
                return cast(parts[i])
            except ValueError:
                raise ParseError(f"learner spec {spec!r}: bad argument {parts[i]!r}") from None
        if default is None:
            raise ParseError(f"learner spec {spec!r}: missing argument {i + 1}")
        return default

    if name == "memorizer":
        return MemorizerLearner()
    if name == "threshold":
        if n is None:
            raise ParseError("threshold learner needs the dataset size n")
        return ThresholdLearner(n, num(0, int))
    if name == "table":
        return LookupTableLearner(num(0, int, 0))
    if name == "logistic":
        default_c = 1000.0 / n if n else 1.0
        return LogisticLearner(num(0, float, default_c), num(1, int, 100))
    if name == "mlp":
        return MLPLearner(num(0, int, 40), num(1, float, 0.2), num(2, int, 8))
    if name == "tree":
        return TreeLearner(num(0, int, 50))
    if name == "constant":
        return ConstantLearner(num(0, float))
    raise ParseError(f"unknown learner {name!r}")
