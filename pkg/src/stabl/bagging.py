"""Bagging engines: Monte Carlo, exact (derandomized), and adaptively clipped.

Exact mode averages the base learner over the enumerated bag law.  Leave-one-out
predictions then come for free: the bagged prediction on D without row i,
under the drop-one law, is the average over the bags of the full law that
avoid i, renormalized.  Monte Carlo mode draws bag b of run ``sid`` (0 for the
full dataset, i + 1 for the dataset without row i) from the stream keyed by
``(seed, "bag", b, sid)`` and its xi from ``(seed, "xi", b, sid)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, DegenerateSchemeError, DomainError, FitError, ParseError, StablError
from .learners import Dataset, Learner, LookupTableLearner, multiset_keys, row_hashes
from .resampling import DEFAULT_LIMIT, ResamplingScheme, Support, drop_one_scheme, enumerate_support, sample_bags
from .streams import derive_keys, uniforms_from_keys

DEFAULT_QUADRATURE = 64


# ------------------------------------------------------------------- modes


@dataclass(frozen=True)
class MonteCarlo:
    B: int
    seed: int = 0

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ConfigurationError(f"Monte Carlo mode needs B >= 1, got {self.B!r}")

    def to_dict(self) -> dict:
        return {"kind": "mc", "B": self.B, "seed": self.seed}


@dataclass(frozen=True)
class Exact:
    limit: int = DEFAULT_LIMIT
    quadrature: int = DEFAULT_QUADRATURE

    def __post_init__(self):
        if self.limit < 1 or self.quadrature < 1:
            raise ConfigurationError("exact mode needs limit >= 1 and quadrature >= 1")

    def nodes(self) -> np.ndarray:
        """Midpoint nodes for the xi average of randomized learners."""
        return (np.arange(self.quadrature) + 0.5) / self.quadrature

    def to_dict(self) -> dict:
        return {"kind": "exact", "limit": self.limit, "quadrature": self.quadrature}


def _kv(spec: str, body: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"mode spec {spec!r}: expected key=value, got {item!r}")
        try:
            out[key.strip()] = int(value)
        except ValueError:
            raise ParseError(f"mode spec {spec!r}: {key} must be an integer") from None
    return out


def parse_mode(spec: str) -> MonteCarlo | Exact:
    """``mc:B=10000,seed=S`` or ``exact:limit=1000000[,quadrature=64]``."""
    kind, _, body = spec.partition(":")
    args = _kv(spec, body)
    allowed = {"mc": {"B", "seed"}, "exact": {"limit", "quadrature"}}
    if kind not in allowed:
        raise ParseError(f"unknown mode {kind!r}; expected mc or exact")
    unknown = set(args) - allowed[kind]
    if unknown:
        raise ParseError(f"mode spec {spec!r}: unknown keys {sorted(unknown)}")
    if kind == "mc":
        if "B" not in args:
            raise ParseError(f"mode spec {spec!r}: mc mode needs B=")
        return MonteCarlo(args["B"], args.get("seed", 0))
    return Exact(args.get("limit", DEFAULT_LIMIT), args.get("quadrature", DEFAULT_QUADRATURE))


# ---------------------------------------------------------------- clipping


@dataclass(frozen=True)
class TrimmedRange:
    """I(D) = [Y_(k), Y_(n+1-k)] from the order statistics of the responses; k = 1 is the full range."""

    k: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"trim level k must be a positive integer, got {self.k!r}")

    def interval(self, y) -> tuple[float, float]:
        y = np.sort(np.asarray(y, dtype=np.float64))
        n = len(y)
        if n == 0:
            raise DomainError("interval of an empty dataset is undefined")
        if not self.k < n / 2 and self.k > 1:
            raise DomainError(f"trimmed range needs k < n/2, got k={self.k}, n={n}")
        return float(y[self.k - 1]), float(y[n - self.k])

    def describe(self) -> str:
        return "range" if self.k == 1 else f"trim:{self.k}"


class EmpiricalRange(TrimmedRange):
    """I(D) = [min Y, max Y]."""

    def __init__(self):
        super().__init__(1)

    def __repr__(self):
        return "EmpiricalRange()"


IntervalMap = TrimmedRange


def parse_clip(spec: str) -> TrimmedRange:
    if spec == "range":
        return EmpiricalRange()
    kind, _, k = spec.partition(":")
    if kind == "trim":
        try:
            return TrimmedRange(int(k))
        except ValueError:
            pass
    raise ParseError(f"clip spec {spec!r} must be 'range' or 'trim:k'")


def clip(values, interval: tuple[float, float]):
    lo, hi = interval
    return np.minimum(np.maximum(values, lo), hi)


# ----------------------------------------------------------------- results


@dataclass(frozen=True)
class BagVariance:
    variance: float
    r_star: float
    range: float


@dataclass(frozen=True)
class ExactEvaluation:
    """Per-class (xi-averaged, unclipped) predictions over an enumerated support."""

    support: Support
    values: np.ndarray


# --------------------------------------------------------------- predictor


def _fsum_mean(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class BaggedPredictor:
    learner: Learner
    scheme: ResamplingScheme
    mode: MonteCarlo | Exact
    clip: TrimmedRange | None = None

    def _check(self, data: Dataset) -> None:
        if data.n != self.scheme.n:
            raise ConfigurationError(f"scheme is for n={self.scheme.n} but the dataset has {data.n} rows")

    def describe(self) -> dict:
        out = {"learner": self.learner.spec(), "scheme": self.scheme.to_dict(), "mode": self.mode.to_dict(),
               "clip": None if self.clip is None else self.clip.describe()}
        if self.clip is not None:
            out["clip_applied_to"] = "xi-averaged per-bag prediction" if isinstance(self.mode, Exact) \
                else "realized per-bag prediction"
        if isinstance(self.mode, Exact) and not self.learner.randomized:
            out["mode"]["quadrature"] = None
        return out

    # ------------------------------------------------------ Monte Carlo

    def bag_predictions(self, data: Dataset, x, scheme: ResamplingScheme | None = None, sid: int = 0) -> np.ndarray:
        """The B realized per-bag predictions of Monte Carlo run ``sid``."""
        if not isinstance(self.mode, MonteCarlo):
            raise ConfigurationError("bag_predictions needs Monte Carlo mode")
        scheme = scheme or self.scheme
        b = np.arange(self.mode.B)
        bags = sample_bags(scheme, derive_keys(self.mode.seed, "bag", b, sid))
        xis = uniforms_from_keys(derive_keys(self.mode.seed, "xi", b, sid), 1)[:, 0] if self.learner.randomized \
            else np.zeros(self.mode.B)
        out = np.empty(self.mode.B)
        for k, (bag, xi) in enumerate(zip(bags, xis)):
            try:
                out[k] = self.learner.fit_predict(data.take(bag), float(xi), x)
            except StablError:
                raise
            except Exception as exc:
                raise FitError(k, exc) from exc
        return out

    def _finite(self, data: Dataset, x, scheme: ResamplingScheme, sid: int) -> float:
        values = self.bag_predictions(data, x, scheme, sid)
        if self.clip is None:
            return _fsum_mean(values)
        interval = self.clip.interval(data.y)
        # the outer clip only absorbs rounding in the average
        return float(clip(_fsum_mean(clip(values, interval)), interval))

    def predict_finite(self, data: Dataset, x) -> float:
        self._check(data)
        return self._finite(data, x, self.scheme, 0)

    def loo_predictions_finite(self, data: Dataset, x) -> np.ndarray:
        """Bagged predictions on each D without row i, each from an independent stream."""
        self._check(data)
        reduced = drop_one_scheme(self.scheme)
        return np.array([self._finite(data.drop(i), x, reduced, i + 1) for i in range(data.n)])

    # ------------------------------------------------------------ exact

    def evaluate_support(self, data: Dataset, x, scheme: ResamplingScheme | None = None) -> ExactEvaluation:
        if not isinstance(self.mode, Exact):
            raise ConfigurationError("exact evaluation needs Exact mode")
        scheme = scheme or self.scheme
        support = enumerate_support(scheme, collapse_symmetric=self.learner.symmetric, limit=self.mode.limit)
        values = None if self.learner.randomized else self.learner.support_values(data, support.counts, x)
        if values is None:
            nodes = self.mode.nodes() if self.learner.randomized else np.zeros(1)
            values = np.empty(len(support))
            for c in range(len(support)):
                sub = data.take(support.bag(c))
                try:
                    preds = [self.learner.fit_predict(sub, float(xi), x) for xi in nodes]
                except StablError:
                    raise
                except Exception as exc:
                    raise FitError(c, exc) from exc
                values[c] = math.fsum(preds) / len(preds)
        return ExactEvaluation(support, np.asarray(values, dtype=np.float64))

    def _clipped_values(self, ev: ExactEvaluation, data: Dataset) -> np.ndarray:
        return ev.values if self.clip is None else clip(ev.values, self.clip.interval(data.y))

    def predict_exact(self, data: Dataset, x) -> float:
        self._check(data)
        ev = self.evaluate_support(data, x)
        total, _, _ = kernels.conditional_means(self._clipped_values(ev, data)[None, :], ev.support.probs,
                                                np.zeros((len(ev.support), 0), dtype=np.uint8))
        if self.clip is not None:
            return float(clip(total[0], self.clip.interval(data.y)))
        return float(total[0])

    def exact_with_loo(self, data: Dataset, x) -> tuple[float, np.ndarray, np.ndarray]:
        """(f, loo, absent_mass) in one pass over the support; loo[i] conditions on i not in the bag."""
        self._check(data)
        ev = self.evaluate_support(data, x)
        absent = ev.support.absent
        if self.clip is None:
            total, loo, mass = kernels.conditional_means(ev.values[None, :], ev.support.probs, absent)
            total, loo = float(total[0]), loo[0]
        else:
            full = self.clip.interval(data.y)
            total, _, mass = kernels.conditional_means(clip(ev.values, full)[None, :], ev.support.probs, absent)
            total = float(clip(total[0], full))
            loo = np.empty(data.n)
            groups: dict[tuple[float, float], list[int]] = {}
            for i in range(data.n):
                groups.setdefault(self.clip.interval(np.delete(data.y, i)), []).append(i)
            for interval, members in groups.items():
                _, part, _ = kernels.conditional_means(clip(ev.values, interval)[None, :], ev.support.probs, absent)
                loo[members] = clip(part[0, members], interval)
        if np.any(mass <= 0):
            raise DegenerateSchemeError(f"{self.scheme.describe()}: some index is in every bag (p = 1)")
        return total, loo, mass

    def loo_predictions_exact(self, data: Dataset, x) -> np.ndarray:
        if self.scheme.degenerate:
            raise DegenerateSchemeError(f"{self.scheme.describe()}: every bag contains every index (p = 1)")
        return self.exact_with_loo(data, x)[1]

    def inclusion_conditioned_exact(self, data: Dataset, x) -> np.ndarray:
        """For each i, the average over bags that contain i."""
        self._check(data)
        ev = self.evaluate_support(data, x)
        present = (ev.support.counts > 0).astype(np.uint8)
        _, cond, _ = kernels.conditional_means(self._clipped_values(ev, data)[None, :], ev.support.probs, present)
        return cond[0]

    def bag_variance_exact(self, data: Dataset, x) -> BagVariance:
        self._check(data)
        ev = self.evaluate_support(data, x)
        w, v = ev.support.probs, ev.values
        live = v[w > 0]
        # shift by a support value so constant predictions give exactly zero
        shift = v - live[0]
        total = math.fsum(w)
        centre = math.fsum(w * shift) / total
        variance = math.fsum(w * (shift - centre) ** 2) / total
        spread = float(live.max() - live.min())
        r_star = 2.0 * math.sqrt(variance)
        assert r_star <= spread + 1e-12 * max(1.0, spread), "R* exceeds the range of bag predictions"
        return BagVariance(variance, r_star, spread)

    # --------------------------------------------------------- dispatch

    def predict(self, data: Dataset, x) -> float:
        if isinstance(self.mode, Exact):
            return self.predict_exact(data, x)
        return self.predict_finite(data, x)

    def predict_clipped(self, data: Dataset, x) -> float:
        if self.clip is None:
            raise ConfigurationError("predict_clipped needs a clip rule")
        return self.predict(data, x)

    def loo_predictions(self, data: Dataset, x) -> np.ndarray:
        if isinstance(self.mode, Exact):
            return self.loo_predictions_exact(data, x)
        return self.loo_predictions_finite(data, x)


def table_family_exact(seeds, data: Dataset, scheme: ResamplingScheme, low: float = 0.0, high: float = 1.0,
                       limit: int = DEFAULT_LIMIT) -> tuple[np.ndarray, np.ndarray, Support]:
    """Exact bagged predictions and LOO predictions for many lookup-table learners at once.

    Returns ``(f, loo, support)`` with f of shape (L,) and loo of shape (L, n).
    """
    support = enumerate_support(scheme, collapse_symmetric=True, limit=limit)
    keys = multiset_keys(row_hashes(data), support.counts)
    words = np.array([LookupTableLearner(int(s), low, high).seedword for s in seeds], dtype=np.uint64)
    total, loo, _ = kernels.table_conditional_means(keys, words, support.probs, support.absent, low, high)
    return total, loo, support
