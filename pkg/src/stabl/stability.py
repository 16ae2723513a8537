"""Leave-one-out stability profiles and their summaries.

A profile holds L_i = |f(x) - f^{-i}(x)| for every training row i at one
test point.  delta_of_epsilon counts the fraction of rows with L_i > eps
(strict) or L_i >= eps (non-strict, the convention used for theory checks).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bagging import BaggedPredictor, Exact, TrimmedRange
from .errors import DomainError
from .learners import Dataset

DEFAULT_DPRIME = 0.05


def hoeffding_halfwidth(B: int, dprime: float = DEFAULT_DPRIME) -> float:
    """sqrt(ln(4/dprime) / (2B)): deviation bound for one B-bag average of [0,1] predictions."""
    if not 0.0 < dprime < 1.0:
        raise DomainError(f"dprime must lie in (0, 1), got {dprime!r}")
    return math.sqrt(math.log(4.0 / dprime) / (2.0 * B))


@dataclass(frozen=True)
class StabilityProfile:
    perturbations: np.ndarray
    n: int
    scheme: dict | None = None
    mode: dict | None = None
    point: list | None = None
    prediction: float | None = None
    loo: np.ndarray | None = field(default=None, repr=False)
    hoeffding_halfwidth: float | None = None

    def __post_init__(self):
        L = np.asarray(self.perturbations, dtype=np.float64)
        if L.shape != (self.n,):
            raise DomainError(f"profile needs {self.n} perturbations, got shape {L.shape}")
        if np.any(~(L >= 0)):
            raise DomainError("perturbations must be non-negative numbers")
        object.__setattr__(self, "perturbations", L)

    @classmethod
    def from_values(cls, values) -> "StabilityProfile":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, len(values))

    def to_dict(self, ks=(1, 2, math.inf), strict: bool = True) -> dict:
        worst, mean, _ = summaries(self, 1)
        out = {"n": self.n, "scheme": self.scheme, "mode": self.mode, "strict_flag": strict,
               "perturbations": self.perturbations.tolist(), "worst": worst, "mean": mean,
               "lk": {_k_label(k): summaries(self, k)[2] for k in ks}}
        if self.point is not None:
            out["x"] = list(self.point)
        if self.prediction is not None:
            out["prediction"] = self.prediction
        if self.hoeffding_halfwidth is not None:
            out["hoeffding_halfwidth"] = self.hoeffding_halfwidth
        return out


def _k_label(k) -> str:
    return "inf" if math.isinf(k) else repr(float(k)).rstrip("0").rstrip(".")


def audit(pred: BaggedPredictor, data: Dataset, x, dprime: float = DEFAULT_DPRIME) -> StabilityProfile:
    """Leave-one-out profile of ``pred`` at x (exact conditional averaging or n Monte Carlo re-runs)."""
    if data.n < 2:
        raise DomainError("a stability audit needs at least two rows")
    if isinstance(pred.mode, Exact):
        if pred.scheme.degenerate:
            pred.loo_predictions_exact(data, x)  # raises the degenerate-scheme error
        f, loo, _ = pred.exact_with_loo(data, x)
        half = None
    else:
        f = pred.predict_finite(data, x)
        loo = pred.loo_predictions_finite(data, x)
        half = hoeffding_halfwidth(pred.mode.B, dprime)
    point = np.atleast_1d(np.asarray(x, dtype=np.float64)).tolist()
    return StabilityProfile(np.abs(f - loo), data.n, pred.scheme.to_dict(), pred.describe()["mode"], point,
                            float(f), np.asarray(loo), half)


def base_audit(learner, data: Dataset, x, xi: float = 0.0) -> StabilityProfile:
    """Profile of the base learner itself (one fit on D, one on each D without row i, same xi)."""
    if data.n < 2:
        raise DomainError("a stability audit needs at least two rows")
    f = learner.fit_predict(data, xi, x)
    loo = np.array([learner.fit_predict(data.drop(i), xi, x) for i in range(data.n)])
    point = np.atleast_1d(np.asarray(x, dtype=np.float64)).tolist()
    return StabilityProfile(np.abs(f - loo), data.n, None, {"kind": "base", "xi": xi}, point, float(f), loo)


def delta_of_epsilon(profile: StabilityProfile, eps: float, strict: bool = True) -> float:
    if eps < 0:
        raise DomainError(f"epsilon must be non-negative, got {eps!r}")
    L = profile.perturbations
    hits = L > eps if strict else L >= eps
    return int(np.count_nonzero(hits)) / profile.n


@dataclass(frozen=True)
class Breakpoint:
    """At ``epsilon`` the smallest valid delta drops from ``delta_at`` (rows with L >= eps) to
    ``delta_after`` (rows with L > eps)."""

    epsilon: float
    delta_at: float
    delta_after: float


def epsilon_curve(profile: StabilityProfile) -> list[Breakpoint]:
    """The full delta(eps) step function: one breakpoint per distinct perturbation, ascending eps."""
    L = np.sort(profile.perturbations)
    n = profile.n
    values, first = np.unique(L, return_index=True)
    last = np.searchsorted(L, values, side="right")
    return [Breakpoint(float(v), (n - int(f)) / n, (n - int(l)) / n) for v, f, l in zip(values, first, last)]


def curve_points(profile: StabilityProfile, strict: bool = True) -> list[tuple[float, float]]:
    """(eps, delta(eps)) at each breakpoint under the chosen convention."""
    return [(bp.epsilon, bp.delta_after if strict else bp.delta_at) for bp in epsilon_curve(profile)]


def sup_eps2_delta(profile: StabilityProfile) -> float:
    """sup over eps > 0 of eps^2 * delta_nonstrict(eps), attained at a breakpoint."""
    best = 0.0
    for bp in epsilon_curve(profile):
        if bp.epsilon > 0:
            best = max(best, bp.epsilon**2 * bp.delta_at)
    return best


def lk_norm(L, k: float) -> float:
    if not k > 0:
        raise DomainError(f"norm order must be positive, got {k!r}")
    L = np.asarray(L, dtype=np.float64)
    if math.isinf(k):
        return float(L.max())
    if L.max() == 0.0:
        return 0.0
    scale = L.max()
    return float(scale * np.mean((L / scale) ** k) ** (1.0 / k))


def summaries(profile: StabilityProfile, k: float) -> tuple[float, float, float]:
    """(max_i L_i, mean_i L_i, ((1/n) sum L_i^k)^(1/k)); k = inf gives the max."""
    if not k > 0:
        raise DomainError(f"norm order must be positive, got {k!r}")
    L = profile.perturbations
    return float(L.max()), math.fsum(L) / profile.n, lk_norm(L, k)


def replace_one_audit(pred: BaggedPredictor, data: Dataset, replacements, x) -> StabilityProfile:
    """|f(x) - f^{(i)}(x)| where row i is replaced by ``replacements[i]`` = (x_i', y_i'), same scheme."""
    replacements = list(replacements)
    if len(replacements) != data.n:
        raise DomainError(f"need {data.n} replacement rows, got {len(replacements)}")
    f = pred.predict(data, x)
    out = np.empty(data.n)
    for i, (xr, yr) in enumerate(replacements):
        out[i] = abs(f - pred.predict(data.replace(i, xr, yr), x))
    point = np.atleast_1d(np.asarray(x, dtype=np.float64)).tolist()
    return StabilityProfile(out, data.n, pred.scheme.to_dict(), pred.describe()["mode"], point, float(f))


def interval_instability(data: Dataset, rule: TrimmedRange) -> float:
    """Fraction of rows whose removal changes I(D)."""
    if data.n < 2:
        raise DomainError("interval instability needs at least two rows")
    full = rule.interval(data.y)
    changed = sum(rule.interval(np.delete(data.y, i)) != full for i in range(data.n))
    return changed / data.n


def clipped_certificate_fraction(profile: StabilityProfile, data: Dataset, rule: TrimmedRange, eps: float) -> float:
    """Fraction of all n rows with I(D without i) == I(D) and L_i > eps * length(I(D))."""
    lo, hi = rule.interval(data.y)
    same = np.array([rule.interval(np.delete(data.y, i)) == (lo, hi) for i in range(data.n)])
    return int(np.count_nonzero(same & (profile.perturbations > eps * (hi - lo)))) / data.n
