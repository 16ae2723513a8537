"""Closed-form stability bounds for bagging and their tightness.

The central quantity is the threshold

    c = (1 / (4n)) * (p / (1 - p) + q / (1 - p)^2),

and derandomized bagging of any [0, 1]-valued learner is (eps, delta)-stable
whenever delta * eps^2 >= c.  The lower-bound side comes from a threshold
voter on a 0/1 dataset whose leave-one-out gap is hypergeometric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, HypothesisViolatedError
from .resampling import ResamplingScheme

DEFAULT_GRID = (1e-3, 0.499, 200)


@dataclass(frozen=True)
class BoundParams:
    n: int
    p: float
    q: float = 0.0
    m: int | None = None
    B: float | None = None
    L: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p!r}")
        if not self.q >= 0.0:
            raise DomainError(f"q must be non-negative, got {self.q!r}")
        cap = self.p * (1 - self.p) / (self.n - 1)
        if self.q > cap * (1 + 1e-12) + 1e-15:
            raise DomainError(f"q = {self.q!r} exceeds p(1-p)/(n-1) = {cap!r}")
        if self.B is not None and not self.B >= 1:
            raise DomainError(f"B must be >= 1, got {self.B!r}")

    @classmethod
    def from_scheme(cls, scheme: ResamplingScheme, **extra) -> "BoundParams":
        return cls(scheme.n, scheme.p, scheme.q, **extra)


def subbag_params(n: int, m: int, **extra) -> BoundParams:
    return BoundParams.from_scheme(ResamplingScheme.subbag(n, m), m=m, **extra)


def stability_threshold(params: BoundParams) -> float:
    n, p, q = params.n, params.p, params.q
    return (p / (1 - p) + q / (1 - p) ** 2) / (4 * n)


def guaranteed_delta(params: BoundParams, eps: float) -> float:
    """c / eps^2 (values above 1 are vacuous)."""
    if not eps > 0:
        raise DomainError(f"epsilon must be positive, got {eps!r}")
    return stability_threshold(params) / eps**2


def guaranteed_epsilon(params: BoundParams, delta: float) -> float:
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return math.sqrt(stability_threshold(params) / delta)


def finite_b_inflation(B: float, dprime: float) -> float:
    """sqrt((2/B) ln(4/dprime)): the epsilon added by using B bags instead of infinitely many."""
    if not 0.0 < dprime < 1.0:
        raise DomainError(f"dprime must lie in (0, 1), got {dprime!r}")
    if not B >= 1:
        raise DomainError(f"B must be >= 1, got {B!r}")
    if math.isinf(B):
        return 0.0
    return math.sqrt(2.0 / B * math.log(4.0 / dprime))


def finite_b_delta(params: BoundParams, eps: float, B: float, dprime: float) -> float:
    """Smallest delta certified at eps for B bags: c / (eps - t)^2 + dprime, or 1 when eps <= t."""
    t = finite_b_inflation(B, dprime)
    if eps <= t:
        return 1.0
    return min(1.0, stability_threshold(params) / (eps - t) ** 2 + dprime)


def _log_comb(a: int, b: int) -> float:
    return gammaln(a + 1.0) - gammaln(b + 1.0) - gammaln(a - b + 1.0)


def hypergeometric_pmf(N: int, K: int, m: int, h: int) -> float:
    """P{H = h} for H ~ HyperGeometric(population N, successes K, draws m)."""
    for name, v in (("N", N), ("K", K), ("m", m), ("h", h)):
        if int(v) != v:
            raise DomainError(f"{name} must be an integer, got {v!r}")
    N, K, m, h = int(N), int(K), int(m), int(h)
    if N < 0 or not 0 <= K <= N or not 0 <= m <= N:
        raise DomainError(f"need 0 <= K <= N and 0 <= m <= N, got N={N}, K={K}, m={m}")
    if h < max(0, m - (N - K)) or h > min(K, m):
        return 0.0
    return float(np.exp(_log_comb(K, h) + _log_comb(N - K, m - h) - _log_comb(N, m)))


def _floor_n_delta(n: int, delta: float) -> int:
    # delta is read as the decimal the user wrote (0.3 means 3/10), then floored exactly
    return math.floor(n * Fraction(repr(float(delta))))


def _check_tightness_args(n: int, m: int, delta: float) -> None:
    if int(n) != n or int(m) != m or not 1 <= m < n:
        raise DomainError(f"need integers 1 <= m < n, got n={n!r}, m={m!r}")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta!r}")


def lower_bound_epsilon(n: int, m: int, delta: float) -> float:
    """Subbagging is not (eps, delta)-stable for any eps below this value.

    (1 - delta - 1/n) * p * P{H = floor(p (1 + floor(n delta)))}, H ~ HG(n - 1, floor(n delta), m), p = m/n.
    """
    _check_tightness_args(n, m, delta)
    k0 = _floor_n_delta(n, delta)
    h = (m * (1 + k0)) // n
    return (1.0 - delta - 1.0 / n) * (m / n) * hypergeometric_pmf(n - 1, k0, m, h)


def sharp_gap_closed_form(n: int, m: int, delta: float) -> float:
    """Exact leave-one-out gap of the subbagged threshold voter at each of its K = 1 + floor(n delta) ones.

    ((m - floor(mK/n)) / n) * P{H = floor(mK/n)}, H ~ HG(n - 1, K - 1, m).
    """
    _check_tightness_args(n, m, delta)
    K = 1 + _floor_n_delta(n, delta)
    h = (m * K) // n
    return (m - h) / n * hypergeometric_pmf(n - 1, K - 1, m, h)


def tightness_report(n: int, m: int, delta: float) -> dict:
    """Both sides of the tightness argument plus the integers they use."""
    k0 = _floor_n_delta(n, delta)
    return {"n": n, "m": m, "delta": delta, "floor_n_delta": k0, "K": 1 + k0, "h": (m * (1 + k0)) // n,
            "n_delta_is_integer": n * Fraction(repr(float(delta))) == k0,
            "lower_bound_epsilon": lower_bound_epsilon(n, m, delta),
            "sharp_gap": sharp_gap_closed_form(n, m, delta),
            "instability_fraction": (1 + k0) / n}


def stirling_approximation(n: int, p: float, delta: float) -> float:
    """(1/sqrt(2 pi n)) * sqrt(((1 - delta)/delta) * (p/(1 - p)))."""
    return math.sqrt((1 - delta) / delta * p / (1 - p)) / math.sqrt(2 * math.pi * n)


def expectation_beta(params: BoundParams, B: float | None = None) -> float:
    """sqrt(c) + sqrt(2 pi / B); B = None or inf drops the Monte Carlo term."""
    B = params.B if B is None else B
    beta = math.sqrt(stability_threshold(params))
    if B is not None and not math.isinf(B):
        if not B >= 1:
            raise DomainError(f"B must be >= 1, got {B!r}")
        beta += math.sqrt(2 * math.pi / B)
    return beta


def lipschitz_level(params: BoundParams, B: float | None = None) -> float:
    """Hypothesis-stability level for an L-Lipschitz loss: L * beta."""
    return params.L * expectation_beta(params, B)


def replace_one_level(params: BoundParams, B: float | None = None) -> float:
    """Replace-one hypothesis-stability level: 2 L * beta."""
    return 2 * params.L * expectation_beta(params, B)


def lk_bound(params: BoundParams, k: float) -> float:
    """C^(2/max(k,2)) * p^(1 - 2/max(k,2)) with C = min(sqrt(c), p); k = inf gives p."""
    if not k > 0:
        raise DomainError(f"norm order must be positive, got {k!r}")
    p = params.p
    C = min(math.sqrt(stability_threshold(params)), p)
    if C > p:
        raise HypothesisViolatedError(f"C = {C!r} exceeds p = {p!r}")
    if math.isinf(k):
        return p
    e = 2.0 / max(k, 2.0)
    return C**e * p ** (1.0 - e)


@dataclass(frozen=True)
class TheoryCurve:
    kind: str  # "guarantee" or "tightness"
    delta: np.ndarray
    epsilon: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.delta.tolist(), self.epsilon.tolist()))


def default_grid(lo: float = DEFAULT_GRID[0], hi: float = DEFAULT_GRID[1], points: int = DEFAULT_GRID[2]) -> np.ndarray:
    return np.geomspace(lo, hi, points)


def phase_diagram(n: int, m: int, grid=None) -> tuple[TheoryCurve, TheoryCurve]:
    """Guarantee boundary sqrt(c/delta) and tightness boundary for subbagging m of n."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) == 0:
        raise DomainError("delta grid must be a non-empty 1-d sequence")
    if np.any(grid <= 0) or np.any(grid >= 0.5):
        raise DomainError("delta grid must lie inside (0, 1/2)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("delta grid must be strictly increasing")
    params = subbag_params(n, m)
    c = stability_threshold(params)
    guarantee = np.sqrt(c / grid)
    tight = np.array([lower_bound_epsilon(n, m, float(d)) for d in grid])
    return TheoryCurve("guarantee", grid, guarantee), TheoryCurve("tightness", grid, tight)
