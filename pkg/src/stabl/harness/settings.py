"""Synthetic data for the four simulation settings, generated by inverse CDF from seed streams."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from ..bagging import MonteCarlo, parse_mode
from ..errors import ConfigurationError
from ..learners import Dataset, Learner, LogisticLearner, MLPLearner, TreeLearner, parse_learner
from ..resampling import ResamplingScheme, parse_scheme
from ..streams import SeedStream

THETA_STAR = 0.1
DESK = {1: (200, 50), 2: (400, 50), 3: (200, 50), 4: (200, 50)}
FULL = {1: (500, 200), 2: (1000, 200), 3: (500, 200), 4: (500, 40)}
DESK_B, FULL_B = 1000, 10000


@dataclass(frozen=True)
class ExperimentConfig:
    setting: int
    n: int
    d: int
    m: int
    B: int
    seed: int = 0
    paper_scale: bool = False
    learner_spec: str | None = None  # overrides the setting's learner
    scheme_spec: str | None = None  # overrides subbag:m
    mode_spec: str | None = None  # overrides mc:B=B,seed=seed

    def __post_init__(self):
        if self.setting not in DESK:
            raise ConfigurationError(f"setting must be one of 1-4, got {self.setting!r}")
        if self.n < 2 or self.d < 1:
            raise ConfigurationError(f"need n >= 2 and d >= 1, got n={self.n}, d={self.d}")
        if not 1 <= self.m <= self.n - 1:
            raise ConfigurationError(f"need 1 <= m <= n - 1, got m={self.m}, n={self.n}")
        if self.B < 1:
            raise ConfigurationError(f"need B >= 1, got {self.B}")
        # fail before any sampling if an override does not parse
        self.learner, self.scheme, self.mode

    @classmethod
    def make(cls, setting: int, n=None, d=None, m=None, B=None, seed: int = 0, paper_scale: bool = False,
             learner: str | None = None, scheme: str | None = None, mode: str | None = None):
        if setting not in DESK:
            raise ConfigurationError(f"setting must be one of 1-4, got {setting!r}")
        n0, d0 = (FULL if paper_scale else DESK)[setting]
        n = n0 if n is None else n
        d = d0 if d is None else d
        return cls(setting, n, d, n // 2 if m is None else m, (FULL_B if paper_scale else DESK_B) if B is None else B,
                   seed, paper_scale, learner, scheme, mode)

    @property
    def custom(self) -> bool:
        return any(v is not None for v in (self.learner_spec, self.scheme_spec, self.mode_spec))

    @property
    def learner(self) -> Learner:
        if self.learner_spec is not None:
            return parse_learner(self.learner_spec, self.n)
        if self.setting in (1, 2):
            return LogisticLearner(c=1000.0 / self.n, iters=100)
        if self.setting == 3:
            return MLPLearner(hidden=40, lr=0.2, epochs=8, alpha=1e-4)
        return TreeLearner(max_depth=50)

    @property
    def scheme(self) -> ResamplingScheme:
        return parse_scheme(self.scheme_spec or f"subbag:{self.m}", self.n)

    @property
    def mode(self):
        return MonteCarlo(self.B, self.seed) if self.mode_spec is None else parse_mode(self.mode_spec)

    @property
    def bounded(self) -> bool:
        """Settings 1-3 predict probabilities; setting 4 regresses on unbounded responses."""
        if self.learner_spec is not None:
            return self.learner.output_range is not None
        return self.setting != 4

    def to_dict(self) -> dict:
        return {"setting": self.setting, "custom": self.custom, "n": self.n, "d": self.d, "m": self.m, "B": self.B,
                "seed": self.seed, "paper_scale": self.paper_scale, "learner": self.learner.spec(),
                "scheme": self.scheme.to_dict(), "mode": self.mode.to_dict()}

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _stream(config: ExperimentConfig, what: str) -> SeedStream:
    return SeedStream.from_seed(config.seed, f"setting{config.setting}/{what}")


def generate_setting(config: ExperimentConfig) -> tuple[Dataset, np.ndarray]:
    """Dataset and a test covariate drawn from the same covariate law."""
    n, d = config.n, config.d
    if config.setting in (1, 2, 3):
        X = _stream(config, "X").normals(n * d).reshape(n, d)
        prob = expit(X @ np.full(d, THETA_STAR))
        y = (_stream(config, "Y").uniforms(n) < prob).astype(np.float64)
        x = _stream(config, "x_test").normals(d)
        return Dataset(X, y), x
    X = _stream(config, "X").uniforms(n * d).reshape(n, d)
    alpha = -0.25 + 0.5 * _stream(config, "alpha").uniforms(n)
    gamma = _stream(config, "gamma").uniforms(n)
    i = np.arange(1, n + 1)
    y = np.sin(X / np.arange(1, d + 1)).sum(axis=1) + alpha * (i % 3 == 1) + gamma * (i % 4 == 1)
    x = _stream(config, "x_test").uniforms(d)
    return Dataset(X, y), x
