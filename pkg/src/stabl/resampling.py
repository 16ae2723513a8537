"""Bag distributions: parameters, sampling, exact enumeration, leave-one-out law.

Bags are integer arrays of 0-based row indices.  Four schemes are supported:

========== ======================================= ==========================
kind       bag law                                 ``m``
========== ======================================= ==========================
subbag     m distinct indices, uniform order       integer, 1 <= m <= n
bernoulli  M ~ Binomial(n, m/n) distinct indices   rate, 0 < m <= n
classical  m indices with replacement              integer, m >= 1
poisson    M ~ Poisson(m) indices with replacement rate, m > 0
========== ======================================= ==========================
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import ConfigurationError, EnumerationTooLargeError, ParseError, PrecisionError
from .streams import SeedStream, uniforms_from_keys

DEFAULT_LIMIT = 10**6
POISSON_TAIL = 1e-12


class Kind(str, enum.Enum):
    SUBBAG = "subbag"
    BERNOULLI = "bernoulli"
    CLASSICAL = "classical"
    POISSON = "poisson"


@dataclass(frozen=True)
class ResamplingScheme:
    kind: Kind
    n: int
    m: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n!r}")
        if self.kind in (Kind.SUBBAG, Kind.CLASSICAL):
            if int(self.m) != self.m or self.m < 1:
                raise ConfigurationError(f"{self.kind.value} needs integer m >= 1, got {self.m!r}")
            object.__setattr__(self, "m", int(self.m))
            # m == n is representable (drop_one_scheme can produce it) but degenerate
            if self.kind is Kind.SUBBAG and self.m > self.n:
                raise ConfigurationError(f"subbag needs m <= n, got m={self.m}, n={self.n}")
        else:
            if not self.m > 0:
                raise ConfigurationError(f"{self.kind.value} needs rate m > 0, got {self.m!r}")
            if self.kind is Kind.BERNOULLI and self.m > self.n:
                raise ConfigurationError(f"bernoulli needs m <= n, got m={self.m}, n={self.n}")

    @classmethod
    def subbag(cls, n, m):
        return cls(Kind.SUBBAG, n, m)

    @classmethod
    def bernoulli(cls, n, m):
        return cls(Kind.BERNOULLI, n, m)

    @classmethod
    def classical(cls, n, m):
        return cls(Kind.CLASSICAL, n, m)

    @classmethod
    def poisson(cls, n, m):
        return cls(Kind.POISSON, n, m)

    @property
    def degenerate(self) -> bool:
        """True when every index is always drawn (p == 1)."""
        return self.kind in (Kind.SUBBAG, Kind.BERNOULLI) and self.m >= self.n

    @property
    def p(self) -> float:
        return inclusion_probability(self)

    @property
    def q(self) -> float:
        return pair_covariance_deficit(self)

    def describe(self) -> str:
        m = self.m if isinstance(self.m, int) else repr(float(self.m))
        return f"{self.kind.value}(n={self.n}, m={m})"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "m": self.m}


def parse_scheme(spec: str, n: int) -> ResamplingScheme:
    """Parse ``kind:m`` (e.g. ``subbag:100``); n comes from the dataset."""
    kind, sep, value = spec.partition(":")
    if not sep:
        raise ParseError(f"scheme spec {spec!r} must look like kind:m")
    aliases = {"subbag": Kind.SUBBAG, "bernoulli": Kind.BERNOULLI,
               "classical": Kind.CLASSICAL, "poisson": Kind.POISSON}
    if kind not in aliases:
        raise ParseError(f"unknown scheme kind {kind!r}; expected one of {sorted(aliases)}")
    try:
        m = float(value)
    except ValueError:
        raise ParseError(f"scheme parameter {value!r} is not a number") from None
    if m.is_integer():
        m = int(m)
    return ResamplingScheme(aliases[kind], n, m)


def inclusion_probability(scheme: ResamplingScheme) -> float:
    n, m = scheme.n, scheme.m
    if scheme.degenerate:
        raise ConfigurationError(f"{scheme.describe()} includes every point (p = 1)")
    if scheme.kind in (Kind.SUBBAG, Kind.BERNOULLI):
        return m / n
    if scheme.kind is Kind.CLASSICAL:
        return -math.expm1(m * math.log1p(-1.0 / n)) if n > 1 else 1.0
    return -math.expm1(-m / n)


def pair_covariance_deficit(scheme: ResamplingScheme) -> float:
    n, m = scheme.n, scheme.m
    if n < 2:
        raise ConfigurationError("q is undefined for n < 2")
    if scheme.degenerate:
        raise ConfigurationError(f"{scheme.describe()} includes every point (p = 1)")
    if scheme.kind is Kind.SUBBAG:
        return m * (n - m) / (n * n * (n - 1))
    if scheme.kind is Kind.CLASSICAL:
        return (1 - 1 / n) ** (2 * m) - (1 - 2 / n) ** m
    return 0.0


def drop_one_scheme(scheme: ResamplingScheme) -> ResamplingScheme:
    """The law of a bag from ``scheme`` conditioned on avoiding one fixed index.

    Subbag and classical keep m on n - 1 points.  Bernoulli keeps the per-point
    inclusion rate m/n, and Poissonized keeps the per-point Poisson rate m/n, so
    both shrink their total rate to m(n - 1)/n.  A subbag with m = n - 1 maps to
    the degenerate subbag(n - 1, n - 1); check ``.degenerate`` downstream.
    """
    n, m = scheme.n, scheme.m
    if n < 2:
        raise ConfigurationError("cannot drop a point from a one-point scheme")
    if scheme.kind is Kind.SUBBAG:
        if m > n - 1:
            raise ConfigurationError(f"{scheme.describe()}: every bag contains every index")
        return ResamplingScheme(Kind.SUBBAG, n - 1, m)
    if scheme.kind is Kind.CLASSICAL:
        return ResamplingScheme(Kind.CLASSICAL, n - 1, m)
    return ResamplingScheme(scheme.kind, n - 1, m * (n - 1) / n)


# ---------------------------------------------------------------- sampling


def _subbag_rows(u: np.ndarray, n: int, m: int) -> np.ndarray:
    """Partial Fisher-Yates, one row per stream: draw i swaps slot i with i + floor(u (n - i))."""
    rows = u.shape[0]
    perm = np.tile(np.arange(n), (rows, 1))
    r = np.arange(rows)
    for i in range(m):
        j = i + np.floor(u[:, i] * (n - i)).astype(np.int64)
        a = perm[r, i].copy()
        perm[r, i] = perm[r, j]
        perm[r, j] = a
    return perm[:, :m]


def sample_bags(scheme: ResamplingScheme, keys: Sequence[int] | np.ndarray) -> list[np.ndarray]:
    """One bag per stream key; bag ``b`` depends only on ``keys[b]``."""
    keys = np.asarray(keys, dtype=np.uint64)
    n, m = scheme.n, scheme.m
    if scheme.kind is Kind.SUBBAG:
        return list(_subbag_rows(uniforms_from_keys(keys, m), n, m))
    if scheme.kind is Kind.CLASSICAL:
        u = uniforms_from_keys(keys, m)
        return list(np.floor(u * n).astype(np.int64))
    head = uniforms_from_keys(keys, 1)[:, 0]
    bags = []
    if scheme.kind is Kind.BERNOULLI:
        sizes = stats.binom.ppf(head, n, m / n).astype(np.int64)
        for key, size in zip(keys, sizes):
            u = uniforms_from_keys(np.array([key], dtype=np.uint64), int(size), offset=1)
            bags.append(_subbag_rows(u, n, int(size))[0])
        return bags
    sizes = stats.poisson.ppf(head, m).astype(np.int64)
    for key, size in zip(keys, sizes):
        u = uniforms_from_keys(np.array([key], dtype=np.uint64), int(size), offset=1)[0]
        bags.append(np.floor(u * n).astype(np.int64))
    return bags


def sample_bag(scheme: ResamplingScheme, stream: SeedStream) -> np.ndarray:
    return sample_bags(scheme, [stream.key])[0]


# ------------------------------------------------------------- enumeration


@dataclass(frozen=True)
class Support:
    """Exhaustive list of bag classes with their probabilities.

    ``counts[c, i]`` is the multiplicity of index i in class c.  When the
    support is collapsed each class stands for every ordering (and, with
    replacement, every arrangement) of its multiset; otherwise
    ``sequences[c]`` holds the one ordered bag the class represents.
    """

    scheme: ResamplingScheme
    counts: np.ndarray
    probs: np.ndarray
    collapsed: bool
    sequences: tuple | None = None
    residual: float = 0.0

    def __len__(self) -> int:
        return len(self.probs)

    def bag(self, c: int) -> np.ndarray:
        if self.sequences is not None:
            return self.sequences[c]
        return np.repeat(np.arange(self.scheme.n), self.counts[c])

    @property
    def absent(self) -> np.ndarray:
        """uint8 mask, 1 where index i does not occur in class c."""
        return np.ascontiguousarray(self.counts == 0, dtype=np.uint8)

    def inclusion(self) -> np.ndarray:
        """P{i in r} for every i, computed from the enumerated law."""
        return self.probs @ (self.counts > 0)


def _poisson_max_length(rate: float) -> int:
    size = int(stats.poisson.isf(POISSON_TAIL, rate))
    while stats.poisson.sf(size, rate) >= POISSON_TAIL:
        size += 1
    while size > 0 and stats.poisson.sf(size - 1, rate) < POISSON_TAIL:
        size -= 1
    return size


def support_size(scheme: ResamplingScheme, collapse_symmetric: bool, max_length: int | None = None) -> int:
    n, m = scheme.n, scheme.m
    if scheme.kind is Kind.SUBBAG:
        return math.comb(n, m) if collapse_symmetric else math.perm(n, m)
    if scheme.kind is Kind.CLASSICAL:
        return math.comb(n + m - 1, m) if collapse_symmetric else n**m
    if scheme.kind is Kind.BERNOULLI:
        if collapse_symmetric:
            return 2**n
        return sum(math.perm(n, k) for k in range(n + 1))
    top = _poisson_max_length(m) if max_length is None else max_length
    if collapse_symmetric:
        return math.comb(n + top, n)
    return sum(n**k for k in range(top + 1))


@lru_cache(maxsize=256)
def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int32)
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions(total - first, parts - 1)
        block = np.empty((rest.shape[0], parts), dtype=np.int32)
        block[:, 0] = first
        block[:, 1:] = rest
        blocks.append(block)
    out = np.concatenate(blocks)
    out.flags.writeable = False
    return out


def _counts_from_sequences(seqs: np.ndarray, n: int) -> np.ndarray:
    counts = np.zeros((seqs.shape[0], n), dtype=np.int32)
    if seqs.shape[1]:
        rows = np.repeat(np.arange(seqs.shape[0]), seqs.shape[1])
        np.add.at(counts, (rows, seqs.ravel()), 1)
    return counts


def _log_multinomial(counts: np.ndarray) -> np.ndarray:
    sizes = counts.sum(axis=1)
    return gammaln(sizes + 1.0) - gammaln(counts + 1.0).sum(axis=1)


def enumerate_support(
    scheme: ResamplingScheme,
    collapse_symmetric: bool = False,
    limit: int = DEFAULT_LIMIT,
    max_length: int | None = None,
) -> Support:
    """Every bag class of ``scheme`` with its probability (total mass 1).

    ``collapse_symmetric`` merges bags that differ only by order (and, for
    sampling with replacement, by arrangement of a multiset); only valid for
    learners that ignore row order.  Poissonized supports are truncated at the
    shortest length leaving tail mass below 1e-12 and renormalized;
    ``max_length`` overrides the cut and raises :class:`PrecisionError` when
    it would discard more than that.
    """
    n, m = scheme.n, scheme.m
    if scheme.kind is Kind.POISSON and max_length is not None:
        tail = float(stats.poisson.sf(max_length, m))
        if tail > POISSON_TAIL:
            raise PrecisionError(
                f"truncating poisson(m={m}) bags at length {max_length} drops mass {tail:.3g} > {POISSON_TAIL}"
            )
    size = support_size(scheme, collapse_symmetric, max_length)
    if size > limit:
        raise EnumerationTooLargeError(size, limit)

    residual = 0.0
    sequences = None
    if scheme.kind is Kind.SUBBAG:
        if collapse_symmetric:
            seqs = np.array(list(itertools.combinations(range(n), m)), dtype=np.int64).reshape(-1, m)
            probs = np.full(len(seqs), 1.0 / math.comb(n, m))
            counts = _counts_from_sequences(seqs, n)
        else:
            seqs = np.array(list(itertools.permutations(range(n), m)), dtype=np.int64).reshape(-1, m)
            probs = np.full(len(seqs), 1.0 / math.perm(n, m))
            counts = _counts_from_sequences(seqs, n)
            sequences = tuple(seqs)
    elif scheme.kind is Kind.CLASSICAL:
        if collapse_symmetric:
            counts = _compositions(m, n)
            probs = np.exp(_log_multinomial(counts) - m * math.log(n))
        else:
            seqs = np.array(list(itertools.product(range(n), repeat=m)), dtype=np.int64).reshape(-1, m)
            counts = _counts_from_sequences(seqs, n)
            probs = np.full(len(seqs), float(n) ** -m)
            sequences = tuple(seqs)
    elif scheme.kind is Kind.BERNOULLI:
        p = m / n
        if collapse_symmetric:
            counts = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int32).reshape(-1, n)
            k = counts.sum(axis=1)
            probs = p**k * (1 - p) ** (n - k)
        else:
            seqs_all, prob_list = [], []
            for k in range(n + 1):
                mass = stats.binom.pmf(k, n, p) / math.perm(n, k)
                block = list(itertools.permutations(range(n), k))
                seqs_all.extend(np.array(s, dtype=np.int64) for s in block)
                prob_list.append(np.full(len(block), mass))
            probs = np.concatenate(prob_list)
            sequences = tuple(seqs_all)
            counts = np.zeros((len(seqs_all), n), dtype=np.int32)
            for c, s in enumerate(seqs_all):
                counts[c, s] = 1
    else:
        top = _poisson_max_length(m) if max_length is None else max_length
        rate = m / n
        if collapse_symmetric:
            # vectors summing to <= top, via a slack coordinate
            counts = np.ascontiguousarray(_compositions(top, n + 1)[:, :n])
            log_p = (counts * math.log(rate)).sum(axis=1) - gammaln(counts + 1.0).sum(axis=1) - m
            probs = np.exp(log_p)
        else:
            seqs_all, prob_list = [], []
            for k in range(top + 1):
                block = list(itertools.product(range(n), repeat=k))
                seqs_all.extend(np.array(s, dtype=np.int64) for s in block)
                prob_list.append(np.full(len(block), stats.poisson.pmf(k, m) / float(n) ** k))
            probs = np.concatenate(prob_list)
            sequences = tuple(seqs_all)
            counts = np.zeros((len(seqs_all), n), dtype=np.int32)
            for c, s in enumerate(seqs_all):
                np.add.at(counts[c], s, 1)
        total = math.fsum(probs)
        residual = 1.0 - total
        probs = probs / total
    return Support(scheme, np.ascontiguousarray(counts, dtype=np.int32), np.asarray(probs, dtype=np.float64),
                   collapse_symmetric, sequences, float(max(residual, 0.0)))
