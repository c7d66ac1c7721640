"""Shared numeric primitives.

Probability and Gaussian parameter types, scalar Gaussian density /
sampling helpers, and a reproducible seeded random-stream abstraction
used everywhere randomness is consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_LOG_TWO_PI = math.log(2.0 * math.pi)


class Probability(float):
    """A float constrained to [0, 1].

    Construction outside the closed unit interval (including NaN) raises
    :class:`~delayfilt.errors.DomainError`.
    """

    __slots__ = ()

    def __new__(cls, value) -> "Probability":
        v = float(value)
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"probability must lie in [0, 1], got {value!r}")
        return super().__new__(cls, v)


@dataclass(frozen=True)
class GaussianSpec:
    """Mean and variance of a scalar Gaussian distribution."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise DomainError("Gaussian mean/variance must be finite")
        if self.variance <= 0.0:
            raise DomainError(f"variance must be > 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


class RngStream:
    """Deterministic pseudo-random stream derived from a 64-bit seed.

    Two streams built from the same (seed, path) produce bitwise-identical
    draw sequences. Independent child streams are derived with
    :meth:`substream`; children never overlap their parent or siblings.
    A stream is owned by one consumer at a time (it is stateful).
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def substream(self, *ids: int) -> "RngStream":
        """Derive an independent stream identified by (seed, path + ids)."""
        return RngStream(self.seed, self.path + ids)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator (for advanced use)."""
        return self._gen

    def random(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def derive_seed(seed: int, *ids: int) -> int:
    """Derive a child 64-bit seed from a master seed and an integer path.

    Deterministic, and stable against adding unrelated sibling paths.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in ids))
    return int(ss.generate_state(1, np.uint64)[0])


def _normal_pdf(x, mean, variance):
    """Unchecked vectorized normal density (hot path)."""
    d = np.asarray(x, dtype=float) - mean
    return np.exp(-0.5 * d * d / variance) / np.sqrt(2.0 * math.pi * variance)


def _normal_logpdf(x, mean, variance):
    d = np.asarray(x, dtype=float) - mean
    return -0.5 * (d * d / variance + _LOG_TWO_PI + math.log(variance))


def gaussian_pdf(x, spec: GaussianSpec):
    """Evaluate the Gaussian density N(spec.mean, spec.variance) at x.

    Accepts scalars or arrays; raises DomainError on non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.isfinite(arr).all():
        raise DomainError("gaussian_pdf requires finite input")
    out = _normal_pdf(arr, spec.mean, spec.variance)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def gaussian_logpdf(x, spec: GaussianSpec):
    """Log form of :func:`gaussian_pdf`, for underflow-safe accumulation."""
    arr = np.asarray(x, dtype=float)
    if not np.isfinite(arr).all():
        raise DomainError("gaussian_logpdf requires finite input")
    out = _normal_logpdf(arr, spec.mean, spec.variance)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def gaussian_sample(spec: GaussianSpec, rng: RngStream, size=None):
    """Draw from N(spec.mean, spec.variance); deterministic given the stream."""
    return rng.normal(spec.mean, spec.std, size)


def bernoulli_sample(p, rng: RngStream) -> int:
    """Return 1 with probability p, else 0."""
    p = Probability(p)
    return int(rng.random() < p)
