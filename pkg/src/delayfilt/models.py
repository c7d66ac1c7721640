"""System models: the pluggable state-space interface and two benchmarks.

Both benchmark models are scalar-measurement nonlinear systems:

* a univariate non-stationary growth model
      x_k = 0.5 x_{k-1} + 25 x_{k-1}/(1+x_{k-1}^2) + 8 cos(1.2 k) + q_{k-1}
      z_k = x_k^2 / 20 + v_k
  with q ~ N(0, 10), v ~ N(0, 1) and prior x_0 ~ N(0, 1);

* a bearing-only tracking (BOT) model where a target moving along the
  X axis with near-constant velocity is observed as the angle
      z_k = atan2(y_platform_k, x1_k - x_platform_k) + v_k
  from a moving sensor platform whose own position is noisy.

Filters evaluate the BOT measurement function at the *mean* platform
position; the realized platform noise only enters truth generation, so
it acts as unmodeled measurement error, which is how the benchmark is
posed.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, _normal_logpdf, _normal_pdf
from .errors import DomainError

__all__ = [
    "SystemModel",
    "GrowthModelParams",
    "GrowthModel",
    "BotParams",
    "BotModel",
    "PlatformTrack",
    "growth_mean",
    "growth_propagate",
    "growth_measure",
    "bot_transition_matrix",
    "bot_mean",
    "bot_propagate",
    "bot_measure",
    "generate_platform_track",
    "wrap_angle",
]


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.remainder(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return float(wrapped) if np.ndim(theta) == 0 else wrapped


class SystemModel(ABC):
    """Contract a state-space model must satisfy to be filtered.

    States are arrays of shape (n, state_dim); measurements are scalar.
    `measure_clean` must be deterministic and `meas_noise_pdf` a valid
    density in the residual.
    """

    state_dim: int
    meas_dim: int = 1

    @abstractmethod
    def propagate(self, x: np.ndarray, k: int, rng: RngStream) -> np.ndarray:
        """Advance states one step to index k, process noise included."""

    @abstractmethod
    def measure_clean(self, x: np.ndarray, k: int) -> np.ndarray:
        """Noiseless measurement of each state at step k; shape (n,)."""

    @abstractmethod
    def meas_noise_pdf(self, residual: np.ndarray, k: int) -> np.ndarray:
        """Measurement-noise density evaluated at each residual."""

    @abstractmethod
    def meas_noise_logpdf(self, residual: np.ndarray, k: int) -> np.ndarray:
        """Log form of :meth:`meas_noise_pdf`."""

    @abstractmethod
    def meas_noise_sample(self, k: int, rng: RngStream, size=None):
        """Draw measurement noise for step k."""

    @abstractmethod
    def prior_sample(self, rng: RngStream, n: int) -> np.ndarray:
        """Draw n initial states from the filter prior; shape (n, state_dim)."""

    @abstractmethod
    def initial_truth(self, rng: RngStream) -> np.ndarray:
        """The true initial state for simulation; shape (state_dim,)."""


# ---------------------------------------------------------------------------
# Univariate non-stationary growth model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthModelParams:
    process_var: float = 10.0
    meas_var: float = 1.0
    prior_mean: float = 0.0
    prior_var: float = 1.0

    def __post_init__(self) -> None:
        if self.process_var <= 0 or self.meas_var <= 0 or self.prior_var <= 0:
            raise DomainError("growth model variances must be > 0")


def growth_mean(x, k: int):
    """Deterministic part of the growth-model state transition to step k."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * math.cos(1.2 * k)
    return float(out) if out.ndim == 0 else out


def growth_propagate(x, k: int, rng: RngStream, process_var: float = 10.0):
    """One state transition of the growth model, process noise included."""
    x = np.asarray(x, dtype=float)
    noise = rng.normal(0.0, math.sqrt(process_var), size=x.shape if x.ndim else None)
    out = growth_mean(x, k) + noise
    return float(out) if np.ndim(out) == 0 else out


def growth_measure(x):
    """Clean growth-model measurement x^2 / 20 (even in x)."""
    x = np.asarray(x, dtype=float)
    out = x * x / 20.0
    return float(out) if out.ndim == 0 else out


class GrowthModel(SystemModel):
    """The univariate growth benchmark wrapped as a SystemModel."""

    state_dim = 1

    def __init__(self, params: GrowthModelParams | None = None):
        self.params = params if params is not None else GrowthModelParams()

    def propagate(self, x, k, rng):
        p = self.params
        return growth_propagate(x[:, 0], k, rng, p.process_var)[:, None]

    def measure_clean(self, x, k):
        return growth_measure(x[:, 0])

    def meas_noise_pdf(self, residual, k):
        return _normal_pdf(residual, 0.0, self.params.meas_var)

    def meas_noise_logpdf(self, residual, k):
        return _normal_logpdf(residual, 0.0, self.params.meas_var)

    def meas_noise_sample(self, k, rng, size=None):
        return rng.normal(0.0, math.sqrt(self.params.meas_var), size)

    def prior_sample(self, rng, n):
        p = self.params
        return rng.normal(p.prior_mean, math.sqrt(p.prior_var), size=(n, 1))

    def initial_truth(self, rng):
        return self.prior_sample(rng, 1)[0]


# ---------------------------------------------------------------------------
# Bearing-only tracking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BotParams:
    """Bearing-only tracking scenario parameters.

    ``paper_literal_f`` switches the velocity row of the transition matrix
    from the standard constant-velocity form [0, 1] to the printed [0, T]
    variant, which makes velocity decay geometrically.
    """

    sampling_time: float = 0.2
    platform_noise_var: float = 1.0          # each platform coordinate, m^2
    process_var: float = 0.01                # target acceleration noise, m^2/s^4
    bearing_noise_deg: float = 3.0
    x0_true: tuple[float, float] = (80.0, 1.0)
    prior_var: tuple[float, float] = (1.0, 0.1)
    platform_speed: float = 4.0              # mean platform x position is speed*k*T
    platform_y: float = 20.0
    paper_literal_f: bool = False
    meas_var: float = field(init=False)

    def __post_init__(self) -> None:
        if self.sampling_time <= 0:
            raise DomainError("sampling_time must be > 0")
        if min(self.platform_noise_var, self.process_var) <= 0 or min(self.prior_var) <= 0:
            raise DomainError("BOT variances must be > 0")
        # degrees -> radians once, here; all internal angles are radians
        object.__setattr__(self, "meas_var", math.radians(self.bearing_noise_deg) ** 2)


@dataclass(frozen=True)
class PlatformTrack:
    """Realized (noisy) platform coordinates and their means, indexed by step."""

    x: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


def bot_transition_matrix(sampling_time: float, paper_literal: bool = False) -> np.ndarray:
    t = float(sampling_time)
    return np.array([[1.0, t], [0.0, t if paper_literal else 1.0]])


def bot_mean(x, params: BotParams):
    """Deterministic part of the target transition, F @ x."""
    f = bot_transition_matrix(params.sampling_time, params.paper_literal_f)
    x = np.asarray(x, dtype=float)
    return x @ f.T if x.ndim == 2 else f @ x


def bot_propagate(x, params: BotParams, rng: RngStream):
    """One target transition F x + G q with scalar acceleration noise q."""
    t = params.sampling_time
    g = np.array([0.5 * t * t, t])
    x = np.asarray(x, dtype=float)
    n = x.shape[0] if x.ndim == 2 else None
    q = rng.normal(0.0, math.sqrt(params.process_var), size=n)
    if x.ndim == 2:
        return bot_mean(x, params) + np.outer(q, g)
    return bot_mean(x, params) + q * g


def bot_measure(x1, platform):
    """Full-quadrant bearing from the platform to the target, in (-pi, pi].

    ``platform`` is an (x, y) pair; either argument may be an array.
    Raises DomainError when target and platform coincide with y = 0.
    """
    x_tp, y_tp = platform
    dx = np.asarray(x1, dtype=float) - np.asarray(x_tp, dtype=float)
    y_tp = np.asarray(y_tp, dtype=float)
    if np.any((dx == 0.0) & (y_tp == 0.0)):
        raise DomainError("bearing undefined: target coincides with platform")
    theta = np.arctan2(y_tp, dx)
    theta = np.where(theta == -np.pi, np.pi, theta)
    return float(theta) if theta.ndim == 0 else theta


def generate_platform_track(
    params: BotParams, n_steps: int, rng: RngStream
) -> PlatformTrack:
    """Noisy platform coordinates for steps 0..n_steps inclusive."""
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    k = np.arange(n_steps + 1)
    x_mean = params.platform_speed * k * params.sampling_time
    y_mean = np.full(n_steps + 1, params.platform_y)
    std = math.sqrt(params.platform_noise_var)
    x = x_mean + rng.normal(0.0, std, size=n_steps + 1)
    y = y_mean + rng.normal(0.0, std, size=n_steps + 1)
    return PlatformTrack(x=x, y=y, x_mean=x_mean, y_mean=y_mean)


class BotModel(SystemModel):
    """Bearing-only tracking wrapped as a SystemModel.

    The filter-side measurement uses mean platform positions; bearing
    residuals are wrapped to (-pi, pi] before density evaluation so that
    measurements near the +-pi cut do not produce 2*pi-sized residuals.
    """

    state_dim = 2

    def __init__(self, params: BotParams | None = None):
        self.params = params if params is not None else BotParams()

    def platform_mean(self, k: int) -> tuple[float, float]:
        p = self.params
        return (p.platform_speed * k * p.sampling_time, p.platform_y)

    def propagate(self, x, k, rng):
        return bot_propagate(x, self.params, rng)

    def measure_clean(self, x, k):
        return bot_measure(x[:, 0], self.platform_mean(k))

    def meas_noise_pdf(self, residual, k):
        return _normal_pdf(wrap_angle(residual), 0.0, self.params.meas_var)

    def meas_noise_logpdf(self, residual, k):
        return _normal_logpdf(wrap_angle(residual), 0.0, self.params.meas_var)

    def meas_noise_sample(self, k, rng, size=None):
        return rng.normal(0.0, math.sqrt(self.params.meas_var), size)

    def prior_sample(self, rng, n):
        p = self.params
        mean = np.asarray(p.x0_true)
        std = np.sqrt(np.asarray(p.prior_var))
        return mean + rng.normal(0.0, 1.0, size=(n, 2)) * std

    def initial_truth(self, rng):
        return np.array(self.params.x0_true, dtype=float)
