"""Particle filter for randomly delayed measurements.

A sequential importance resampling filter whose particles carry the last
max_delay+1 states. The weight of a particle is its delayed likelihood:
a mixture over every admissible delay hypothesis plus a loss branch that
recursively reuses the previous step's likelihood value,

    L_k = sum_{j=0..N} p^j (1-p) pdf(y_k - h_{k-j}(x_{k-j}))
          + p^(N+1) L_{k-1}.

With p = 0 and N = 0 this reduces exactly to the standard bootstrap
filter likelihood, and the whole filter degenerates to plain SIR.

Resampling is systematic and happens every step; ancestor selection
re-draws particle histories and their cached likelihood values together.

Choosing the maximum admissible delay trades off two effects: a small N
loses information when delays are long (the loss branch swallows them),
while a large N lengthens the filter memory and needs more particles to
keep Monte Carlo error in check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import RngStream
from .delay_channel import LatencyParams
from .errors import ConfigError, ContractError, NumericError
from .models import SystemModel

__all__ = [
    "ParticleSet",
    "FilterEstimate",
    "StepDiagnostics",
    "init_filter",
    "delayed_likelihood",
    "filter_step",
    "run_filter",
    "systematic_resample",
    "estimate",
    "effective_sample_size",
    "write_step_diagnostics",
]


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step filter internals, refreshed by every `filter_step`."""

    step: int
    ess: float
    underflow: bool
    log_mean_likelihood: float
    ancestors: np.ndarray
    likelihood: np.ndarray  # per-particle likelihood, pre-resampling


@dataclass
class ParticleSet:
    """Weighted particles with per-particle state history and likelihood cache.

    ``histories[i, j]`` is particle i's state from j steps ago (column 0 is
    the current state). ``prev_likelihood`` caches each particle's likelihood
    from the previous step, which feeds the loss branch of the recursion.
    Single-owner mutable state.
    """

    histories: np.ndarray        # (ns, max_delay+1, state_dim)
    weights: np.ndarray          # (ns,)
    prev_likelihood: np.ndarray  # (ns,)
    params: LatencyParams
    step: int = 0
    diagnostics: Optional[StepDiagnostics] = None

    @property
    def ns(self) -> int:
        return self.histories.shape[0]


@dataclass(frozen=True)
class FilterEstimate:
    """Weighted-mean state estimate at one step."""

    mean: np.ndarray
    step: int


def init_filter(
    model: SystemModel, params: LatencyParams, ns: int, rng: RngStream
) -> ParticleSet:
    """Draw ns particles from the model prior with uniform weights.

    All history columns start as the prior draw itself and the likelihood
    cache starts at 1 (a constant scale that cancels in normalization).
    """
    ns = int(ns)
    if ns < 1:
        raise ConfigError(f"particle count must be >= 1, got {ns}")
    x0 = model.prior_sample(rng, ns)
    histories = np.repeat(x0[:, None, :], params.max_delay + 1, axis=1)
    return ParticleSet(
        histories=histories,
        weights=np.full(ns, 1.0 / ns),
        prev_likelihood=np.ones(ns),
        params=params,
        step=0,
    )


def delayed_likelihood(history, y_k, prev_like, params: LatencyParams, model, k: int):
    """Likelihood of a delivered measurement under every delay hypothesis.

    ``history`` is either one particle history of shape (max_delay+1,
    state_dim) or a batch (ns, max_delay+1, state_dim); ``prev_like`` is the
    matching scalar or (ns,) cache of the previous step's value. Step
    indices older than the first measurement are clamped to 1, mirroring
    the channel's startup behavior.

    Always finite and >= 0; a non-finite result raises NumericError rather
    than silently propagating.
    """
    history = np.asarray(history, dtype=float)
    single = history.ndim == 2
    if single:
        history = history[None, :, :]
    n_hyp = params.max_delay + 1
    if history.shape[1] != n_hyp:
        raise ContractError(
            f"history holds {history.shape[1]} states, expected {n_hyp}"
        )
    p = float(params.p)
    prev = np.asarray(prev_like, dtype=float)

    like = p**n_hyp * prev
    like = np.broadcast_to(like, history.shape[:1]).astype(float, copy=True)
    for j in range(n_hyp):
        weight_j = p**j * (1.0 - p)
        if weight_j == 0.0:
            continue
        k_j = max(k - j, 1)
        residual = y_k - model.measure_clean(history[:, j], k_j)
        like += weight_j * model.meas_noise_pdf(residual, k_j)

    if not np.isfinite(like).all():
        raise NumericError(f"non-finite delayed likelihood at step {k}")
    return float(like[0]) if single else like


def systematic_resample(weights: np.ndarray, rng: RngStream) -> np.ndarray:
    """Systematic resampling: stratified positions with a single uniform offset.

    Expects normalized weights; returns ancestor indices whose expected
    replication count is ns * w_i.
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"weights must be normalized, sum = {total!r}")
    ns = len(weights)
    positions = (rng.random() + np.arange(ns)) / ns
    indices = np.searchsorted(np.cumsum(weights), positions)
    return np.clip(indices, 0, ns - 1)


def effective_sample_size(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def estimate(ps: ParticleSet) -> FilterEstimate:
    """Weighted particle mean of the current state."""
    mean = ps.weights @ ps.histories[:, 0]
    return FilterEstimate(mean=mean, step=ps.step)


def _sir_step(ps, y_k, model, k, rng, likelihood):
    """One SIR step under an arbitrary likelihood function.

    ``likelihood`` has the signature of :func:`delayed_likelihood`. Weights
    combine in log space; if every weight underflows to zero the set resets
    to uniform and the step is flagged. Resampling gathers histories and
    the likelihood cache by the same ancestors.
    """
    x_new = model.propagate(ps.histories[:, 0], k, rng)
    histories = np.concatenate([x_new[:, None, :], ps.histories[:, :-1]], axis=1)

    like = likelihood(histories, y_k, ps.prev_likelihood, ps.params, model, k)

    with np.errstate(divide="ignore"):
        log_w = np.log(like) + np.log(ps.weights)
    top = log_w.max()
    underflow = not np.isfinite(top)
    if underflow:
        weights = np.full(ps.ns, 1.0 / ps.ns)
    else:
        weights = np.exp(log_w - top)
        weights /= weights.sum()

    est = FilterEstimate(mean=weights @ histories[:, 0], step=k)

    ancestors = systematic_resample(weights, rng)
    mean_like = like.mean()
    diagnostics = StepDiagnostics(
        step=k,
        ess=effective_sample_size(weights),
        underflow=underflow,
        log_mean_likelihood=float(np.log(mean_like)) if mean_like > 0 else -np.inf,
        ancestors=ancestors,
        likelihood=like,
    )
    new_ps = ParticleSet(
        histories=histories[ancestors],
        weights=np.full(ps.ns, 1.0 / ps.ns),
        prev_likelihood=like[ancestors],
        params=ps.params,
        step=k,
        diagnostics=diagnostics,
    )
    return new_ps, est


def filter_step(
    ps: ParticleSet, y_k, model: SystemModel, k: int, rng: RngStream
) -> tuple[ParticleSet, FilterEstimate]:
    """Advance the filter by one delivered measurement.

    Propagates every particle through the transition prior (the proposal,
    so the transition density cancels in the weight), weights by the
    delayed likelihood, estimates, then resamples every step.
    """
    return _sir_step(ps, y_k, model, k, rng, delayed_likelihood)


def run_filter(
    ps: ParticleSet, measurements, model: SystemModel, rng: RngStream
) -> tuple[ParticleSet, np.ndarray]:
    """Run `filter_step` over a delivered-measurement sequence.

    Returns the final particle set and the (n_steps, state_dim) estimates.
    """
    means = np.empty((len(measurements), model.state_dim))
    for k, y_k in enumerate(measurements, start=1):
        ps, est = filter_step(ps, y_k, model, k, rng)
        means[k - 1] = est.mean
    return ps, means


def write_step_diagnostics(path, records) -> None:
    """Write per-step diagnostic records as CSV.

    ``records`` is an iterable of (StepDiagnostics, FilterEstimate) pairs.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "estimate", "ess", "underflow"])
        for diag, est in records:
            mean = np.atleast_1d(est.mean)
            writer.writerow(
                [diag.step, " ".join(str(float(v)) for v in mean),
                 str(float(diag.ess)), int(diag.underflow)]
            )
