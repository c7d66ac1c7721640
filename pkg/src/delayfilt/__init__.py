"""Particle filtering for randomly delayed measurements.

The package covers the full pipeline: a Bernoulli delay/drop channel
simulator with its closed-form outcome distribution, a particle filter
whose importance weights marginalize over every admissible delay
hypothesis, maximum-likelihood identification of the unknown latency
probability (offline grid search and online per-step argmax), and a
reproducible Monte Carlo experiment harness with a CLI.
"""

from .core import (
    GaussianSpec,
    Probability,
    RngStream,
    bernoulli_sample,
    derive_seed,
    gaussian_logpdf,
    gaussian_pdf,
    gaussian_sample,
)
from .delay_channel import (
    DelayChannel,
    DelayOutcome,
    LatencyParams,
    delay_pmf,
    empirical_delay_histogram,
    write_outcome_trace,
)
from .errors import (
    ConfigError,
    ContractError,
    DelayFiltError,
    DomainError,
    IdentificationError,
    NumericError,
)
from .experiments import (
    DEFAULT_VARIANTS,
    FilterVariant,
    RunMetrics,
    ScenarioConfig,
    TruthData,
    generate_truth,
    load_config,
    rmse,
    run_identification_study,
    run_monte_carlo,
    run_sweep,
    write_outputs,
)
from .filtering import (
    FilterEstimate,
    ParticleSet,
    StepDiagnostics,
    delayed_likelihood,
    effective_sample_size,
    estimate,
    filter_step,
    init_filter,
    run_filter,
    systematic_resample,
    write_step_diagnostics,
)
from .identification import (
    CandidateFilterState,
    GridSpec,
    IdentificationResult,
    OnlineIdentState,
    content_age_weights,
    identification_likelihood,
    init_candidate_filters,
    init_online_identification,
    ll_step,
    offline_identify,
    online_identify_step,
    repeat_probability,
    write_ll_curve,
)
from .models import (
    BotModel,
    BotParams,
    GrowthModel,
    GrowthModelParams,
    PlatformTrack,
    SystemModel,
    bot_mean,
    bot_measure,
    bot_propagate,
    bot_transition_matrix,
    generate_platform_track,
    growth_mean,
    growth_measure,
    growth_propagate,
    wrap_angle,
)

__version__ = "0.1.0"
