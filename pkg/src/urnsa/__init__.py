"""Urn models with random replacement matrices, run as stochastic
approximation with random step sizes, plus the Monte Carlo machinery to
check their limit behavior empirically."""

from .dynamics import OdePath, drift, fixed_point_residual, integrate, settle, xi_term
from .errors import (
    ConfigError,
    ConvergenceError,
    GeneratorContractError,
    IntegrationError,
    NeedsMoreDataError,
    UrnsaError,
)
from .generators import GeneratorSpec, make_generator
from .spectral import PerronData, is_irreducible, perron, rho, sigma
from .sa import (
    PathSample,
    StepSizeSeq,
    crossing_backward,
    crossing_forward,
    delayed_sum_stats,
    discrepancy_e,
    harmonic_crossing_forward,
    interp_const,
    interp_linear,
    oscillation,
    partial_sums,
)
from .urn import (
    StepRecord,
    Trajectory,
    UrnExperiment,
    UrnState,
    advance,
    draw_color,
    make_experiment,
    sa_residual,
    simulate,
)
from .verify import (
    ConvergenceReport,
    EventReport,
    MetricCurve,
    cesaro_mds,
    event_frequency,
    negligibility_curves,
    oscillation_curve,
    run_convergence,
)

__version__ = "0.1.0"
