"""Koopman gramians and balanced truncation for discrete-time nonlinear systems."""

from .balance import (
    BalancedRealization,
    ReducedModel,
    balance,
    hankel_singular_values,
    simulate_reduced,
    sqrt_psd,
    truncate,
)
from .dictionary import (
    Dictionary,
    InputDictionary,
    Selector,
    evaluate,
    evaluate_input,
    example1_dictionary,
    identity_dictionary,
    input_dictionary,
    monomial_dictionary,
    output_selector,
    state_projector,
)
from .dynsys import (
    DiscreteSystem,
    LinearizedSystem,
    Trajectory,
    example1_system,
    example3_system,
    linear_observability_gramian,
    linear_system,
    linearize,
    simulate,
    sin_ramp,
    step,
)
from .edmd import (
    KoopmanModel,
    PredictionReport,
    SnapshotPair,
    build_snapshots,
    fit_koopman,
    fit_koopman_with_input,
    predict,
    prediction_error,
)
from .errors import (
    ConvergenceError,
    DimensionError,
    DivergenceError,
    KoopgramError,
    NonFiniteError,
    NotPSDError,
    UnstableOperatorError,
)
from .gramians import (
    Gramian,
    controllability_gramian,
    normalize,
    observability_gramian,
    phi_c,
    project,
    psd_check,
    stein_solve,
)

__version__ = "0.1.0"

__all__ = [
    "BalancedRealization",
    "ConvergenceError",
    "Dictionary",
    "DimensionError",
    "DiscreteSystem",
    "DivergenceError",
    "Gramian",
    "InputDictionary",
    "KoopgramError",
    "KoopmanModel",
    "LinearizedSystem",
    "NonFiniteError",
    "NotPSDError",
    "PredictionReport",
    "ReducedModel",
    "Selector",
    "SnapshotPair",
    "Trajectory",
    "UnstableOperatorError",
    "balance",
    "build_snapshots",
    "controllability_gramian",
    "evaluate",
    "evaluate_input",
    "example1_dictionary",
    "example1_system",
    "example3_system",
    "fit_koopman",
    "fit_koopman_with_input",
    "hankel_singular_values",
    "identity_dictionary",
    "input_dictionary",
    "linear_observability_gramian",
    "linear_system",
    "linearize",
    "monomial_dictionary",
    "normalize",
    "observability_gramian",
    "output_selector",
    "phi_c",
    "predict",
    "prediction_error",
    "project",
    "psd_check",
    "simulate",
    "simulate_reduced",
    "sin_ramp",
    "sqrt_psd",
    "state_projector",
    "stein_solve",
    "step",
    "truncate",
]
