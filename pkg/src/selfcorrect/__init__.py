"""Markov-chain model of accuracy under multi-round LLM self-correction.

Modules: :mod:`.theory` (closed forms), :mod:`.simulator` (seeded Monte
Carlo), :mod:`.estimation` (CL/CS from data), :mod:`.fitting` (prediction
and curve fitting), :mod:`.io_formats` (files) and :mod:`.cli`.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CurveTooShort,
    DegenerateWeights,
    GapError,
    InvalidProbability,
    LengthMismatch,
    NonConvergent,
    NumericalDomain,
    ParseError,
    RoundOutOfRange,
    SelfCorrectError,
    ValidationError,
    WriteError,
)
from .theory import (  # noqa: E402
    AccuracyCurve,
    DatasetProfile,
    QuestionProfile,
    TheoryParams,
    closed_form_accuracy,
    closed_form_curve,
    dataset_curve,
    derive_params,
    metrics_at_round,
    oracle_verifier_curve,
    question_closed_form,
    recursive_curve,
    rounds_to_converge,
)
from .simulator import SimulationConfig, Transcript, empirical_curve, simulate  # noqa: E402
from .estimation import (  # noqa: E402
    LabelSnapshot,
    QuestionEstimate,
    aggregate_metrics,
    estimate_classification,
    estimate_generation,
    stability_report,
)
from .fitting import FitResult, fit_geometric, goodness_of_fit, predict_from_single_round  # noqa: E402
