"""Secure sequential detection with Byzantine sensors.

Rate functions and trade-off limits for a hypothesis pair, the secure
detectors that achieve them, causal attacks, and a Monte-Carlo harness with
importance sampling for measuring error exponents.
"""
from .errors import (
    ByzDetectError,
    ConfigError,
    DegeneratePair,
    InsufficientData,
    NumericalFailure,
    OutOfSupport,
    RangeError,
    UnsupportedPair,
)
from .measures import BernoulliPair, DistributionPair, GaussianShiftPair, pair_from_dict
from .rates import RateProfile, build_profile
from .limits import NetworkShape, TradeoffCurves, is_symmetric_case, lemma2_value
from .detect import make_detector, qom_exact_error, qom_optimize
from .attack import make_attack, validate_admissible
from .sim import ErrorEstimate, ScenarioConfig, fit_exponent, run_scenario, sweep_security_efficiency

__version__ = "0.1.0"

__all__ = [
    "ByzDetectError",
    "ConfigError",
    "DegeneratePair",
    "InsufficientData",
    "NumericalFailure",
    "OutOfSupport",
    "RangeError",
    "UnsupportedPair",
    "BernoulliPair",
    "DistributionPair",
    "GaussianShiftPair",
    "pair_from_dict",
    "RateProfile",
    "build_profile",
    "NetworkShape",
    "TradeoffCurves",
    "is_symmetric_case",
    "lemma2_value",
    "make_detector",
    "qom_exact_error",
    "qom_optimize",
    "make_attack",
    "validate_admissible",
    "ErrorEstimate",
    "ScenarioConfig",
    "fit_exponent",
    "run_scenario",
    "sweep_security_efficiency",
]
