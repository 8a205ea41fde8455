"""Black-box auditing of point f-differential privacy.

The package audits a claimed trade-off function from samples of a
mechanism's outputs on two neighbouring datasets (:class:`ConformalAuditor`,
:func:`audit`) and builds finite-sample confidence bands for the unknown
trade-off function (:class:`TradeoffBand`, :func:`build_band`).
"""

from .cipa import AuditVerdict, ConformalAuditor, SamplePair, Witness, audit, count_l
from .cipb import ConfidenceBand, TradeoffBand, build_band, eval_lower, eval_upper, sup_width
from .conformal import beta_tail_exact, epsilon_audit, epsilon_band, hoeffding_bound
from .tradeoff import (
    GDP,
    EpsDelta,
    Identity,
    Laplace,
    PiecewiseLinear,
    TradeoffFn,
    TruncatedTradeoff,
    UniformShift,
    Zero,
    eval_tradeoff,
    exact_tradeoff,
    parse_tradeoff,
    pointwise_leq,
)
from ._validation import DomainError

__version__ = "0.1.0"

__all__ = [
    "AuditVerdict",
    "ConformalAuditor",
    "ConfidenceBand",
    "DomainError",
    "EpsDelta",
    "GDP",
    "Identity",
    "Laplace",
    "PiecewiseLinear",
    "SamplePair",
    "TradeoffBand",
    "TradeoffFn",
    "TruncatedTradeoff",
    "UniformShift",
    "Witness",
    "Zero",
    "audit",
    "beta_tail_exact",
    "build_band",
    "count_l",
    "epsilon_audit",
    "epsilon_band",
    "eval_lower",
    "eval_tradeoff",
    "eval_upper",
    "exact_tradeoff",
    "hoeffding_bound",
    "parse_tradeoff",
    "pointwise_leq",
    "sup_width",
]
