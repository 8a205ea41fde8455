"""Conformal point-privacy auditor.

Given ``n`` outputs on each of two neighbouring datasets and a claimed
trade-off function ``f``, the auditor walks the order statistics ``d_k`` of
the first sample and counts how many outputs of the second sample fall
strictly below (``l``) and strictly above (``n + 1 - l*``) each of them.
Conformal coverage bounds turn these counts into tests whose type I error,
summed over all ``k``, stays below ``alpha`` whenever ``T(P, P') >= f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_alpha, check_sample
from .conformal import epsilon_audit
from .tradeoff import TradeoffFn, parse_tradeoff

__all__ = [
    "SamplePair",
    "Witness",
    "AuditVerdict",
    "count_l",
    "count_all",
    "audit",
    "ConformalAuditor",
]


@dataclass(frozen=True, eq=False)
class SamplePair:
    """Sorted outputs ``d`` (from ``D``) and ``d_prime`` (from ``D'``) of equal length."""

    d: np.ndarray
    d_prime: np.ndarray

    def __post_init__(self):
        d = check_sample(self.d, "d")
        dp = check_sample(self.d_prime, "d_prime")
        if d.size != dp.size:
            raise DomainError(f"samples must have equal length, got {d.size} and {dp.size}")
        d.setflags(write=False)
        dp.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "d_prime", dp)

    @property
    def n(self) -> int:
        return int(self.d.size)

    def __eq__(self, other):
        return (
            isinstance(other, SamplePair)
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.d_prime, other.d_prime)
        )


@dataclass(frozen=True)
class Witness:
    k: int
    side: Literal["Lower", "Upper"]
    l: int
    l_star: int
    threshold: float


@dataclass(frozen=True)
class AuditVerdict:
    is_point_dp: bool
    witness: Witness | None = None
    epsilon: float | None = None

    def __bool__(self):
        return self.is_point_dp


def count_l(sample_pair: SamplePair, k: int) -> tuple[int, int]:
    """``(l, l*)`` for the ``k``-th order statistic (1-based).

    ``l = #{j : d'_j < d_k}`` and ``l* = n + 1 - #{j : d'_j > d_k}``; ties count
    in neither set.
    """
    n = sample_pair.n
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise DomainError(f"k must be an integer in [1, {n}], got {k!r}")
    dk = sample_pair.d[k - 1]
    dp = sample_pair.d_prime
    l = int(np.searchsorted(dp, dk, side="left"))
    above = n - int(np.searchsorted(dp, dk, side="right"))
    return l, n + 1 - above


def count_all(sample_pair: SamplePair) -> tuple[np.ndarray, np.ndarray]:
    """Vector of ``l_k`` and ``l*_k`` for ``k = 1..n``."""
    dp = sample_pair.d_prime
    l = np.searchsorted(dp, sample_pair.d, side="left")
    l_star = np.searchsorted(dp, sample_pair.d, side="right") + 1
    return l.astype(np.int64), l_star.astype(np.int64)


def audit(sample_pair: SamplePair, f: TradeoffFn, alpha: float) -> AuditVerdict:
    """Decide whether the samples are consistent with point ``f``-DP.

    Rejects at the first ``k`` with

        l  > (n + 1) * (1 - f(k/(n+1) + eps) + eps)      (side ``Lower``), or
        l* < (n + 1) * (f(1 - k/(n+1) + eps) - eps)      (side ``Upper``),

    where ``eps = sqrt(-ln(alpha / 4n) / 2n)`` and ``f`` clamps its argument.
    """
    alpha = check_alpha(alpha)
    if not isinstance(sample_pair, SamplePair):
        raise DomainError("audit expects a SamplePair")
    n = sample_pair.n
    eps = epsilon_audit(alpha, n)
    l, l_star = count_all(sample_pair)
    q = np.arange(1, n + 1) / (n + 1)
    lower_thr = (n + 1) * (1.0 - np.asarray(f(q + eps)) + eps)
    upper_thr = (n + 1) * (np.asarray(f(1.0 - q + eps)) - eps)
    lower_bad = l > lower_thr
    upper_bad = l_star < upper_thr
    bad = np.flatnonzero(lower_bad | upper_bad)
    if bad.size == 0:
        return AuditVerdict(True, None, eps)
    i = int(bad[0])
    if lower_bad[i]:
        side, thr = "Lower", float(lower_thr[i])
    else:
        side, thr = "Upper", float(upper_thr[i])
    return AuditVerdict(False, Witness(i + 1, side, int(l[i]), int(l_star[i]), thr), eps)


class ConformalAuditor(BaseEstimator):
    """Estimator wrapper around :func:`audit`.

    Parameters
    ----------
    tradeoff : TradeoffFn or str, default="identity"
        Claimed trade-off function, or a specification string such as
        ``"gdp:mu=1"``.
    alpha : float, default=0.05
        Bound on the probability of rejecting a mechanism that satisfies the
        claim.

    Attributes
    ----------
    verdict_ : AuditVerdict
    is_point_dp_ : bool
    epsilon_ : float
    n_samples_ : int
    """

    def __init__(self, tradeoff="identity", alpha=0.05):
        self.tradeoff = tradeoff
        self.alpha = alpha

    def _claim(self) -> TradeoffFn:
        if isinstance(self.tradeoff, str):
            return parse_tradeoff(self.tradeoff)
        if not callable(self.tradeoff):
            raise DomainError(f"tradeoff must be a TradeoffFn or a spec string, got {self.tradeoff!r}")
        return self.tradeoff

    def fit(self, d, d_prime):
        """Audit outputs ``d`` of ``A(D)`` against outputs ``d_prime`` of ``A(D')``."""
        pair = SamplePair(d, d_prime)
        self.verdict_ = audit(pair, self._claim(), self.alpha)
        self.is_point_dp_ = self.verdict_.is_point_dp
        self.epsilon_ = self.verdict_.epsilon
        self.n_samples_ = pair.n
        return self

    def predict(self, d=None, d_prime=None) -> bool:
        """The verdict; refits first when samples are passed."""
        if d is not None or d_prime is not None:
            self.fit(d, d_prime)
        check_is_fitted(self, "verdict_")
        return self.is_point_dp_
