"""Conformal radii and the coverage bounds behind them.

For i.i.d. data the coverage of a one-sided interval ending at the k-th order
statistic stochastically dominates ``Beta(k, n + 1 - k)``, whose CDF at
``k/(n+1) - Delta`` is in turn at most ``exp(-2 n Delta^2)``. The radii below
are the ``Delta`` that make the Hoeffding term ``alpha / (4n)`` (auditing) or
``alpha / (8n)`` (bands).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ._validation import DomainError, check_alpha, check_positive_int
from .rng import CounterRNG

__all__ = [
    "epsilon_audit",
    "epsilon_band",
    "beta_tail_exact",
    "hoeffding_bound",
    "coverage_exceedance",
]


def _radius(alpha, n, multiplier):
    alpha = check_alpha(alpha)
    n = check_positive_int(n, "n")
    return math.sqrt(-math.log(alpha / (multiplier * n)) / (2 * n))


def epsilon_audit(alpha: float, n: int) -> float:
    """Radius ``sqrt(-ln(alpha / 4n) / 2n)`` used by the auditor."""
    return _radius(alpha, n, 4)


def epsilon_band(alpha: float, n: int) -> float:
    """Radius ``sqrt(-ln(alpha / 8n) / 2n)`` used by the band constructor."""
    return _radius(alpha, n, 8)


def beta_tail_exact(k: int, n: int, x: float) -> float:
    """CDF of ``Beta(k, n + 1 - k)`` at ``x`` for integer parameters.

    Uses the identity ``F(x) = P(Binomial(n, x) >= k)`` and sums the binomial
    terms in log space with the running maximum subtracted, which stays
    accurate for ``n`` up to 1e5 and beyond. Negative ``x`` gives 0.
    """
    n = check_positive_int(n, "n")
    k = check_positive_int(k, "k")
    if k > n:
        raise DomainError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    x = float(x)
    if math.isnan(x) or x > 1.0:
        raise DomainError(f"x must be <= 1, got {x}")
    if x <= 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    j = np.arange(k, n + 1, dtype=np.float64)
    log_terms = (
        gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)
        + j * math.log(x) + (n - j) * math.log1p(-x)
    )
    top = float(np.max(log_terms))
    total = math.exp(top) * float(np.sum(np.exp(log_terms - top)))
    return min(total, 1.0)


def hoeffding_bound(n: int, delta: float) -> float:
    """``exp(-2 n delta^2)``."""
    n = check_positive_int(n, "n")
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    return math.exp(-2.0 * n * delta * delta)


def coverage_exceedance(n, ks, deltas, reps, seed):
    """Monte Carlo frequency of ``U_(k) <= k/(n+1) - Delta`` for uniform samples.

    For ``X ~ Uniform(0, 1)`` the coverage ``P(X <= X_(k) | sample)`` equals the
    order statistic ``U_(k)`` itself, so the frequency estimates the left tail
    that the Beta bound controls.

    Returns:
        Array of shape ``(len(ks), len(deltas))``.
    """
    n = check_positive_int(n, "n")
    ks = np.asarray(ks, dtype=np.int64)
    deltas = np.asarray(deltas, dtype=np.float64)
    rng = CounterRNG.from_seed(seed, 0xC0F)
    counts = np.zeros((ks.size, deltas.size), dtype=np.int64)
    for _ in range(reps):
        u = np.sort(rng.uniform(n))
        cover = u[ks - 1]
        counts += cover[:, None] <= (ks[:, None] / (n + 1) - deltas[None, :])
    return counts / reps
