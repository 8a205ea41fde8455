"""Finite-sample confidence bands for the trade-off function.

Each order statistic ``d_k`` of the first sample gives two one-sided tests.
Conformal bounds on their errors yield grid points ``U(k)`` above the true
trade-off curve and ``L(k)`` below it. The upper band joins the ``U`` points
by line segments (valid by convexity); the lower band extends each ``L``
point to the left as a step (valid by monotonicity). ``[0, f_upper]`` holds
with probability ``1 - alpha/2`` for any pair; ``[f_lower, f_upper]`` holds
with probability ``1 - alpha`` when the pair has a monotone likelihood ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_alpha, check_finite
from .cipa import SamplePair, count_all
from .conformal import epsilon_band

__all__ = [
    "ConfidenceBand",
    "build_band",
    "eval_upper",
    "eval_lower",
    "sup_width",
    "TradeoffBand",
]


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    """Grid points for ``k = 0..n+1``.

    ``upper_pts`` and ``lower_pts`` are ``(n + 2, 2)`` arrays of ``(x, y)``.
    ``lower_pts[0, 1]`` is NaN: the construction never defines ``L_y(0)``.
    """

    n: int
    alpha: float
    epsilon: float
    upper_pts: np.ndarray
    lower_pts: np.ndarray
    monotonized: bool = False

    def __eq__(self, other):
        return (
            isinstance(other, ConfidenceBand)
            and (self.n, self.alpha, self.epsilon, self.monotonized)
            == (other.n, other.alpha, other.epsilon, other.monotonized)
            and np.array_equal(self.upper_pts, other.upper_pts)
            and np.array_equal(self.lower_pts, other.lower_pts, equal_nan=True)
        )

    def to_dict(self) -> dict:
        lower = [[float(x), None if np.isnan(y) else float(y)] for x, y in self.lower_pts]
        return {
            "n": self.n,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "upper_pts": self.upper_pts.tolist(),
            "lower_pts": lower,
            "monotonized": self.monotonized,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConfidenceBand":
        lower = np.array(
            [[x, np.nan if y is None else y] for x, y in data["lower_pts"]], dtype=np.float64
        )
        return cls(
            int(data["n"]),
            float(data["alpha"]),
            float(data["epsilon"]),
            np.asarray(data["upper_pts"], dtype=np.float64),
            lower,
            bool(data["monotonized"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self, grid_size: int = 101) -> str:
        """``x,upper,lower`` rows on an even grid over [0, 1]."""
        if grid_size < 2:
            raise DomainError(f"grid_size must be >= 2, got {grid_size}")
        xs = np.linspace(0.0, 1.0, grid_size)
        up = eval_upper(self, xs)
        lo = eval_lower(self, xs)
        rows = ["x,upper,lower"]
        rows += [f"{x!r},{u!r},{v!r}" for x, u, v in zip(xs.tolist(), up.tolist(), lo.tolist())]
        return "\n".join(rows) + "\n"


def build_band(sample_pair: SamplePair, alpha: float, monotonize: bool = False) -> ConfidenceBand:
    """Grid points of the upper and lower bands.

    For ``k = 1..n`` with ``eps = sqrt(-ln(alpha / 8n) / 2n)``::

        U(k) = (min{k/(n+1) + eps, 1},
                min{(n+1-l_k)/(n+1) + eps, l*_{n+1-k}/(n+1) + eps, 1})
        L(k) = (max{k/(n+1) - eps, 0},
                max{min{(n+1-l*_k)/(n+1) - eps, l_{n+1-k}/(n+1) - eps}, 0})

    with ``U(0) = (0, 1)``, ``L_x(0) = 0`` and ``U(n+1) = L(n+1) = (1, 0)``.
    """
    alpha = check_alpha(alpha)
    if not isinstance(sample_pair, SamplePair):
        raise DomainError("build_band expects a SamplePair")
    n = sample_pair.n
    eps = epsilon_band(alpha, n)
    l, l_star = count_all(sample_pair)
    q = np.arange(1, n + 1) / (n + 1)
    m = n + 1

    upper = np.empty((n + 2, 2))
    upper[0] = (0.0, 1.0)
    upper[n + 1] = (1.0, 0.0)
    upper[1:m, 0] = np.minimum(q + eps, 1.0)
    upper[1:m, 1] = np.minimum(
        np.minimum((m - l) / m + eps, l_star[::-1] / m + eps), 1.0
    )

    lower = np.empty((n + 2, 2))
    lower[0] = (0.0, np.nan)
    lower[n + 1] = (1.0, 0.0)
    lower[1:m, 0] = np.maximum(q - eps, 0.0)
    lower[1:m, 1] = np.maximum(
        np.minimum((m - l_star) / m - eps, l[::-1] / m - eps), 0.0
    )
    upper.setflags(write=False)
    lower.setflags(write=False)
    return ConfidenceBand(n, alpha, eps, upper, lower, bool(monotonize))


def _check_grid(x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("band evaluation points must lie in [0, 1]")
    return arr


def eval_upper(band: ConfidenceBand, x):
    """Piecewise-linear upper band.

    Below 1 the grid abscissas are strictly increasing, so ordinary linear
    interpolation applies. Once abscissas clamp to 1 the remaining segments
    are vertical; at ``x = 1`` the smallest ordinate there is used, which is
    ``U_y(n+1) = 0``.
    """
    arr = _check_grid(x)
    ux = band.upper_pts[:, 0]
    uy = band.upper_pts[:, 1]
    stop = int(np.argmax(ux >= 1.0))
    xs, ys = ux[: stop + 1], uy[: stop + 1]
    out = np.interp(arr, xs, ys)
    out = np.where(arr >= 1.0, float(np.min(uy[stop:])), out)
    return float(out) if out.ndim == 0 else out


def _lower_steps(band: ConfidenceBand) -> np.ndarray:
    ly = band.lower_pts[:, 1].copy()
    if band.monotonized:
        ly[1:] = np.maximum.accumulate(ly[1:][::-1])[::-1]
    return ly


def eval_lower(band: ConfidenceBand, x):
    """Step lower band: ``L_y(k+1)`` on ``(L_x(k), L_x(k+1)]`` and ``L_y(1)`` at 0.

    With ``band.monotonized`` the running maximum from the right is returned
    instead, which is still a valid lower bound for a non-increasing curve.
    """
    arr = _check_grid(x)
    ly = _lower_steps(band)
    idx = np.searchsorted(band.lower_pts[:, 0], arr, side="left")
    idx = np.maximum(idx, 1)
    out = ly[idx]
    return float(out) if out.ndim == 0 else out


def sup_width(band: ConfidenceBand, x_min: float | None = None, grid_size: int = 2001) -> float:
    """``max (f_upper - f_lower)`` over an even grid of ``[x_min, 1]``.

    ``x_min`` defaults to ``eps + 1/(n+1)``, left of which the band cannot
    shrink (``f(0)`` is not estimable).
    """
    if x_min is None:
        x_min = band.epsilon + 1.0 / (band.n + 1)
    x_min = check_finite(x_min, "x_min")
    if x_min < 0:
        raise DomainError(f"x_min must be >= 0, got {x_min}")
    grid = np.array([1.0]) if x_min >= 1.0 else np.linspace(x_min, 1.0, grid_size)
    return float(np.max(eval_upper(band, grid) - eval_lower(band, grid)))


class TradeoffBand(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`build_band`.

    ``fit(d, d_prime)`` builds the band; ``transform(x)`` returns an
    ``(len(x), 2)`` array of ``[lower, upper]`` evaluations and ``predict(x)``
    the upper band alone.
    """

    def __init__(self, alpha=0.1, monotonize=False):
        self.alpha = alpha
        self.monotonize = monotonize

    def fit(self, d, d_prime):
        pair = SamplePair(d, d_prime)
        self.band_ = build_band(pair, self.alpha, self.monotonize)
        self.epsilon_ = self.band_.epsilon
        self.n_samples_ = pair.n
        return self

    def upper(self, x):
        check_is_fitted(self, "band_")
        return eval_upper(self.band_, x)

    def lower(self, x):
        check_is_fitted(self, "band_")
        return eval_lower(self.band_, x)

    def predict(self, x):
        return self.upper(x)

    def transform(self, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        return np.column_stack([self.lower(x), self.upper(x)])

    def fit_transform(self, d, d_prime, x=None):
        self.fit(d, d_prime)
        if x is None:
            x = np.linspace(0.0, 1.0, 501)
        return self.transform(x)

    def sup_width(self, x_min=None):
        check_is_fitted(self, "band_")
        return sup_width(self.band_, x_min)
