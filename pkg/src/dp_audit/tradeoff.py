"""Trade-off functions.

A trade-off function maps a type I error budget ``x`` in [0, 1] to the
smallest type II error achievable by any test at that level. Every family
here is convex, non-increasing, bounded by ``1 - x`` and vanishes at 1.

All functions accept scalars or arrays. Arguments are clamped to [0, 1]
before evaluation, so callers may pass expressions such as
``k / (n + 1) + eps`` that overshoot the unit interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np
from scipy.special import ndtr, ndtri

from ._validation import DomainError, check_finite

__all__ = [
    "TradeoffFn",
    "Identity",
    "Zero",
    "GDP",
    "EpsDelta",
    "Laplace",
    "PiecewiseLinear",
    "UniformShift",
    "TruncatedTradeoff",
    "eval_tradeoff",
    "exact_tradeoff",
    "pointwise_leq",
    "parse_tradeoff",
]


def _as_clamped(x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("trade-off functions are only defined for finite arguments")
    return np.clip(arr, 0.0, 1.0)


class TradeoffFn:
    """Base class. Subclasses implement ``_raw`` on arguments already in [0, 1]."""

    family: ClassVar[str] = ""

    def __call__(self, x):
        arr = _as_clamped(x)
        out = np.clip(self._raw(arr), 0.0, 1.0)
        if out.ndim == 0:
            return float(out)
        return out

    def _raw(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        """The textual form accepted by :func:`parse_tradeoff`."""
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(TradeoffFn):
    """Perfect privacy: ``1 - x``."""

    family: ClassVar[str] = "identity"

    def _raw(self, x):
        return 1.0 - x

    @property
    def spec(self):
        return "identity"


@dataclass(frozen=True)
class Zero(TradeoffFn):
    """No privacy at all; imposes no constraint when claimed."""

    family: ClassVar[str] = "zero"

    def _raw(self, x):
        return np.zeros_like(x)

    @property
    def spec(self):
        return "zero"


@dataclass(frozen=True)
class GDP(TradeoffFn):
    """Gaussian trade-off ``Phi(Phi^{-1}(1 - x) - mu)``."""

    mu: float
    family: ClassVar[str] = "gdp"

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu < 0:
            raise DomainError(f"GDP mu must be a finite value >= 0, got {self.mu}")

    def _raw(self, x):
        if self.mu == 0:
            return 1.0 - x
        # Phi^{-1}(1 - x) == -Phi^{-1}(x), which keeps precision for small x.
        return ndtr(-ndtri(x) - self.mu)

    @property
    def spec(self):
        return f"gdp:mu={self.mu!r}"


@dataclass(frozen=True)
class EpsDelta(TradeoffFn):
    """Classical (eps, delta)-DP trade-off ``max{0, 1-d-e^eps x, e^-eps (1-d-x)}``."""

    eps: float
    delta: float
    family: ClassVar[str] = "epsdelta"

    def __post_init__(self):
        if not math.isfinite(self.eps) or self.eps < 0:
            raise DomainError(f"eps must be a finite value >= 0, got {self.eps}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must be in [0, 1], got {self.delta}")

    def _raw(self, x):
        a = 1.0 - self.delta - math.exp(self.eps) * x
        b = math.exp(-self.eps) * (1.0 - self.delta - x)
        return np.maximum(0.0, np.maximum(a, b))

    @property
    def spec(self):
        return f"epsdelta:eps={self.eps!r},delta={self.delta!r}"


@dataclass(frozen=True)
class Laplace(TradeoffFn):
    """Exact trade-off between two Laplace laws whose shift/scale ratio is ``eps``.

    Piecewise: ``1 - e^eps x`` below ``e^-eps / 2``, ``e^-eps / (4x)`` up to
    1/2 and ``e^-eps (1 - x)`` above.
    """

    eps: float
    family: ClassVar[str] = "laplace"

    def __post_init__(self):
        if not math.isfinite(self.eps) or self.eps < 0:
            raise DomainError(f"eps must be a finite value >= 0, got {self.eps}")

    def _raw(self, x):
        c = math.exp(-self.eps)
        with np.errstate(divide="ignore"):
            middle = c / (4.0 * x)
        return np.where(
            x < c / 2.0, 1.0 - x / c, np.where(x <= 0.5, middle, c * (1.0 - x))
        )

    @property
    def spec(self):
        return f"laplace:eps={self.eps!r}"


@dataclass(frozen=True)
class UniformShift(TradeoffFn):
    """``T(U(0,1), U(0,1-zeta))(x) = (1 - x/(1-zeta))`` on ``[0, 1-zeta)``, else 0."""

    zeta: float
    family: ClassVar[str] = "unifshift"

    def __post_init__(self):
        if not 0.0 < self.zeta < 1.0:
            raise DomainError(f"zeta must be in (0, 1), got {self.zeta}")

    def _raw(self, x):
        width = 1.0 - self.zeta
        return np.where(x < width, 1.0 - x / width, 0.0)

    @property
    def spec(self):
        return f"unifshift:zeta={self.zeta!r}"


_SLOPE_RTOL = 1e-12


@dataclass(frozen=True, init=False)
class PiecewiseLinear(TradeoffFn):
    """Linear interpolation through knots from ``(0, y0)`` to ``(1, 0)``.

    Construction rejects knots that would not describe a trade-off function:
    abscissas must be strictly increasing and span [0, 1], ordinates must lie
    in [0, 1 - x] and end at 0, and slopes must be non-decreasing.
    """

    points: tuple
    family: ClassVar[str] = "pwl"

    def __init__(self, points):
        pts = tuple((float(x), float(y)) for x, y in points)
        _check_knots(pts)
        object.__setattr__(self, "points", pts)

    def _raw(self, x):
        xs, ys = zip(*self.points)
        return np.interp(x, xs, ys)

    @property
    def spec(self):
        inner = ";".join(f"{x!r},{y!r}" for x, y in self.points)
        return f"pwl[{inner}]"


def _check_knots(pts):
    if len(pts) < 2:
        raise DomainError("a piecewise-linear trade-off needs at least two knots")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if not all(math.isfinite(v) for v in xs + ys):
        raise DomainError("knots must be finite")
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise DomainError("knot abscissas must start at 0 and end at 1")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise DomainError("knot abscissas must be strictly increasing")
    if ys[-1] != 0.0:
        raise DomainError("a trade-off function must vanish at x = 1")
    for x, y in pts:
        if not 0.0 <= y <= 1.0 - x + 1e-12:
            raise DomainError(f"knot ({x}, {y}) lies outside 0 <= y <= 1 - x")
    slopes = [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in zip(pts, pts[1:])]
    if any(s > 0 for s in slopes):
        raise DomainError("knots must be non-increasing")
    for s0, s1 in zip(slopes, slopes[1:]):
        if s1 < s0 - _SLOPE_RTOL * max(1.0, abs(s0)):
            raise DomainError("knots must describe a convex function (slopes non-decreasing)")


@dataclass(frozen=True)
class TruncatedTradeoff(TradeoffFn):
    """``base`` on ``[0, r]`` and 0 on ``(r, 1]``.

    Used as the relative function in type II statements. The result is
    generally not convex, so it is not itself a trade-off function.
    """

    base: TradeoffFn
    r: float
    family: ClassVar[str] = "truncated"

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"truncation point r must be in (0, 1), got {self.r}")

    def _raw(self, x):
        return np.where(x <= self.r, self.base._raw(x), 0.0)

    @property
    def spec(self):
        return f"{self.base.spec}@r={self.r!r}"


def eval_tradeoff(f: TradeoffFn, x: float) -> float:
    """Evaluate ``f`` at ``x`` clamped to [0, 1]."""
    return float(f(check_finite(x, "x")))


def pointwise_leq(f, g, grid_size: int = 1001) -> bool:
    """True iff ``f(x) <= g(x)`` at every ``x = i / (grid_size - 1)``."""
    if grid_size < 2:
        raise DomainError(f"grid_size must be >= 2, got {grid_size}")
    grid = np.linspace(0.0, 1.0, grid_size)
    return bool(np.all(np.asarray(f(grid)) <= np.asarray(g(grid))))


def exact_tradeoff(pair) -> TradeoffFn:
    """Analytic ``T(P, P')`` for built-in mechanism pairs."""
    from . import mechanisms as mech

    if isinstance(pair, mech.GaussianShift):
        return GDP(abs(pair.mu) / pair.sigma)
    if isinstance(pair, mech.LaplaceShift):
        return Laplace(abs(pair.mu) / pair.b)
    if isinstance(pair, mech.UniformShift):
        return UniformShift(pair.zeta)
    if isinstance(pair, mech.TruncatedGaussianPair):
        return Zero()
    raise NotImplementedError(
        f"no analytic trade-off function is available for {type(pair).__name__}"
    )


def _parse_kv(body: str, required: tuple[str, ...], text: str) -> dict[str, float]:
    out = {}
    for item in filter(None, body.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"malformed parameter {item!r} in {text!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ValueError(f"parameter {key!r} in {text!r} is not a number") from None
    if set(out) != set(required):
        raise ValueError(f"{text!r} needs exactly the parameters {', '.join(required)}")
    return out


def read_knots(path) -> list[tuple[float, float]]:
    """Read ``x,y`` knots, one per line; blank lines and ``#`` comments skipped."""
    pts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                x, y = (float(v) for v in line.split(","))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'x,y', got {line!r}") from None
            pts.append((x, y))
    return pts


def parse_tradeoff(text: str) -> TradeoffFn:
    """Parse ``identity``, ``zero``, ``gdp:mu=..``, ``epsdelta:eps=..,delta=..``,
    ``laplace:eps=..``, ``pwl:<path>`` or ``unifshift:zeta=..``, with an optional
    ``@r=<float>`` suffix producing a :class:`TruncatedTradeoff`.
    """
    text = text.strip()
    r = None
    if "@" in text:
        text, _, suffix = text.rpartition("@")
        key, sep, val = suffix.partition("=")
        if key.strip() != "r" or not sep:
            raise ValueError(f"expected '@r=<float>' suffix, got '@{suffix}'")
        r = float(val)
    family, _, body = text.partition(":")
    family = family.strip().lower()
    if family == "identity" and not body:
        f = Identity()
    elif family == "zero" and not body:
        f = Zero()
    elif family == "gdp":
        f = GDP(**_parse_kv(body, ("mu",), text))
    elif family == "epsdelta":
        f = EpsDelta(**_parse_kv(body, ("eps", "delta"), text))
    elif family == "laplace":
        f = Laplace(**_parse_kv(body, ("eps",), text))
    elif family == "unifshift":
        f = UniformShift(**_parse_kv(body, ("zeta",), text))
    elif family == "pwl" and body:
        f = PiecewiseLinear(read_knots(Path(body)))
    else:
        raise ValueError(f"unrecognised trade-off specification {text!r}")
    return TruncatedTradeoff(f, r) if r is not None else f
