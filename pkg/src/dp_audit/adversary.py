"""Counterexample instances behind the impossibility results.

The interval mixture splits [0, 1) into ``m^2`` cells ``I_i = [(i-1)/m^2, i/m^2)``
and picks ``m`` of them; the law ``P_j`` that is uniform on the chosen cells
has ``T(P_j, U[0,1))(0) = 1/m`` yet, averaged over the choice of cells, an
``n``-sample from it is indistinguishable from an ``n``-sample of ``U[0, 1)``
unless two points land in the same cell (probability about ``C(n,2)/m``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_positive_int
from .mechanisms import TruncatedGaussianPair, UniformShift
from .rng import CounterRNG, derive_seed

__all__ = [
    "IntervalMixtureInstance",
    "build_interval_mixture",
    "sample_instance",
    "sample_qstar_dataset",
    "interval_index",
    "mixture_tradeoff_sup",
    "truncation_pair",
    "f0_pair",
]


@dataclass(frozen=True)
class IntervalMixtureInstance:
    m: int
    chosen_intervals: tuple[int, ...]

    @property
    def n_cells(self) -> int:
        return self.m * self.m

    def contains(self, x) -> np.ndarray:
        """Whether each point falls in one of the chosen cells."""
        idx = interval_index(x, self.m)
        return np.isin(idx, np.asarray(self.chosen_intervals))


def build_interval_mixture(m: int, seed: int) -> IntervalMixtureInstance:
    """Uniformly random ``m``-subset of ``{1, ..., m^2}`` via Floyd's algorithm."""
    m = check_positive_int(m, "m", minimum=2)
    cells = m * m
    rng = CounterRNG.from_seed(seed, 0xF10D)
    # Floyd: for j = N-m+1..N draw t in [1, j]; keep t, or j if t was taken.
    js = np.arange(cells - m + 1, cells + 1)
    raw = rng.bits(m) >> np.uint64(32)
    draws = ((raw * js.astype(np.uint64)) >> np.uint64(32)).astype(np.int64) + 1
    chosen: set[int] = set()
    for j, t in zip(js.tolist(), draws.tolist()):
        chosen.add(j if t in chosen else t)
    return IntervalMixtureInstance(m, tuple(sorted(chosen)))


def interval_index(x, m: int) -> np.ndarray:
    """1-based cell index of each point of [0, 1)."""
    return np.floor(np.asarray(x, dtype=np.float64) * (m * m)).astype(np.int64) + 1


def sample_instance(inst: IntervalMixtureInstance, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws from the law uniform on the chosen cells."""
    n = check_positive_int(n, "n")
    rng = CounterRNG.from_seed(seed, 0x5A3)
    chosen = np.asarray(inst.chosen_intervals, dtype=np.int64)
    pick = chosen[rng.integers(inst.m, n)]
    cells = float(inst.n_cells)
    x = (pick - 1 + rng.uniform(n)) / cells
    # (i - 1 + u) / m^2 can round up onto the next cell boundary.
    return np.minimum(x, np.nextafter(pick / cells, 0.0))


def sample_qstar_dataset(m: int, n: int, seed: int) -> np.ndarray:
    """One dataset from the mixture: a fresh random cell set, then ``n`` draws."""
    inst = build_interval_mixture(m, derive_seed(seed, 0))
    return sample_instance(inst, n, derive_seed(seed, 1))


def mixture_tradeoff_sup(m: int) -> float:
    """``||T(P_j, Q)||_inf = T(P_j, Q)(0) = m / m^2``."""
    m = check_positive_int(m, "m", minimum=2)
    return m / (m * m)


def truncation_pair(zeta: float) -> UniformShift:
    """``U(0, 1)`` against ``U(0, 1 - zeta)``: close in TV, trade-off 0 beyond ``1 - zeta``."""
    if not 0.0 < zeta < 1.0:
        raise DomainError(f"zeta must be in (0, 1), got {zeta}")
    return UniformShift(zeta)


def f0_pair(sigma: float) -> TruncatedGaussianPair:
    """Truncated Gaussians whose trade-off is 0 although ``f(0) = 1`` untruncated."""
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    return TruncatedGaussianPair(sigma)
