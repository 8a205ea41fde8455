"""Monte Carlo validation of the auditor and the band constructor.

Every trial draws fresh samples with seed ``derive_seed(master_seed, i)``; the
trials are independent and may run on a thread pool, and results are always
reduced in trial order so the output does not depend on the pool size.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtr
from scipy.stats import binom

from ._validation import DomainError, check_alpha, check_positive_int
from .cipa import SamplePair, audit
from .cipb import build_band, eval_lower, eval_upper, sup_width
from .conformal import epsilon_audit
from .mechanisms import GaussianShift, IntervalMixture, MechanismPair, TruncatedGaussianPair
from .rng import derive_seed
from .tradeoff import TradeoffFn, TruncatedTradeoff, exact_tradeoff, pointwise_leq

__all__ = [
    "Mode",
    "ConfigurationError",
    "ExperimentConfig",
    "ExperimentResult",
    "TypeIIBound",
    "wilson_interval",
    "type2_bound",
    "run_experiment",
    "persist",
    "load_result",
    "f0_demo",
]

WILSON_Z = 1.959963984540054
COVERAGE_GRID = np.linspace(0.0, 1.0, 501)
CONTAINMENT_TOL = 1e-12


class Mode(str, Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    COVERAGE = "Coverage"
    WIDTH = "Width"
    IMPOSSIBILITY = "ImpossibilityDemo"
    LOWER_BAND = "LowerBandDemo"


class ConfigurationError(ValueError):
    """The experiment configuration is inconsistent (mode vs. pair or claim)."""


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # At p = 0 or 1 the closed form cancels to rounding noise; pin it to p.
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def _median_interval(values: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    # Distribution-free interval for the median from order statistics.
    v = np.sort(values)
    n = v.size
    j = int(binom.ppf((1 - level) / 2, n, 0.5))
    return float(v[max(j - 1, 0)]), float(v[min(n - j, n - 1)])


@dataclass(frozen=True)
class TypeIIBound:
    delta_r: float
    beta: float


def _type2_feasible(f, g, n, eps, delta) -> bool:
    k = np.arange(1, n + 1)
    lhs = np.asarray(g(np.maximum((k - 1) / (n + 1) - delta, 0.0)))
    rhs = np.maximum(
        np.asarray(f(np.minimum(k / (n + 1) + eps, 1.0))) - 1.0 / (n + 1) - eps - delta, 0.0
    )
    return bool(np.all(lhs <= rhs))


def type2_bound(f: TradeoffFn, g: TruncatedTradeoff, n: int, alpha: float, tol: float = 1e-9) -> TypeIIBound:
    """Type II error bound ``min{4n exp(-2n delta_r^2), 1}`` relative to ``g_r``.

    ``delta_r`` is the largest ``delta`` in [0, 1] such that for every
    ``k = 1..n``

        g_r(max{(k-1)/(n+1) - delta, 0})
            <= max{f(min{k/(n+1) + eps, 1}) - 1/(n+1) - eps - delta, 0}

    with the auditing radius ``eps``. Feasibility is monotone in ``delta``
    (the left side grows and the right side shrinks), so bisection finds it.
    An empty feasible set gives ``delta_r = 0``; a search that never becomes
    infeasible is capped at 1.
    """
    n = check_positive_int(n, "n")
    eps = epsilon_audit(alpha, n)
    if not isinstance(g, TruncatedTradeoff):
        raise DomainError("the relative function must be a TruncatedTradeoff")
    if not _type2_feasible(f, g, n, eps, 0.0):
        delta = 0.0
    elif _type2_feasible(f, g, n, eps, 1.0):
        delta = 1.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _type2_feasible(f, g, n, eps, mid):
                lo = mid
            else:
                hi = mid
        delta = lo
    beta = min(4.0 * n * math.exp(-2.0 * n * delta * delta), 1.0)
    return TypeIIBound(delta, beta)


@dataclass
class ExperimentConfig:
    pair: MechanismPair
    mode: Mode | str
    alpha: float
    n: int
    trials: int
    master_seed: int = 0xC0FFEE
    claim_f: TradeoffFn | None = None
    relative_g: TruncatedTradeoff | None = None
    keep_records: bool = False
    width_x_min: float | None = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.alpha = check_alpha(self.alpha)
        self.n = check_positive_int(self.n, "n")
        self.trials = check_positive_int(self.trials, "trials")
        if self.mode in (Mode.TYPE_I, Mode.TYPE_II, Mode.IMPOSSIBILITY) and self.claim_f is None:
            raise ConfigurationError(f"{self.mode.value} needs a claimed trade-off function")
        if self.mode is Mode.TYPE_II and self.relative_g is None:
            raise ConfigurationError("TypeII needs a truncated relative trade-off function")
        if self.mode in (Mode.IMPOSSIBILITY, Mode.LOWER_BAND) and not isinstance(self.pair, IntervalMixture):
            raise ConfigurationError(f"{self.mode.value} runs on an interval-mixture pair")

    def echo(self) -> dict:
        return {
            "pair": self.pair.spec,
            "mode": self.mode.value,
            "alpha": self.alpha,
            "n": self.n,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "claim_f": None if self.claim_f is None else self.claim_f.spec,
            "relative_g": None if self.relative_g is None else self.relative_g.spec,
            "width_x_min": self.width_x_min,
        }


@dataclass
class ExperimentResult:
    mode: str
    alpha: float
    n: int
    trials: int
    seed: int
    rate: float
    wilson_ci: tuple[float, float]
    bound: float | None = None
    runtime_ms: int = 0
    extras: dict = field(default_factory=dict)
    records: list | None = None
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "alpha": self.alpha,
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "rate": self.rate,
            "wilson_lo": self.wilson_ci[0],
            "wilson_hi": self.wilson_ci[1],
            "bound": self.bound,
            "runtime_ms": self.runtime_ms,
            "extras": self.extras,
            "config_echo": self.config_echo,
        }
        if self.records is not None:
            out["records"] = self.records
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        return cls(
            mode=data["mode"],
            alpha=data["alpha"],
            n=data["n"],
            trials=data["trials"],
            seed=data["seed"],
            rate=data["rate"],
            wilson_ci=(data["wilson_lo"], data["wilson_hi"]),
            bound=data["bound"],
            runtime_ms=data["runtime_ms"],
            extras=data.get("extras", {}),
            records=data.get("records"),
            config_echo=data.get("config_echo", {}),
        )


def _draw(pair, n, seed):
    return SamplePair(pair.sample("D", n, seed), pair.sample("Dprime", n, seed))


def _contains(band, truth) -> tuple[int, int]:
    f = np.asarray(truth(COVERAGE_GRID))
    up = f <= eval_upper(band, COVERAGE_GRID) + CONTAINMENT_TOL
    lo = f >= eval_lower(band, COVERAGE_GRID) - CONTAINMENT_TOL
    return int(np.all(up & lo)), int(np.all(up))


def _trial_fn(cfg: ExperimentConfig, auditor=None) -> Callable[[int], tuple]:
    pair, n, alpha = cfg.pair, cfg.n, cfg.alpha
    mode = cfg.mode
    if mode is Mode.TYPE_I:
        return lambda seed: (int(not audit(_draw(pair, n, seed), cfg.claim_f, alpha).is_point_dp),)
    if mode is Mode.TYPE_II:
        return lambda seed: (int(audit(_draw(pair, n, seed), cfg.claim_f, alpha).is_point_dp),)
    if mode is Mode.COVERAGE:
        truth = exact_tradeoff(pair)
        return lambda seed: _contains(build_band(_draw(pair, n, seed), alpha), truth)
    if mode is Mode.WIDTH:
        return lambda seed: (sup_width(build_band(_draw(pair, n, seed), alpha), cfg.width_x_min),)

    # Both demos compare D' ~ mixture with D' ~ Q on the same D sample.
    def arms(seed):
        d = pair.sample("D", n, seed)
        alt = SamplePair(d, pair.sample("Dprime", n, seed))
        null = SamplePair(d, pair.sample("D", n, derive_seed(seed, 1)))
        return alt, null

    if mode is Mode.IMPOSSIBILITY:
        decide = auditor or (lambda sp: audit(sp, cfg.claim_f, alpha).is_point_dp)
        return lambda seed: tuple(int(not decide(sp)) for sp in arms(seed))
    threshold = 1.0 / pair.m
    return lambda seed: tuple(
        int(np.nanmax(build_band(sp, alpha).lower_pts[1:, 1]) > threshold) for sp in arms(seed)
    )


def run_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    record_runtime: bool = False,
    auditor: Callable[[SamplePair], bool] | None = None,
) -> ExperimentResult:
    """Run ``config.trials`` independent trials and summarise them.

    ``rate`` is the rejection frequency (TypeI), acceptance frequency
    (TypeII), full-band containment frequency (Coverage), median sup-width
    (Width), or the frequency under the mixture arm (demos; the same-law arm
    is reported in ``extras``). ``auditor`` replaces the conformal auditor
    in the impossibility demonstration; it returns True to accept.
    """
    cfg = config
    mode = cfg.mode
    if mode is Mode.COVERAGE:
        try:
            exact_tradeoff(cfg.pair)
        except NotImplementedError as exc:
            raise ConfigurationError(f"Coverage needs an analytic trade-off: {exc}") from None
    if mode is Mode.TYPE_II:
        try:
            truth = exact_tradeoff(cfg.pair)
        except NotImplementedError:
            truth = None
        if truth is not None and pointwise_leq(cfg.claim_f, truth):
            raise ConfigurationError("TypeII needs a pair that violates the claimed trade-off function")

    start = time.perf_counter()
    seeds = [derive_seed(cfg.master_seed, i) for i in range(cfg.trials)]
    fn = _trial_fn(cfg, auditor)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(fn, seeds))
    else:
        outcomes = [fn(s) for s in seeds]
    elapsed = int(round((time.perf_counter() - start) * 1000)) if record_runtime else 0

    first = np.array([o[0] for o in outcomes], dtype=np.float64)
    extras: dict = {}
    bound = None
    if mode is Mode.WIDTH:
        rate = float(np.median(first))
        ci = _median_interval(first)
        extras["statistic"] = "median_sup_width"
    else:
        hits = int(first.sum())
        rate = hits / cfg.trials
        ci = wilson_interval(hits, cfg.trials)
    if mode is Mode.TYPE_I:
        bound = cfg.alpha
    elif mode is Mode.TYPE_II:
        b = type2_bound(cfg.claim_f, cfg.relative_g, cfg.n, cfg.alpha)
        bound = b.beta
        extras["delta_r"] = b.delta_r
    elif mode is Mode.COVERAGE:
        bound = 1.0 - cfg.alpha
        up_hits = sum(o[1] for o in outcomes)
        extras["upper_rate"] = up_hits / cfg.trials
        extras["upper_wilson"] = list(wilson_interval(up_hits, cfg.trials))
        extras["upper_bound"] = 1.0 - cfg.alpha / 2
    elif mode in (Mode.IMPOSSIBILITY, Mode.LOWER_BAND):
        null_hits = sum(o[1] for o in outcomes)
        extras["null_rate"] = null_hits / cfg.trials
        extras["null_wilson"] = list(wilson_interval(null_hits, cfg.trials))
        extras["difference"] = abs(rate - extras["null_rate"])
        extras["tradeoff_sup"] = 1.0 / cfg.pair.m

    records = None
    if cfg.keep_records:
        records = [
            {"trial": i, "seed": s, "outcome": ";".join(repr(v) for v in o)}
            for i, (s, o) in enumerate(zip(seeds, outcomes))
        ]
    return ExperimentResult(
        mode=mode.value,
        alpha=cfg.alpha,
        n=cfg.n,
        trials=cfg.trials,
        seed=cfg.master_seed,
        rate=rate,
        wilson_ci=(float(ci[0]), float(ci[1])),
        bound=bound,
        runtime_ms=elapsed,
        extras=extras,
        records=records,
        config_echo=cfg.echo(),
    )


def result_json(result: ExperimentResult) -> str:
    return json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"


def result_csv(result: ExperimentResult) -> str:
    if result.records is None:
        raise ValueError("CSV output needs per-trial records (keep_records=True)")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "seed", "outcome"])
    for rec in result.records:
        writer.writerow([rec["trial"], rec["seed"], rec["outcome"]])
    return buf.getvalue()


def persist(result: ExperimentResult, path, format: str = "JSON") -> None:
    """Write ``result`` as JSON (summary) or CSV (one row per trial)."""
    fmt = format.upper()
    if fmt == "JSON":
        text = result_json(result)
    elif fmt == "CSV":
        text = result_csv(result)
    else:
        raise ValueError(f"unknown format {format!r}; use JSON or CSV")
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc


def load_result(path) -> ExperimentResult:
    with open(path, encoding="utf-8") as fh:
        return ExperimentResult.from_dict(json.load(fh))


def f0_demo(sigma: float, n: int, alpha: float, trials: int, seed: int, threads: int = 1) -> dict:
    """Band behaviour at ``x = 0`` for a Gaussian pair and its truncation.

    ``N(-1, s^2)`` vs ``N(1, s^2)`` has ``f(0) = 1`` while the truncated pair
    has ``f(0) = 0``, yet each side differs by at most ``Phi(-1/s)`` in total
    variation, so no procedure can tell the two values of ``f(0)`` apart.
    Reports, for both pairs, how often the lower band certifies
    ``f(0) > 0`` and the mean lower-band value at 0.
    """
    full = GaussianShift(2.0, sigma)
    trunc = TruncatedGaussianPair(sigma)
    seeds = [derive_seed(seed, i) for i in range(trials)]

    def one(pair):
        def run(s):
            return float(eval_lower(build_band(_draw(pair, n, s), alpha), 0.0))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return np.array(list(pool.map(run, seeds)))
        return np.array([run(s) for s in seeds])

    low_full, low_trunc = one(full), one(trunc)
    tv_point = float(ndtr(-1.0 / sigma))
    return {
        "sigma": sigma,
        "n": n,
        "trials": trials,
        "true_f0": {"gaussian": 1.0, "truncated": 0.0},
        "lower0_positive_rate": {
            "gaussian": float(np.mean(low_full > 0)),
            "truncated": float(np.mean(low_trunc > 0)),
        },
        "lower0_mean": {"gaussian": float(low_full.mean()), "truncated": float(low_trunc.mean())},
        "tv_per_output": tv_point,
        "tv_dataset_bound": min(1.0, 2 * n * tv_point),
    }
