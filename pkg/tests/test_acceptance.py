"""End-to-end acceptance checks at the stated Monte Carlo scales.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated
in the terminal summary.
"""

import math

import numpy as np
import pytest

from dp_audit.cipa import SamplePair, audit
from dp_audit.cipb import build_band
from dp_audit.conformal import beta_tail_exact, coverage_exceedance, hoeffding_bound
from dp_audit.harness import (
    ExperimentConfig,
    Mode,
    result_json,
    run_experiment,
    type2_bound,
    wilson_interval,
)
from dp_audit.mechanisms import GaussianShift, IntervalMixture
from dp_audit.tradeoff import GDP, EpsDelta, Identity, TruncatedTradeoff, Zero, exact_tradeoff

from conftest import naive_counts
from test_cipa import naive_audit
from test_cipb import naive_band

SEED = 0xC0FFEE
POWER_LADDER = (200, 1000, 5000)
# Frozen from one pilot run: power is already 1.0 at the smallest ladder size.
N_STAR = 200
RELATIVE_G = TruncatedTradeoff(exact_tradeoff(GaussianShift(3, 1)), 0.8)


def type1_config():
    return ExperimentConfig(GaussianShift(1, 1), Mode.TYPE_I, 0.05, 500, 2000, SEED, claim_f=GDP(1))


def type2_config(n):
    return ExperimentConfig(GaussianShift(3, 1), Mode.TYPE_II, 0.05, n, 500, SEED,
                            claim_f=GDP(1), relative_g=RELATIVE_G)


def coverage_config():
    return ExperimentConfig(GaussianShift(1, 1), Mode.COVERAGE, 0.1, 1000, 1000, SEED)


def width_config(n):
    return ExperimentConfig(GaussianShift(1, 1), Mode.WIDTH, 0.1, n, 100, SEED)


def impossibility_config():
    return ExperimentConfig(IntervalMixture(400), Mode.IMPOSSIBILITY, 0.2, 2, 2000, SEED,
                            claim_f=Identity())


ALL_CONFIGS = {
    "type1": type1_config,
    **{f"type2_n{n}": (lambda n=n: type2_config(n)) for n in sorted({*POWER_LADDER, N_STAR})},
    "coverage": coverage_config,
    **{f"width_n{n}": (lambda n=n: width_config(n)) for n in (500, 2000, 8000)},
    "impossibility": impossibility_config,
}


@pytest.fixture(scope="module")
def results():
    """Every experiment run once, single-threaded."""
    return {name: run_experiment(make(), threads=1) for name, make in ALL_CONFIGS.items()}


def test_criterion_1_type_one_control(results, report):
    res = results["type1"]
    ok = res.wilson_ci[0] <= 0.05
    report(1, "type I control", ok, f"rate {res.rate:.4f}, Wilson [{res.wilson_ci[0]:.4f}, "
           f"{res.wilson_ci[1]:.4f}] vs alpha 0.05")
    assert ok


def test_criterion_1_runtime():
    import time

    start = time.perf_counter()
    run_experiment(type1_config(), threads=1)
    assert time.perf_counter() - start < 60


def test_criterion_2_power_growth(results, report):
    power, lo, hi = [], [], []
    for n in POWER_LADDER:
        res = results[f"type2_n{n}"]
        rejections = round((1 - res.rate) * res.trials)
        power.append(rejections / res.trials)
        w = wilson_interval(rejections, res.trials)
        lo.append(w[0])
        hi.append(w[1])
    monotone = all(hi[i + 1] >= lo[i] for i in range(len(POWER_LADDER) - 1))
    star = 1 - results[f"type2_n{N_STAR}"].rate
    ok = monotone and star >= 0.9
    report(2, "power growth", ok, f"power {power} at n={list(POWER_LADDER)}, "
           f"power {star:.4f} at pinned n*={N_STAR}")
    assert ok


def test_criterion_3_type_two_bound(results, report):
    bound = type2_bound(GDP(1), RELATIVE_G, 5000, 0.05)
    res = results["type2_n5000"]
    ok = bound.beta >= res.wilson_ci[1]
    report(3, "type II bound consistency", ok, f"beta {bound.beta:.6g} (delta_r {bound.delta_r:.6g}) "
           f">= acceptance Wilson upper {res.wilson_ci[1]:.4f}")
    assert ok


def test_criterion_4_band_coverage(results, report):
    res = results["coverage"]
    full_lo = res.wilson_ci[0]
    upper_lo = res.extras["upper_wilson"][0]
    ok = full_lo >= 0.90 - 0.03 and upper_lo >= 0.95 - 0.02
    report(4, "band coverage", ok, f"full {res.rate:.4f} (Wilson lower {full_lo:.4f}), "
           f"upper {res.extras['upper_rate']:.4f} (Wilson lower {upper_lo:.4f})")
    assert ok


def test_criterion_5_band_shrinkage(results, report):
    medians = [results[f"width_n{n}"].rate for n in (500, 2000, 8000)]
    ok = medians[0] > medians[1] > medians[2]
    report(5, "band shrinkage", ok, "median sup widths " + ", ".join(f"{m:.4f}" for m in medians))
    assert ok


def test_criterion_6_conformal_bound(report):
    n, reps = 200, 2000
    ks, deltas = [20, 100, 180], [0.05, 0.1]
    freq = coverage_exceedance(n, ks, deltas, reps, SEED)
    slack = 3 / math.sqrt(reps)
    worst = -math.inf
    ok = True
    for i, k in enumerate(ks):
        for j, delta in enumerate(deltas):
            tail = beta_tail_exact(k, n, k / (n + 1) - delta)
            worst = max(worst, freq[i, j] - tail)
            ok &= freq[i, j] <= tail + slack
            ok &= tail <= hoeffding_bound(n, delta)
    report(6, "conformal bound", ok, f"max(freq - beta tail) = {worst:.4f} <= {slack:.4f}")
    assert ok


def test_criterion_7_impossibility(results, report):
    res = results["impossibility"]
    null_ci = res.extras["null_wilson"]
    allowed = 0.05 + (res.wilson_ci[1] - res.wilson_ci[0]) / 2 + (null_ci[1] - null_ci[0]) / 2
    ok = res.extras["difference"] <= allowed and res.extras["tradeoff_sup"] == 1 / 400
    report(7, "impossibility demonstration", ok, f"rates {res.rate:.4f} vs {res.extras['null_rate']:.4f}, "
           f"difference {res.extras['difference']:.4f} <= {allowed:.4f}, sup T = 1/400")
    assert ok


def test_criterion_8_oracle_equivalence(report):
    rng = np.random.default_rng(SEED)
    claims = [Identity(), Zero(), GDP(0.5), GDP(1), GDP(2), EpsDelta(1, 0.05)]
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        if rng.random() < 0.25:
            d, dp = rng.integers(0, 6, n).astype(float), rng.integers(0, 6, n).astype(float)
        else:
            d, dp = rng.normal(size=n), rng.normal(rng.uniform(-5, 5), rng.uniform(0.5, 2), size=n)
        alpha = float(rng.uniform(0.01, 0.99))
        f = claims[int(rng.integers(len(claims)))]
        pair = SamplePair(d, dp)
        v = audit(pair, f, alpha)
        ok_naive, k, side = naive_audit(d.tolist(), dp.tolist(), f, alpha)
        same = v.is_point_dp == ok_naive and (ok_naive or (v.witness.k, v.witness.side) == (k, side))
        band = build_band(pair, alpha)
        upper, lower = naive_band(d.tolist(), dp.tolist(), alpha)
        lower_got = [[x, None if math.isnan(y) else y] for x, y in band.lower_pts.tolist()]
        same &= band.upper_pts.tolist() == [list(p) for p in upper]
        same &= lower_got == [list(p) for p in lower]
        mismatches += not same
    assert naive_counts([1, 4, 9], [2, 3, 10], 2) == (2, 3)
    ok = mismatches == 0
    report(8, "oracle equivalence", ok, f"{mismatches} mismatches in 1000 instances")
    assert ok


def test_criterion_9_determinism(results, report):
    differing = []
    for name, make in ALL_CONFIGS.items():
        base = result_json(results[name])
        again = result_json(run_experiment(make(), threads=1))
        threaded = result_json(run_experiment(make(), threads=4))
        if not (base == again == threaded):
            differing.append(name)
    b1 = type2_bound(GDP(1), RELATIVE_G, 5000, 0.05)
    b2 = type2_bound(GDP(1), RELATIVE_G, 5000, 0.05)
    ok = not differing and b1 == b2
    report(9, "determinism", ok, f"{len(ALL_CONFIGS)} experiments byte-identical across reruns and "
           f"threads 1/4" if ok else f"differing: {differing}")
    assert ok
