import math
from itertools import combinations

import numpy as np
import pytest
from scipy import stats

from dp_audit._validation import DomainError
from dp_audit.adversary import (
    build_interval_mixture,
    f0_pair,
    interval_index,
    mixture_tradeoff_sup,
    sample_instance,
    sample_qstar_dataset,
    truncation_pair,
)
from dp_audit.mechanisms import TruncatedGaussianPair, UniformShift
from dp_audit.tradeoff import Zero, exact_tradeoff


def test_m2_subsets_are_valid_and_all_reachable():
    seen = set()
    for seed in range(400):
        inst = build_interval_mixture(2, seed)
        assert len(inst.chosen_intervals) == 2
        assert set(inst.chosen_intervals) <= {1, 2, 3, 4}
        seen.add(inst.chosen_intervals)
    assert seen == set(combinations(range(1, 5), 2))


def test_subset_choice_is_uniform():
    counts = {}
    trials = 6000
    for seed in range(trials):
        key = build_interval_mixture(2, seed).chosen_intervals
        counts[key] = counts.get(key, 0) + 1
    _, p = stats.chisquare(list(counts.values()))
    assert p > 1e-4


def test_deterministic_and_distinct():
    a = build_interval_mixture(30, 123)
    assert a == build_interval_mixture(30, 123)
    assert len(set(a.chosen_intervals)) == 30
    assert all(1 <= i <= 900 for i in a.chosen_intervals)


def test_m_domain():
    with pytest.raises(DomainError):
        build_interval_mixture(1, 0)
    with pytest.raises(DomainError):
        mixture_tradeoff_sup(1)


def test_tradeoff_sup():
    assert mixture_tradeoff_sup(2) == 0.5
    assert mixture_tradeoff_sup(400) == 1 / 400


def test_samples_stay_in_chosen_cells():
    for m in (2, 7, 50):
        inst = build_interval_mixture(m, m)
        x = sample_instance(inst, 20_000, 9)
        assert np.all((x >= 0) & (x < 1))
        assert np.all(inst.contains(x))


def test_boundary_rounding_stays_inside():
    # Large m makes (i - 1 + u) / m^2 round onto i / m^2 for u close to 1.
    inst = build_interval_mixture(3000, 1)
    x = sample_instance(inst, 200_000, 2)
    assert np.all(inst.contains(x))


def test_interval_index():
    assert interval_index([0.0, 0.249, 0.25, 0.999], 2).tolist() == [1, 1, 2, 4]


def test_collision_fraction():
    m, n, trials = 400, 3, 20_000
    hits = 0
    for t in range(trials):
        idx = interval_index(sample_qstar_dataset(m, n, t), m)
        hits += len(set(idx.tolist())) < n
    expected = 1 - math.prod(1 - i / m for i in range(n))
    assert abs(hits / trials - expected) <= 3 / math.sqrt(trials)
    assert expected == pytest.approx(math.comb(n, 2) / m, rel=0.01)


def test_conditional_uniformity():
    m, n = 200, 2
    points = []
    for t in range(5000):
        x = sample_qstar_dataset(m, n, 10_000 + t)
        idx = interval_index(x, m)
        if len(set(idx.tolist())) == n:
            points.append(x)
    points = np.array(points)
    offsets = points * m * m - np.floor(points * m * m)
    for col in range(n):
        assert stats.kstest(points[:, col], "uniform").pvalue > 1e-3
        assert stats.kstest(offsets[:, col], "uniform").pvalue > 1e-3
    # Independence of the two coordinates: the product of uniforms has a known law.
    prod = points[:, 0] * points[:, 1]
    assert stats.kstest(prod, lambda z: z - z * np.log(z)).pvalue > 1e-3


def test_truncation_pair():
    assert truncation_pair(0.5) == UniformShift(0.5)
    f = exact_tradeoff(truncation_pair(0.3))
    xs = np.linspace(0.7, 1, 31)
    assert np.all(f(xs) == 0)
    with pytest.raises(DomainError):
        truncation_pair(1.0)


def test_f0_pair():
    assert f0_pair(2.0) == TruncatedGaussianPair(2.0)
    assert exact_tradeoff(f0_pair(2.0)) == Zero()
    with pytest.raises(DomainError):
        f0_pair(0)
