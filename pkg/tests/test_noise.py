import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import stats

from graphcert.errors import InvalidParameter
from graphcert.noise import (BLOCK, SmoothingParams, beta_from_epsilon, channel_dp_ratio,
                             channel_table, epsilon_from_beta, sample_noise, sample_noise_range)


def test_nearly_noiseless_channel():
    ones = sum(int(sample_noise(64, 0.999999, seed=3, index=i).sum()) for i in range(100))
    assert ones <= 1


def test_flip_rate():
    bits = sample_noise(10000, 0.7, seed=11)
    assert abs(bits.mean() - 0.3) <= 3 * math.sqrt(0.21 / 10000)


def test_counter_based_determinism():
    full = sample_noise_range(37, 0.8, seed=99, start=0, count=4 * BLOCK + 5)
    # the same rows, produced as if by workers owning different slices
    for start, count in [(0, 1), (BLOCK - 2, 5), (2 * BLOCK + 7, BLOCK), (700, 73)]:
        part = sample_noise_range(37, 0.8, seed=99, start=start, count=count)
        assert np.array_equal(part, full[start:start + count])
    for i in (0, 1, BLOCK, 3 * BLOCK + 4):
        assert np.array_equal(sample_noise(37, 0.8, seed=99, index=i), full[i])


def test_streams_and_seeds_differ():
    a = sample_noise_range(64, 0.7, seed=1, start=0, count=10)
    assert not np.array_equal(a, sample_noise_range(64, 0.7, seed=2, start=0, count=10))
    assert not np.array_equal(a, sample_noise_range(64, 0.7, seed=1, start=0, count=10, stream=1))


@pytest.mark.parametrize("beta", [0.5, 1.0, 0.2, 1.5])
def test_beta_range(beta):
    with pytest.raises(InvalidParameter):
        SmoothingParams(beta)
    with pytest.raises(InvalidParameter):
        sample_noise(4, beta, seed=0)


def test_epsilon_examples():
    mpmath.mp.dps = 40
    eps9 = mpmath.log(9)
    assert beta_from_epsilon(float(eps9)) == pytest.approx(float(1 - 1 / (1 + mpmath.e**eps9)),
                                                            abs=1e-15)
    assert beta_from_epsilon(math.log(9)) == pytest.approx(0.9, abs=1e-15)
    assert epsilon_from_beta(0.7) == pytest.approx(float(mpmath.log(mpmath.mpf(7) / 3)), abs=1e-15)
    assert epsilon_from_beta(0.7) == pytest.approx(0.8472979, abs=1e-7)


@pytest.mark.parametrize("beta", [0.5000001, 0.6, 0.7, 0.9, 0.99, 0.999999])
def test_round_trip_and_flip_prob(beta):
    p = SmoothingParams(beta)
    assert beta_from_epsilon(p.epsilon) == pytest.approx(beta, abs=1e-12)
    assert p.flip_prob == pytest.approx(1 / (1 + math.exp(p.epsilon)), abs=1e-12)
    assert SmoothingParams.from_epsilon(p.epsilon).beta == pytest.approx(beta, abs=1e-12)


@pytest.mark.parametrize("beta", [0.6, 0.7, 0.9, 0.99])
def test_channel_is_epsilon_dp(beta):
    table = channel_table(beta)
    ratios = [table[(c, out)] / table[(1 - c, out)] for c in (0, 1) for out in (0, 1)]
    assert max(ratios) == pytest.approx(math.exp(epsilon_from_beta(beta)), rel=1e-12)
    assert channel_dp_ratio(beta) == pytest.approx(beta / (1 - beta), rel=1e-12)
    exact = Fraction(repr(beta))
    assert max(exact / (1 - exact), (1 - exact) / exact) == exact / (1 - exact)


def test_bits_pairwise_independent():
    rows = sample_noise_range(8, 0.7, seed=5, start=0, count=20000)
    for i, j in [(0, 1), (2, 7), (3, 4)]:
        table = np.zeros((2, 2))
        np.add.at(table, (rows[:, i], rows[:, j]), 1)
        assert stats.chi2_contingency(table).pvalue > 1e-3
