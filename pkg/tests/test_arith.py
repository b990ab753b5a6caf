import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhcvec.arith import (AlphaFamily, alpha_condition_check, block_index, block_indices, default_burn_in,
                          density_estimate, family_of_block, psi, r_k_window_union, r_k_windows, v2)


def test_psi_examples():
    assert psi(1) == 1 and psi(12) == 3
    assert [n for n in range(1, 21) if psi(n) == 2] == [2, 6, 10, 14, 18]
    with pytest.raises(ValueError):
        psi(0)


@given(st.integers(1, 2**62))
def test_v2_scalar_and_array_agree(n):
    k = v2(n)
    assert n % 2**k == 0 and (n >> k) & 1 == 1
    assert int(v2(np.array([n]))[0]) == k


def test_window_union_examples():
    got = r_k_window_union(1, 3, 2, 30)
    assert list(got) == list(range(3, 7)) + list(range(27, 31))
    assert list(r_k_window_union(2, 3, 2, 20)) == list(range(9, 19))
    assert r_k_window_union(1, 5, 2, 4).size == 0
    with pytest.raises(ValueError):
        r_k_windows(1, 3, 3, 100)


def test_block_index_examples():
    for m in (2, 3, 7):
        assert block_index(m, m) == (1, 1)
    assert block_index(80, 3) == (3, 1)
    assert block_index(81, 3) == (4, 3)
    with pytest.raises(ValueError):
        block_index(2, 3)


def test_block_index_huge_powers():
    for m in (3, 10, 11):
        for n in range(1, 40):
            assert block_index(m**n, m)[0] == n
            if n > 1:
                assert block_index(m**n - 1, m)[0] == n - 1


def test_block_indices_vectorised():
    j = np.arange(1, 200_000)
    for m in (2, 3, 5, 11):
        n = block_indices(j, m)
        assert np.all(m ** n <= j) and np.all(j < m ** (n + 1))


def test_family_of_block_wraparound():
    assert [int(family_of_block(n, 3)) for n in range(1, 9)] == [1, 2, 1, 3, 1, 2, 1, 1]
    assert family_of_block(8) == 4


def test_partition_small():
    N = 5000
    K = int(math.log2(N)) + 1
    seen = np.zeros(N + 1, int)
    for k in range(1, K + 1):
        n = np.arange(1, N + 1)
        seen[1:] += psi(n) == k
    assert np.all(seen[1:] == 1)


def test_density_examples():
    ev = density_estimate(lambda n: n % 2 == 0, 10**4, 100)
    assert ev.final_ratio == pytest.approx(0.5, abs=1e-3)
    sq = np.arange(1, 1001) ** 2
    assert density_estimate(sq, 10**6).final_ratio <= 1.1e-3
    odds = density_estimate(lambda n: n % 2 == 1, 10**5)
    assert odds.running_min_ratio >= 0.49
    assert 0 <= odds.running_min_ratio <= odds.final_ratio <= 1
    assert density_estimate(lambda n: n == 3, 1000).final_ratio == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        density_estimate([], 10, 10)


def test_density_predicate_scalar_fallback():
    ev = density_estimate(lambda n: int(n) % 3 == 0 if np.ndim(n) == 0 else (_ for _ in ()).throw(TypeError()),
                          3000, 100)
    assert ev.final_ratio == pytest.approx(1 / 3)


def test_burn_in_default():
    assert default_burn_in(5000) == 100 and default_burn_in(10**6) == 10**4


@given(st.lists(st.integers(1, 500), max_size=200), st.integers(20, 500))
def test_density_ordering(a, horizon):
    ev = density_estimate(sorted(set(a)), horizon, 10)
    assert 0 <= ev.running_min_ratio <= ev.final_ratio <= 1


def test_density_matches_bruteforce(rng):
    a = np.sort(rng.choice(np.arange(1, 2001), 300, replace=False))
    ev = density_estimate(a, 2000, 50)
    ratios = [np.sum(a <= n) / n for n in range(50, 2001)]
    assert ev.running_min_ratio == pytest.approx(min(ratios))
    assert ev.final_ratio == pytest.approx(300 / 2000)


def test_alpha_condition():
    v = alpha_condition_check(AlphaFamily("plain_log"), 0.5)
    assert v.passed
    assert all(b < a for a, b in zip(v.ratios[6:], v.ratios[7:]))  # decreasing beyond k = 1024
    assert alpha_condition_check(AlphaFamily("log_power", 3.0), 0.5).passed
    lin = alpha_condition_check(AlphaFamily("custom", fn=lambda l: l), 0.5, 10**5)
    assert not lin.passed and lin.method == "numeric"
    with pytest.raises(ValueError):
        alpha_condition_check(AlphaFamily("custom", fn=lambda l: -l), 0.5, 1000)
    with pytest.raises(ValueError):
        alpha_condition_check(AlphaFamily("plain_log"), 0.5, 50)
    v = alpha_condition_check(AlphaFamily("log_power", 1.5), 0.5)
    assert v.consequence < 1e-3
