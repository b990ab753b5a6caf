import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhcvec.core import SpaceConfig
from fhcvec.weights import (WeightFamily, bounded_check, fhc_constant, logW, log_product_range,
                            numeric_series, point_spectrum_radius)

P1, P2 = SpaceConfig(1.0), SpaceConfig(2.0)

FAMILIES = [WeightFamily.constant(2.0), WeightFamily.constant(0.7), WeightFamily.power(2.0),
            WeightFamily.power(0.5), WeightFamily.ratio_power(1.0, 1.0), WeightFamily.ratio_power(0.3, 2.0),
            WeightFamily.exp_log_power(1.0), WeightFamily.exp_log_power(0.2),
            WeightFamily.explicit([1.5, -2.0, 0.5j, 3.0] * 60),
            WeightFamily.custom(lambda n: 0.5 * np.log1p(n.astype(float)) ** 1.5)]


def test_logW_examples():
    assert logW(WeightFamily.constant(2.0), 10).log_abs == pytest.approx(10 * math.log(2), abs=1e-14)
    for f in FAMILIES:
        assert logW(f, 0).log_abs == 0.0
    assert logW(WeightFamily.ratio_power(1.0, 1.0), 99).log_abs == pytest.approx(2 * math.log(100), abs=1e-12)


def test_explicit_out_of_range():
    f = WeightFamily.explicit([2, 3])
    assert f.log_abs_W(2) == pytest.approx(math.log(6))
    with pytest.raises(IndexError):
        f.log_abs_W(3)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind + str(f.value))
@given(n=st.integers(0, 200))
def test_increment_is_log_weight(fam, n):
    d = fam.log_abs_W(n + 1) - fam.log_abs_W(n)
    assert d == pytest.approx(float(fam.log_abs_w(n + 1)), abs=1e-12)


def test_explicit_weights_match_fraction_products():
    ws = [Fraction(3, 2), Fraction(-2), Fraction(1, 3), Fraction(5, 4)]
    f = WeightFamily.explicit([float(w) for w in ws])
    prod = Fraction(1)
    for n, w in enumerate(ws, start=1):
        prod *= w
        assert f.log_abs_W(n) == pytest.approx(math.log(abs(float(prod))), abs=1e-14)
    assert f.phase_W(2) == pytest.approx(math.pi) or f.phase_W(2) == pytest.approx(-math.pi)


@given(st.floats(0.01, 3.0), st.sampled_from([1.0, 2.0, 3.0]), st.integers(1, 10**6))
def test_ratio_power_telescopes(eps, p, n):
    f = WeightFamily.ratio_power(eps, p)
    assert f.log_abs_W(n) == pytest.approx((1 + eps) / p * math.log(n + 1), abs=1e-12)


def test_fhc_constant_examples():
    v = fhc_constant(WeightFamily.constant(2.0), P2)
    assert v.converges and v.value == pytest.approx(3**-0.5, rel=1e-12)
    partial = math.fsum(4.0**-n for n in range(1, 80)) ** 0.5
    assert v.value == pytest.approx(partial, rel=1e-12)
    v = fhc_constant(WeightFamily.power(2.0), P1)
    assert v.converges and v.value == pytest.approx(math.pi**2 / 6, rel=1e-12)
    # partial sums plus the integral tail bracket the value
    N = 10**5
    s = math.fsum(1.0 / j**2 for j in range(1, N + 1))
    assert s < v.value < s + 1.0 / N
    v = fhc_constant(WeightFamily.constant(1.0), P1)
    assert v.status == "diverges_witness" and v.value is None and v.witness["lower_bound"] == 1.0


@given(st.floats(1.01, 10.0), st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_fhc_geometric_closed_form(lam, p):
    v = fhc_constant(WeightFamily.constant(lam), SpaceConfig(p))
    assert v.value == pytest.approx((lam**p - 1) ** (-1 / p), rel=1e-10)


def test_fhc_other_kinds():
    assert fhc_constant(WeightFamily.power(1.0), P1).status == "diverges_witness"
    assert fhc_constant(WeightFamily.power(0.6), P2).converges
    r = fhc_constant(WeightFamily.ratio_power(1.0, 1.0), P1)
    assert r.value == pytest.approx(math.pi**2 / 6 - 1, rel=1e-12)
    e = fhc_constant(WeightFamily.exp_log_power(1.0), P1)
    direct = math.fsum(math.exp(-math.log(j) ** 2) for j in range(1, 20000))
    assert e.value == pytest.approx(direct, rel=1e-9)
    assert fhc_constant(WeightFamily.explicit([2, 2, 2]), P1).status == "inconclusive"
    c = fhc_constant(WeightFamily.custom(lambda n: 4.0 * np.log(np.maximum(n, 1))), P1)
    assert c.status == "converges_numeric" and c.value == pytest.approx(math.pi**4 / 90, rel=1e-9)
    # j^-1.5 cannot meet the 1e-10 doubling rule within 2^22 terms; no false claim either way
    slow = fhc_constant(WeightFamily.custom(lambda n: 1.5 * np.log(np.maximum(n, 1))), P1)
    assert slow.status == "inconclusive"


def test_numeric_series_verdicts():
    v = numeric_series(lambda j: -4.0 * np.log(j))
    assert v.status == "converges_numeric" and v.value == pytest.approx(math.pi**4 / 90, rel=1e-9)
    assert numeric_series(lambda j: -2.0 * np.log(j)).status == "inconclusive"
    d = numeric_series(lambda j: -np.log(j), N_max=1 << 16)
    assert d.status == "diverges_witness" and d.witness["lower_bound"] > 0
    g = numeric_series(lambda j: -j * math.log(3.0))
    assert g.value == pytest.approx(0.5, rel=1e-12)


def test_bounded_examples():
    b = bounded_check(WeightFamily.constant(2.5))
    assert b.bounded and b.sup_estimate == 2.5
    b = bounded_check(WeightFamily.ratio_power(1.0, 1.0))
    assert b.bounded and b.sup_estimate == pytest.approx(4.0) and b.limsup_estimate == 1.0
    b = bounded_check(WeightFamily.power(2.0))
    assert b.bounded and b.limsup_estimate == 1.0
    w = WeightFamily.power(2.0)
    assert b.sup_estimate == pytest.approx(float(np.exp(w.log_abs_w(np.arange(1, 100)).max())))
    b = bounded_check(WeightFamily.explicit([1, 9, 1, 1]), 4)
    assert b.method == "numeric" and b.sup_estimate == pytest.approx(9)


def test_point_spectrum_radius():
    assert point_spectrum_radius(WeightFamily.constant(3.0), P2) == 3.0
    assert point_spectrum_radius(WeightFamily.power(2.0), P2, (1, 10**4)) == pytest.approx(1.0, abs=1e-2)
    assert point_spectrum_radius(WeightFamily.explicit([1.0] * 50), P2) == pytest.approx(1.0)


def test_log_tail_sum_matches_direct():
    for f, p in [(WeightFamily.constant(1.3), 2.0), (WeightFamily.power(2.0), 1.0),
                 (WeightFamily.exp_log_power(1.0), 1.0), (WeightFamily.ratio_power(1.0, 2.0), 2.0)]:
        J = 50
        j = np.arange(J + 1, 4_000_000)
        direct = np.log(np.sum(np.exp(-p * f.log_abs_W(j))))
        assert f.log_tail_sum(J, p) >= direct - 1e-9
        assert f.log_tail_sum(J, p) == pytest.approx(direct, abs=0.05)


def test_product_range():
    f = WeightFamily.power(1.0)
    assert log_product_range(f, 3, 2) == pytest.approx(math.log(4 / 2))
