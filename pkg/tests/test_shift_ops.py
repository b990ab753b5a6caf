import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhcvec.core import SpaceConfig, SparseVec, combine, lp_norm
from fhcvec.shift_ops import (PolynomialSpec, ShiftOperator, WeightBasis, admissibility, apply_polynomial,
                              apply_shift_power, truncated_apply)
from fhcvec.weights import WeightFamily

P2 = SpaceConfig(2.0)
FAMS = [WeightFamily.constant(0.5), WeightFamily.constant(4.0), WeightFamily.power(0.5), WeightFamily.power(4.0),
        WeightFamily.ratio_power(1.0), WeightFamily.exp_log_power(0.5),
        WeightFamily.explicit(np.exp(1j * np.arange(1, 260)) * (1 + 0.5 * np.sin(np.arange(1, 260))))]


def naive_shift(fam, x, n):
    """n single steps of (Bx)_j = w_{j+1} x_{j+1} on a dense array."""
    w = np.array([fam.weight(j) for j in range(1, x.size + 1)])
    for _ in range(n):
        x = np.append(w[: x.size - 1] * x[1:], 0)
    return x


def test_examples():
    two = ShiftOperator(WeightFamily.constant(2))
    assert apply_shift_power(two, 1, SparseVec.from_dict({1: 1})).to_dict() == {0: 2}
    lin = ShiftOperator(WeightFamily.explicit(range(1, 11)))  # w_n = n
    assert apply_shift_power(lin, 2, SparseVec.from_dict({5: 1})).to_dict() == pytest.approx({3: 20})
    K = 40
    fixed = SparseVec.from_dict({k: 2.0**-k for k in range(K + 1)})
    for n in range(K // 2 + 1):
        got = apply_shift_power(two, n, fixed)
        assert lp_norm(got - fixed.restrict(0, K - n), P2) <= 1e-14
    v = SparseVec.from_dict({3: 1.5})
    assert apply_shift_power(two, 0, v) is v


def test_polynomial_examples():
    one = ShiftOperator(WeightFamily.constant(1.0))
    v = SparseVec.from_dict({2: 1})
    got = apply_polynomial(PolynomialSpec([2, -24 / 25]), one, v)
    assert got.to_dict() == pytest.approx({1: 2, 0: -24 / 25})
    # z^3 has no linear term, so it is not a PolynomialSpec; the power itself annihilates
    assert len(apply_shift_power(one, 3, SparseVec.from_dict({1: 1}))) == 0
    fam = WeightFamily.power(1.5)
    x = SparseVec.from_dict({4: 1, 9: -2j})
    assert apply_polynomial(PolynomialSpec([1]), ShiftOperator(fam), x).equals(
        apply_shift_power(ShiftOperator(fam), 1, x))


def test_polynomial_validation():
    with pytest.raises(ValueError):
        PolynomialSpec([])
    with pytest.raises(ValueError):
        PolynomialSpec([0, 1])
    with pytest.raises(ValueError):
        PolynomialSpec([1] * 33)


def test_admissibility_examples():
    m, ok = admissibility(PolynomialSpec([2, -24 / 25]))
    assert ok and m == pytest.approx(26 / 25, rel=1e-14)
    m, ok = admissibility(PolynomialSpec([4 / 3, 0, 0, -16 / 81]))
    assert ok and m == pytest.approx(92 / 81) and m > 11 / 10
    m, ok = admissibility(PolynomialSpec([1, 1]))
    assert m == 0 and not ok


def test_truncated_apply_examples():
    ones = [1.0] * 10
    assert truncated_apply(ones, 0, WeightBasis(WeightFamily.constant(2))).to_dict() == {0: 1}
    got = truncated_apply(ones, 2, WeightBasis(WeightFamily.constant(2)))
    assert got.to_dict() == pytest.approx({0: 1, 1: 0.5, 2: 0.25})
    assert len(truncated_apply([0.0] * 10, 3, WeightBasis(WeightFamily.constant(2)))) == 0
    with pytest.raises(IndexError):
        truncated_apply([1.0] * 4, 2, WeightBasis(WeightFamily.constant(2)))


@pytest.mark.parametrize("fam", FAMS, ids=lambda f: f.kind)
def test_one_pass_matches_naive(fam, rng):
    x = rng.normal(size=200) + 1j * rng.normal(size=200)
    v = SparseVec.from_dense(x)
    for n in (1, 2, 7, 30, 50):
        want = naive_shift(fam, x, n)
        got = apply_shift_power(ShiftOperator(fam), n, v).dense(200)
        scale = np.abs(want).max()
        assert np.abs(got - want).max() <= 1e-12 * scale


idx_dict = st.dictionaries(st.integers(0, 80), st.complex_numbers(max_magnitude=100, allow_nan=False,
                                                                  allow_infinity=False), max_size=12)


@given(idx_dict, st.integers(0, 30), st.integers(0, 30), st.sampled_from(FAMS[:6]))
def test_semigroup(d, a, b, fam):
    op = ShiftOperator(fam)
    v = SparseVec.from_dict(d)
    lhs = apply_shift_power(op, a + b, v)
    rhs = apply_shift_power(op, a, apply_shift_power(op, b, v))
    n = max(lhs.degree, rhs.degree, 0) + 1
    scale = max(np.abs(lhs.dense(n)).max(initial=0), 1e-300)
    assert np.abs(lhs.dense(n) - rhs.dense(n)).max(initial=0) <= 1e-11 * scale


@given(idx_dict, idx_dict, st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_linearity(dx, dy, a):
    op = ShiftOperator(WeightFamily.constant(1.5))
    P = PolynomialSpec([2, -0.5, 0.25j])
    x, y = SparseVec.from_dict(dx), SparseVec.from_dict(dy)
    lhs = apply_polynomial(P, op, combine([(a, x), (1, y)]))
    rhs = combine([(a, apply_polynomial(P, op, x)), (1, apply_polynomial(P, op, y))])
    n = 90
    scale = max(np.abs(lhs.dense(n)).max(), np.abs(rhs.dense(n)).max(), 1.0)
    assert np.abs(lhs.dense(n) - rhs.dense(n)).max() <= 1e-12 * scale * 10
