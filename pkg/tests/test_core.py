import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhcvec.core import (LogMagnitude, SpaceConfig, SparseVec, combine, log_lp_norm, lp_dist, lp_norm,
                         vec_axpy)

P1, P2 = SpaceConfig(1.0), SpaceConfig(2.0)

coeff = st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)
sparse = st.dictionaries(st.integers(0, 60), coeff, max_size=15).map(SparseVec.from_dict)
pval = st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.5])


def test_lp_norm_examples():
    assert lp_norm(SparseVec.from_dict({0: 3, 4: 4}), P2) == pytest.approx(5.0, rel=1e-15)
    assert lp_norm(SparseVec(), P1) == 0.0
    v = SparseVec.from_dict({k: 2.0**-k for k in range(21)})
    assert lp_norm(v, P1) == pytest.approx(2 - 2.0**-20, rel=1e-15)


def test_axpy_examples():
    assert len(vec_axpy(1, SparseVec.from_dict({0: 1}), SparseVec.from_dict({0: -1}))) == 0
    assert vec_axpy(0, SparseVec.from_dict({5: 9}), SparseVec.from_dict({1: 2})).to_dict() == {1: 2}
    got = vec_axpy(2, SparseVec.from_dict({1: 1, 3: 1}), SparseVec.from_dict({3: 1}))
    assert got.to_dict() == {1: 2, 3: 3}


def test_space_rejects_small_p():
    with pytest.raises(ValueError):
        SpaceConfig(0.5)
    with pytest.raises(ValueError):
        SpaceConfig(math.inf)


def test_sparsevec_invariants():
    v = SparseVec([5, 1, 3], [1, 0, 2])
    assert list(v.idx) == [3, 5]
    with pytest.raises(ValueError):
        SparseVec([1, 1], [1, 2])
    with pytest.raises(ValueError):
        SparseVec([-1], [1])
    with pytest.raises(ValueError):
        SparseVec([0], [np.nan])


def test_logmagnitude_round_trip():
    for r in [1e-200, 1e-50, 0.3, 1.0, 7e120, 1e200]:
        for phi in [0.0, 1.0, -2.5]:
            z = r * complex(math.cos(phi), math.sin(phi))
            back = LogMagnitude.from_complex(z).to_complex()
            assert abs(abs(back) - r) <= 1e-13 * r
    assert LogMagnitude.from_complex(0).is_zero
    assert (LogMagnitude(1.0) * LogMagnitude.zero()).is_zero


def test_huge_exponents_survive():
    v = SparseVec([3], [1.0]).scale_log(np.array([5000.0]))
    assert log_lp_norm(v, P2) == pytest.approx(5000.0, rel=1e-14)
    w = SparseVec.loads(v.dumps())
    assert w.equals(v)
    with pytest.raises(OverflowError):
        lp_norm(v, P2)
    tiny = SparseVec([2], [1.0]).scale_log(np.array([-9000.0]))
    assert log_lp_norm(tiny + v, P1) == pytest.approx(5000.0)


def test_loads_skips_comments():
    v = SparseVec.loads("# header\n0 1.0 0.0\n\n2 0.5 -0.25\n")
    assert v.to_dict() == {0: 1, 2: 0.5 - 0.25j}


@given(sparse, sparse, pval)
def test_triangle_inequality(x, y, p):
    s = SpaceConfig(p)
    assert lp_norm(x + y, s) <= (lp_norm(x, s) + lp_norm(y, s)) * (1 + 1e-12) + 1e-300


@given(sparse, coeff, pval)
def test_homogeneity(x, a, p):
    s = SpaceConfig(p)
    lhs = lp_norm(x.scale(a), s)
    assert lhs == pytest.approx(abs(a) * lp_norm(x, s), rel=1e-12, abs=1e-300)


@given(sparse)
def test_text_round_trip_exact(x):
    y = SparseVec.loads(x.dumps())
    assert y.equals(x)
    assert y.to_dict() == x.to_dict()


@given(sparse, sparse)
def test_combine_matches_dense(x, y):
    n = max(x.degree, y.degree, 0) + 1
    got = combine([(2 - 1j, x), (0.5, y)]).dense(n)
    want = (2 - 1j) * x.dense(n) + 0.5 * y.dense(n)
    assert np.allclose(got, want, rtol=1e-13, atol=1e-9)


def test_dist_matches_dense(rng):
    from conftest import random_sparse
    x, y = random_sparse(rng), random_sparse(rng)
    d = np.abs(x.dense(40) - y.dense(40))
    assert lp_dist(x, y, SpaceConfig(3.0)) == pytest.approx((d**3).sum() ** (1 / 3), rel=1e-13)
