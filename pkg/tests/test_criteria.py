import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhcvec.arith import AlphaFamily
from fhcvec.core import SpaceConfig
from fhcvec.criteria import (CriterionError, GeneralCriterionConfig, GeometricCriterionConfig,
                             NonexistenceWitness, check_general, check_geometric, check_geometric_corollary,
                             check_poly_common, check_power_corollary, check_spectrum_corollary,
                             nonexistence_terms, rn_kl, search_divergence_witness, witness_verdict)
from fhcvec.shift_ops import PolynomialSpec
from fhcvec.weights import WeightFamily

P1S, P2S = SpaceConfig(1.0), SpaceConfig(2.0)
C = WeightFamily.constant
LOG = AlphaFamily("plain_log")


# geometric criterion ---------------------------------------------------------

def _triple_config():
    return GeometricCriterionConfig(C(math.sqrt(1.5)), 1 / math.sqrt(1.5), 3.0, 2.0)


def test_geometric_triple_shifted_passes():
    v = check_geometric([C(1.5), C(2), C(3)], _triple_config(), P2S, convention="shifted")
    assert v.status == "pass" and v.evidence["method"] == "analytic"


def test_geometric_triple_literal_binding_side():
    # with m'+1 factors the upper bound 3^(m'+1) <= 2 * 3^m' fails at m' = 1 for lambda = 3
    v = check_geometric([C(1.5), C(2), C(3)], _triple_config(), P2S, convention="literal")
    assert v.status == "fail"
    bad = v.evidence["families"][2]["(iii)"]
    assert not bad["upper_pass"] and bad["violation"] == {"n": 1, "m'": 1, "side": "upper"}
    assert all(f["(iii)"]["upper_pass"] for f in v.evidence["families"][:2])


def test_geometric_power_family_reports_violation():
    cfg = GeometricCriterionConfig(C(math.sqrt(1.5)), 0.9, 2.0, 100.0)
    v = check_geometric([WeightFamily.power(2.0)], cfg, P2S, probe=(200, 200))
    assert v.status == "fail"
    viol = v.evidence["families"][0]["(ii)"]["violation"]
    assert set(viol) == {"n", "m'", "side"}
    # the reported index pair really breaks (ii): omega product / (eta^m' w product) > C
    n, mp = viol["n"], viol["m'"]
    w = WeightFamily.power(2.0)
    lr = (mp + 1) * 0.5 * math.log(1.5) - mp * math.log(0.9) - (w.log_abs_W(n + mp) - w.log_abs_W(n - 1))
    assert lr > math.log(100.0)


def test_geometric_config_validation():
    with pytest.raises(CriterionError):
        GeometricCriterionConfig(C(2), 1.0, 3.0, 2.0)
    with pytest.raises(CriterionError):
        GeometricCriterionConfig(C(2), 0.5, 1.0, 2.0)


@pytest.mark.parametrize("convention", ["literal", "shifted"])
def test_geometric_analytic_matches_probe(convention):
    fams = [C(1.5), C(2), C(3)]
    for cfg in [_triple_config(), GeometricCriterionConfig(C(1.5), 0.8, 3.5, 3.0)]:
        ana = check_geometric(fams, cfg, P2S, convention=convention)
        # a custom family with the same products forces the probe path
        probe = check_geometric([WeightFamily.custom(lambda n, l=f.value: n * math.log(l)) for f in fams],
                                cfg, P2S, probe=(40, 40), convention=convention)
        assert ana.status == probe.status
        for size in (11, 30, 200):
            assert check_geometric(fams, cfg, P2S, probe=(size, size), convention=convention).status == ana.status


# general criterion -----------------------------------------------------------

def test_rn_kl_first_sum_exact():
    cfg = GeneralCriterionConfig(3, 2, LOG)
    r = rn_kl([C(2)], 1, 1, 3, cfg, P1S)
    assert r.first == pytest.approx(15 / 32, rel=1e-15)
    j = np.arange(9, 19)
    second = np.sum(2.0 ** (j * 1.0) * 2.0 ** -(j - 3.0) * 2.0 ** -(j * 1.0))
    assert math.exp(r.log_second) == pytest.approx(second, rel=1e-12)


def test_rn_kl_two_constants_terms_decrease():
    cfg = GeneralCriterionConfig(3, 2, LOG)
    vals = [rn_kl([C(2), C(3)], 1, 1, 3, cfg, P1S, tail_cap=cap).log_value for cap in (10, 20, 40, 80)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] - vals[-2] < 1e-6


def test_rn_kl_preconditions():
    cfg = GeneralCriterionConfig(3, 2, LOG)
    with pytest.raises(CriterionError):
        rn_kl([C(2)], 1, 1, 7, cfg, P1S)
    with pytest.raises(CriterionError):
        rn_kl([C(2)], 2, 1, 3, cfg, P1S)
    with pytest.raises(CriterionError):
        GeneralCriterionConfig(3, 3, LOG)


@settings(max_examples=25)
@given(st.lists(st.floats(1.2, 4.0), min_size=1, max_size=3), st.integers(1, 2), st.integers(0, 50),
       st.integers(20, 200))
def test_rn_kl_monotone_in_tail_cap(lams, n, l_off, extra):
    fams = [C(x) for x in lams]
    cfg = GeneralCriterionConfig(4, 2, AlphaFamily("log_power", 1.5))
    l = min(4**n + l_off, 2 * 4**n)
    cap = 4 ** (n + 1) + 40
    a = rn_kl(fams, 1, n, l, cfg, P1S, tail_cap=cap)
    b = rn_kl(fams, 1, n, l, cfg, P1S, tail_cap=cap + extra)
    assert b.log_value >= a.log_value - 1e-12
    if not a.inconclusive:
        assert b.log_value <= a.log_total + 1e-9


def test_general_exp_log_pair_converges():
    cfg = GeneralCriterionConfig(6, 2, AlphaFamily("log_power", 1.5))
    v = check_general([WeightFamily.exp_log_power(1.0), WeightFamily.power(2.0)], cfg, P1S)
    assert v.status == "converges_numeric"
    for fam in v.evidence["families"]:
        tr = [t["log_sup"] for t in fam["trace"]]
        assert all(b < a for a, b in zip(tr[1:6], tr[2:6]))


def test_general_small_m_diverges():
    cfg = GeneralCriterionConfig(4, 2, AlphaFamily("log_power", 1.5))
    v = check_general([WeightFamily.exp_log_power(1.0), WeightFamily.power(2.0)], cfg, P1S)
    assert v.status == "diverges_witness"


def test_general_power_pair_converges():
    cfg = GeneralCriterionConfig(6, 2, AlphaFamily("log_power", 1.0))
    v = check_general([WeightFamily.power(1.5), WeightFamily.power(2.0)], cfg, P2S)
    assert v.status == "converges_numeric"


def test_general_rejects_linear_alpha():
    cfg = GeneralCriterionConfig(6, 2, AlphaFamily("custom", fn=lambda l: l))
    v = check_general([WeightFamily.power(2.0)], cfg, P1S)
    assert v.status == "rejected" and v.evidence["stage"] == "alpha"


def test_general_decay_violation_raises():
    cfg = GeneralCriterionConfig(6, 2, LOG, decay=((1.0, 0.1),))
    with pytest.raises(CriterionError, match="n="):
        check_general([WeightFamily.power(0.5)], cfg, P1S)


def test_cross_consistency_with_witness():
    v, w = WeightFamily.ratio_power(1.0, 1.0), C(2.0)
    assert search_divergence_witness(v, w, P1S) is not None
    g = check_general([v, w], GeneralCriterionConfig(6, 2, AlphaFamily("log_power", 1.5)), P1S)
    assert not g.passed


# corollaries -----------------------------------------------------------------

def test_power_corollary():
    v = check_power_corollary([0.7, 1.1], P2S)
    assert v.passed and v.evidence["a"] == 0.7
    assert v.evidence["sigma_recommended"] == pytest.approx(1 / 0.4 + 0.1)
    assert v.evidence["sigma_recommended"] == pytest.approx(2.6)
    assert not check_power_corollary([0.9], P1S).passed
    assert not check_power_corollary([0.5], P2S).passed


def test_geometric_corollary():
    v = check_geometric_corollary([1.5, 2, 3], P2S)
    assert v.passed and v.evidence["m"] == 7 and (v.evidence["a"], v.evidence["b"]) == (1.5, 3)
    assert not check_geometric_corollary([1.0, 2.0], P2S).passed
    assert check_geometric_corollary([2], P2S).evidence["m"] == 5


def test_poly_common():
    P1, P2 = PolynomialSpec([2, -24 / 25]), PolynomialSpec([4 / 3, 0, 0, -16 / 81])
    fams = [C(2.5), C(1.5)]
    v = check_poly_common([P1, P2], fams, 0.04, P2S)
    assert v.passed and v.evidence["margins"] == pytest.approx([26 / 25, 92 / 81])
    assert v.evidence["rho_actual"] == pytest.approx(25 / 26)
    # 2 - 24/25 = 26/25 sits below 11/10, so delta = 0.1 fails for the first polynomial
    v = check_poly_common([P1, P2], fams, 0.1, P2S)
    assert not v.passed and v.evidence["failing_polys"] == [1]
    v = check_poly_common([PolynomialSpec([2, -1])], [C(2)], 1e-6, P2S)
    assert not v.passed
    v = check_poly_common([P2, P2], [WeightFamily.power(1.5), WeightFamily.power(2.5)], 0.1, P1S)
    assert v.passed and v.evidence["inf_series"]["status"].startswith("converges")


def test_spectrum_pure_scalings():
    polys = [PolynomialSpec([1.5]), PolynomialSpec([3.0])]
    v = check_spectrum_corollary(C(1.0), polys, 1.2, 3.0, P2S)
    assert v.passed
    for w, lam in zip(v.evidence["witnesses"], (1.5, 3.0)):
        assert w["r"] == pytest.approx(1.2) and w["margin"] == pytest.approx(lam / 1.2)
        assert w["margin"] >= 1.05
    assert v.evidence["delta"] == pytest.approx(0.25)


def test_spectrum_polynomial_pair():
    polys = [PolynomialSpec([5, -6]), PolynomialSpec([2, 0, 0, -1])]
    v = check_spectrum_corollary(C(1.0), polys, 1.01, 5.0, P2S, grid=4000)
    assert v.passed
    # 5/r - 6/r^2 peaks at r = 12/5 with value 25/24
    assert v.evidence["witnesses"][0]["r"] == pytest.approx(2.4, abs=2e-3)
    assert v.evidence["delta"] == pytest.approx(1 / 24, abs=1e-5)


def test_spectrum_preconditions():
    with pytest.raises(CriterionError):
        check_spectrum_corollary(C(1.0), [PolynomialSpec([2])], 0.9, 2.0, P2S)
    with pytest.raises(CriterionError):
        check_spectrum_corollary(C(1.0), [PolynomialSpec([2])], 1.5, 2.0, P2S, grid=5)


# non-existence ---------------------------------------------------------------

def test_nonexistence_terms_formula():
    v, w = WeightFamily.ratio_power(1.0, 1.0), C(2.0)
    ls = np.arange(1, 31)
    wit = NonexistenceWitness([2**int(l) for l in ls], [2 ** int(l - 1) for l in ls], 0.5, 0.5, [])
    tr = nonexistence_terms(v, w, wit, P1S)
    want = 2.0 ** (ls - 1) * math.log(2) - 2 * np.log(2.0**ls + 1)
    assert np.allclose(tr.log_terms, want, rtol=1e-12, atol=1e-9)
    assert all(b > a for a, b in zip(tr.log_terms[2:], tr.log_terms[3:]))
    assert tr.values[-1] is None and tr.values[0] is not None


def test_nonexistence_self_pair():
    w = C(2.0)
    wit = NonexistenceWitness([4, 8, 16], [2, 4, 8], 0.5, 0.5, [])
    tr = nonexistence_terms(w, w, wit, P1S)
    assert tr.values == pytest.approx([2.0**-2, 2.0**-4, 2.0**-8])
    assert nonexistence_terms(w, w, NonexistenceWitness([], [], 0, 0, []), P1S).log_terms == []


def test_witness_validation():
    with pytest.raises(ValueError):
        NonexistenceWitness([4, 2], [1, 2], 0.5, 0.5, [])
    with pytest.raises(ValueError):
        NonexistenceWitness([2, 4], [1, 2], 0.5, 1.0, [])


def test_witness_search():
    wit = search_divergence_witness(WeightFamily.ratio_power(1.0, 1.0), C(2.0), P1S, L=30)
    assert wit is not None and wit.theta == 0.5 and wit.base == 2
    assert all(b > a for a, b in zip(wit.log_terms, wit.log_terms[1:]))
    assert wit.log_terms[-1] >= math.log(1e6)
    assert search_divergence_witness(WeightFamily.exp_log_power(1.0), WeightFamily.power(2.0), P1S) is None
    assert search_divergence_witness(C(2.0), C(2.0), P1S) is None
    v = witness_verdict(WeightFamily.ratio_power(1.0, 1.0), C(2.0), P1S)
    assert v.status == "witness_found" and v.evidence["cross_check_flag"]
