from __future__ import annotations

import numpy as np
import pytest
from numpy.polynomial import hermite_e

from needlet_lengths.chaos import (
    alpha_pair,
    beta_coeff,
    chaos2_variance,
    chaos2_variance_limit,
    chaos_coefficients,
    chaosq_variance,
    coeff_tail_bound,
    diagram_constants,
    hermite_eval,
)
from needlet_lengths.spectral import PowerSpectrum, build_window
from oracles import enumerate_diagrams, factorial_identity, gaussian_hermite_moment, norm_hermite_moment

SPEC = PowerSpectrum()
W = build_window(2.0)
RHO = (0.3, 0.2, 0.25, 0.4)


def test_hermite_matches_numpy():
    x = np.linspace(-3, 3, 13)
    for q in range(9):
        c = np.zeros(q + 1)
        c[q] = 1
        np.testing.assert_allclose(hermite_eval(q, x), hermite_e.hermeval(x, c), rtol=1e-13, atol=1e-12)
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)


def test_alpha_against_polar_oracle():
    for k in range(0, 9):
        for l in range(0, 9):
            assert alpha_pair(k, l) == pytest.approx(norm_hermite_moment(k, l), rel=1e-13, abs=1e-15)


def test_alpha_frozen_values():
    # E|Y| for the planar standard normal is sqrt(pi/2)
    assert alpha_pair(0, 0) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-15)
    assert alpha_pair(2, 0) == pytest.approx(np.sqrt(np.pi / 2) / 2, rel=1e-15)
    assert alpha_pair(1, 2) == 0.0


def test_beta_coefficients():
    assert beta_coeff(0, 0.0) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert beta_coeff(2, 1.0) == 0.0
    assert beta_coeff(1, 2.0) == pytest.approx(2 * np.exp(-2) / np.sqrt(2 * np.pi))


def test_odd_coefficients_vanish_only_at_level_zero():
    for q in (1, 3, 5):
        assert all(abs(c.c_quk) < 1e-15 for c in chaos_coefficients(q, 0.0, prune=False))
        assert any(abs(c.c_quk) > 1e-3 for c in chaos_coefficients(q, 1.3))


def test_first_chaos_variance_vanishes_but_third_does_not():
    assert abs(chaosq_variance(SPEC, W, 5, 1.0, 1).value) < 1e-10
    assert chaosq_variance(SPEC, W, 5, 1.0, 3).value > 1e-2


def _tuples(q_max):
    for q in range(1, q_max + 1):
        for u1 in range(q + 1):
            for k1 in range(u1 + 1):
                for u2 in range(q + 1):
                    for k2 in range(u2 + 1):
                        yield q, u1, k1, u2, k2


def test_diagram_counts_against_enumeration():
    for q, u1, k1, u2, k2 in _tuples(5):
        got = {t.alpha_exp: t.M_alpha for t in diagram_constants(q, u1, k1, u2, k2)}
        assert got == enumerate_diagrams(q, u1, k1, u2, k2)


@pytest.mark.parametrize("tup", [(2, 1, 1, 1, 1), (3, 2, 2, 2, 2), (3, 1, 1, 3, 3), (4, 2, 0, 3, 1), (4, 3, 2, 2, 1)])
def test_diagram_sum_against_gaussian_moment(tup):
    q, u1, k1, u2, k2 = tup
    r1, r2, r3, r4 = RHO
    got = sum(t.sign * t.M_alpha * r1**t.alpha_exp * r2**t.beta_exp * r3**t.gamma_exp * r4**t.delta_exp
              for t in diagram_constants(*tup))
    want = gaussian_hermite_moment((q - u1, k1, u1 - k1), (q - u2, k2, u2 - k2), *RHO)
    assert got == pytest.approx(want, abs=1e-12)


def test_diagram_mass_identity():
    for q, u1, k1, u2, k2 in _tuples(6):
        terms = diagram_constants(q, u1, k1, u2, k2)
        if terms:
            assert sum(t.M_alpha for t in terms) == factorial_identity(q, u1, k1)


def test_diagram_validation():
    with pytest.raises(ValueError):
        diagram_constants(2, 3, 0, 0, 0)
    assert diagram_constants(3, 2, 0, 2, 1) == []


def test_chaos2_quadrature_matches_closed_form():
    for j in (3, 6, 9):
        for z in (0.0, 1.0, -0.7):
            r = chaos2_variance(SPEC, W, j, z)
            assert r.total == pytest.approx(r.total_closed_form, rel=1e-10)


def test_printed_s3_bound_does_not_dominate():
    r = chaos2_variance(SPEC, W, 7, 0.0)
    assert r.S3 > r.S3_bound


def test_chaos2_matches_general_q2():
    for z in (0.0, 1.0):
        r = chaos2_variance(SPEC, W, 5, z)
        e = chaosq_variance(SPEC, W, 5, z, 2)
        assert e.converged
        assert e.value == pytest.approx(r.total, rel=1e-9)


def test_chaos2_approaches_limit():
    lim = chaos2_variance_limit(SPEC, W, 0.5)
    ratios = [chaos2_variance(SPEC, W, j, 0.5).total / lim for j in (4, 7, 10)]
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    assert abs(ratios[-1] - 1) < 1e-2


def test_chaosq_bookkeeping():
    e = chaosq_variance(SPEC, W, 4, 1.0, 4)
    assert e.converged and e.value > 0
    assert e.value == pytest.approx(e.small_theta_piece + e.large_theta_piece, rel=1e-14)
    assert e.theta_split == pytest.approx(10 / 16)
    with pytest.raises(ValueError):
        chaosq_variance(SPEC, W, 4, 1.0, 0)


def test_chaosq_split_independent():
    a = chaosq_variance(SPEC, W, 4, 0.0, 4, theta_split=0.3)
    b = chaosq_variance(SPEC, W, 4, 0.0, 4, theta_split=1.2)
    assert a.value == pytest.approx(b.value, rel=1e-10)


def test_coeff_tail_bound_rows():
    rows = coeff_tail_bound(1.0, 12)
    assert [r[0] for r in rows] == list(range(1, 13))
    even = [r for r in rows if r[0] % 2 == 0]
    assert all(r[3] for r in even)
    with pytest.raises(ValueError):
        coeff_tail_bound(0.0, 41)


def test_hermite_spot_values_and_orthogonality():
    assert hermite_eval(2, 2.0) == pytest.approx(3.0)
    assert hermite_eval(4, 0.0) == pytest.approx(3.0)
    x, w = hermite_e.hermegauss(40)
    assert np.dot(w, hermite_eval(3, x) ** 2) / np.sqrt(2 * np.pi) == pytest.approx(6.0, rel=1e-12)
    assert abs(np.dot(w, hermite_eval(3, x) * hermite_eval(5, x))) < 1e-9


def test_diagram_small_cases():
    (t,) = diagram_constants(2, 0, 0, 0, 0)
    assert (t.alpha_exp, t.M_alpha) == (2, 2)
    (t,) = diagram_constants(2, 2, 2, 2, 2)
    assert (t.alpha_exp, t.beta_exp, t.gamma_exp, t.delta_exp, t.M_alpha) == (0, 0, 2, 0, 2)
    assert sum(t.M_alpha for t in diagram_constants(3, 0, 0, 2, 2)) == 6


def test_single_degree_s1():
    from needlet_lengths.spectral import FlatSpectrum, SingleDegreeWindow

    for z in (0.0, 0.5, 2.0):
        r = chaos2_variance(FlatSpectrum(), SingleDegreeWindow(2), 2, z)
        assert r.S1 == pytest.approx((z * z - 1) ** 2 * 32 * np.pi**2 / 5, rel=1e-13)


def test_level_one_drops_first_two_sums():
    r = chaos2_variance(SPEC, W, 6, 1.0)
    assert r.S1 == 0.0 and r.S2 == 0.0
    assert r.total == pytest.approx(r.A_band * np.pi / 8 * (np.exp(-1) / (2 * np.pi)) * (r.S3 + r.S4))


def test_chaos2_positive_at_listed_levels():
    for z in (0.0, 0.5, 1.0, 2.0):
        assert chaos2_variance(SPEC, W, 6, z).total > 0
        assert chaos2_variance_limit(SPEC, W, z) > 0


def test_limit_invariant_under_spectrum_scaling():
    scaled = PowerSpectrum(scale=7.5)
    for z in (0.0, 1.0):
        assert chaos2_variance_limit(scaled, W, z) == pytest.approx(chaos2_variance_limit(SPEC, W, z), rel=1e-10)
        assert chaos2_variance(scaled, W, 6, z).total == pytest.approx(chaos2_variance(SPEC, W, 6, z).total, rel=1e-12)


def test_third_chaos_settles():
    vals = [chaosq_variance(SPEC, W, j, 1.0, 3).value for j in (6, 7, 8, 9)]
    changes = [abs(b / a - 1) for a, b in zip(vals, vals[1:])]
    assert changes[0] > changes[1] > changes[2]


def test_higher_chaos_dominated_by_building_blocks():
    from math import factorial, sqrt

    from needlet_lengths.covariance import rho_profile
    from needlet_lengths.legendre import gauss_legendre
    from needlet_lengths.spectral import band_constants

    j = 5
    A = band_constants(SPEC, W, j).A_band
    rule = gauss_legendre(600)
    m = np.max(np.abs(np.stack(rho_profile(SPEC, W, j, np.arccos(rule.nodes)))), axis=0)
    block = float(np.dot(rule.weights, m * m))
    for q in (3, 4, 5):
        for z in (0.0, 1.0):
            csum = sum(abs(c.c_quk) for c in chaos_coefficients(q, z))
            v = chaosq_variance(SPEC, W, j, z, q).value
            assert abs(v) <= 8 * np.pi**2 * A * factorial(q) * csum**2 * block


def test_coefficient_tail_trend():
    from math import factorial, sqrt

    rows = coeff_tail_bound(1.0, 30)[4:]
    q = np.array([r[0] for r in rows])
    scaled = np.array([r[1] * sqrt(factorial(r[0] - 1)) / 2.0 ** r[0] for r in rows])
    slope = np.polyfit(q, np.log(scaled), 1)[0]
    assert slope < 0
    assert scaled[q >= 20].max() < scaled[q <= 10].max()


def test_odd_terms_vanish_at_level_zero():
    assert all(abs(beta_coeff(n, 0.0)) < 1e-300 for n in (1, 3, 5, 7))
