import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surfdelta import geometry as g
from surfdelta.harmonics import HarmonicCoeffs, expand
from surfdelta.perturbation import (
    alpha_coefficient, deform_point, deform_scan, fourth_order_n1, fourth_order_n1_translation,
    limit_coefficient, loglog_fit, predict, product_coefficient, sbar_coefficient, series_from_profile,
)


def test_coefficients():
    assert product_coefficient(1) == 0.0
    assert product_coefficient(2) == 0.25
    assert product_coefficient(3) == pytest.approx(4.5 + 1 / 6 - 14 / 4)
    assert alpha_coefficient(2) - sbar_coefficient(2) == product_coefficient(2)
    with pytest.raises(ValueError):
        product_coefficient(0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30))
def test_product_coefficient_is_nonnegative(n):
    # c_n = (n - 1)(n^2 - 2) / (4 n)
    c = product_coefficient(n)
    assert c >= 0
    assert (c == 0) == (n == 1)


def test_sbar_coefficient_against_exact_area():
    # independent check of the eps^2 coefficient of the surface radius
    for n in (1, 2, 4):
        rho = ((n, 0, 1.0),)
        eps = 1e-3
        sb = [g.surface_radius(g.spec_area(g.RadialHarmonic(1.0, s * eps, rho))) for s in (1, -1)]
        coeff = (0.5 * (sb[0] + sb[1]) - 1) / eps**2
        assert coeff == pytest.approx(sbar_coefficient(n) / (4 * math.pi), rel=1e-5)


def test_y20_series():
    s = series_from_profile([(2, 0, 1.0)])
    assert s.X0 == 0.0
    assert s.product2 == pytest.approx(-1 / (16 * math.pi))
    assert s.alpha2 == pytest.approx(-2.25 / (4 * math.pi))
    assert s.fourth_order is None
    p = predict(s, 0.1)
    assert 1 - p["product"] == pytest.approx(0.01 / (16 * math.pi))
    # the truncated factors multiply to the product plus their eps^4 cross term
    assert p["alpha_eps"] * p["sbar_eps"] - p["product"] == pytest.approx(1e-4 * s.alpha2 * s.sbar2, rel=1e-6)


def test_constant_mode_is_a_dilation():
    # rho = Y00 * c: r = 1 + eps c / sqrt(4 pi), alpha = 1/r, product 1 to second order
    s = series_from_profile([(0, 0, math.sqrt(4 * math.pi))])
    assert s.X0 == pytest.approx(1.0)
    eps = 0.01
    p = predict(s, eps)
    assert p["alpha_eps"] == pytest.approx(1 / (1 + eps), abs=1e-6)
    assert p["product"] == 1.0


def test_order_one_profile_carries_fourth_order():
    s = series_from_profile([(1, 0, 1.0), (1, 1, 0.5)])
    assert s.product2 == 0.0
    assert s.fourth_order == fourth_order_n1(1.0, 0.0, 0.5)
    assert fourth_order_n1(1, 0, 0) == pytest.approx(-3 / (20 * math.pi))


def test_translation_fourth_order_via_harmonic_expansion():
    """Cross-check the translation argument numerically.

    r = 1 + d cos(polar) differs from the unit sphere translated by d by the
    bump -d^2 sin^2/2 + O(d^4); the product is translation invariant, so the
    eps^4 term is the second-order deficit of that bump's n = 2 part.
    """
    A = 1.3
    d_per_eps = A * math.sqrt(3 / (4 * math.pi))
    bump = expand(lambda p, a: -0.5 * d_per_eps**2 * np.sin(p) ** 2, 4)
    deficit = sum(product_coefficient(n) * sum(bump.get(n, m) ** 2 for m in range(-n, n + 1))
                  for n in range(1, 5)) / (4 * math.pi)
    assert -fourth_order_n1_translation(A, 0, 0) == pytest.approx(deficit, rel=1e-12)
    # and the translated sphere really is r = d cos + sqrt(1 - d^2 sin^2)
    d = 0.05
    t = np.linspace(0, math.pi, 7)
    exact = d * np.cos(t) + np.sqrt(1 - d * d * np.sin(t) ** 2)
    assert np.allclose(exact, 1 + d * np.cos(t) - 0.5 * d * d * np.sin(t) ** 2, atol=d**4)


def test_published_and_translation_coefficients_differ():
    ratio = fourth_order_n1(1, 0, 0) / fourth_order_n1_translation(1, 0, 0)
    assert ratio == pytest.approx(48 * math.pi)


def test_fits():
    eps = np.array([0.1, 0.2, 0.3])
    a, b = limit_coefficient(eps, 0.02 * eps**2 + 0.5 * eps**4)
    assert a == pytest.approx(0.02) and b == pytest.approx(0.5)
    slope, pref = loglog_fit(eps, 3e-3 * eps**4)
    assert slope == pytest.approx(4.0) and pref == pytest.approx(3e-3)
    with pytest.raises(ValueError):
        loglog_fit(eps, [1e-3, -1e-3, 2e-3])


def test_deform_point_sphere_is_exact():
    p = deform_point((), 0.2, 1)
    q = deform_point((), 0.2, 1, alpha_ref=p["alpha_eps"])
    assert q["deficit"] == 0.0
    assert p["sbar_eps"] == 1.0


def test_deform_scan_zero_profile():
    _, rows = deform_scan((), [0.1, 0.2], [1, 2, 3])
    assert all(r["deficit"] == 0.0 for r in rows)


def test_deform_scan_y20_coarse():
    # coarse levels: sign and magnitude right, exact agreement is the acceptance suite's job
    _, rows = deform_scan(((2, 0, 1.0),), [0.2], [1, 2, 3])
    assert rows[0]["deficit"] / 0.04 == pytest.approx(1 / (16 * math.pi), rel=0.05)
    assert rows[0]["series_deficit"] == pytest.approx(0.04 / (16 * math.pi))


def test_series_accepts_coeff_object():
    c = HarmonicCoeffs.from_triples([(2, 1, 0.5), (3, -3, 0.2)])
    s = series_from_profile(c)
    assert set(s.energies) == {2, 3}
    assert s.S1[(2, 1)] == pytest.approx(0.75 * 0.5)
    assert s.R1[(3, -3)] == pytest.approx(-1 / 3 * 0.2)
    rec = s.to_record()
    assert rec["modes"][0]["n"] == 2
