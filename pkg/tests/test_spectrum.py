import math

import numpy as np
import pytest
from scipy.optimize import newton

from surfdelta import geometry as g
from surfdelta.bs_operator import DensityWeight, NumericalError, assemble, lambda_max
from surfdelta.convergence import richardson
from surfdelta.spectrum import (
    CRITICAL, SUBCRITICAL, SUPERCRITICAL, Certificate, SpectralVerdict, certificate, classify,
    elongated_sweep, ground_state, kappa_sweep, sphere_kappa_star, sphere_s_wave_lambda, spectral_verdict,
)


def oracle_kappa(alpha0):
    """Newton on alpha0 (1 - exp(-2k)) = 2k, started right of the root (independent of brentq)."""
    return newton(lambda k: alpha0 * (-math.expm1(-2 * k)) - 2 * k, x0=alpha0, tol=1e-15, maxiter=200)


@pytest.mark.parametrize("alpha0", [1.1, 1.5, 2.0, 5.0])
def test_sphere_kappa_oracles_agree(alpha0):
    assert sphere_kappa_star(alpha0) == pytest.approx(oracle_kappa(alpha0), rel=1e-12)
    assert sphere_s_wave_lambda(alpha0, sphere_kappa_star(alpha0)) == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(ValueError):
        sphere_kappa_star(0.9)


@pytest.mark.parametrize("alpha0,expected", [(0.5, SUBCRITICAL), (1.0, CRITICAL), (2.0, SUPERCRITICAL)])
def test_classify_sphere(cache, alpha0, expected):
    v = classify(cache.mesh(g.Sphere(), 2), alpha0, op=cache.op(g.Sphere(), 2))
    assert v.classification == expected
    assert v.lambda_at_zero == pytest.approx(alpha0, rel=1e-2)


def test_sphere_oracle_across_kappa():
    levels = (1, 2, 3)
    meshes = [g.build_mesh(g.Sphere(), lv) for lv in levels]
    for kappa in (0.1, 0.5, 1.0, 2.0):
        lams = [lambda_max(assemble(m, kappa), DensityWeight.constant_strength(m, 1.0)).lambda_max for m in meshes]
        est, _ = richardson(lams)
        assert est == pytest.approx(sphere_s_wave_lambda(1.0, kappa), rel=1e-3)


def test_g_strictly_decreasing(sphere_l2):
    sweep = kappa_sweep(sphere_l2, 1.5, np.linspace(0.0, 3.0, 13))
    lams = [lam for _, lam in sweep]
    assert all(b < a for a, b in zip(lams, lams[1:]))


def test_ground_state_sphere(sphere_l2):
    k, e, evals = ground_state(sphere_l2, 1.5)
    assert e == -k * k
    assert k == pytest.approx(sphere_kappa_star(1.5), rel=2e-2)
    g_val = lambda_max(assemble(sphere_l2, k), DensityWeight.constant_strength(sphere_l2, 1.5)).lambda_max - 1
    assert abs(g_val) < 1e-10
    # warm start lands on the same root with fewer evaluations
    k2, _, evals2 = ground_state(sphere_l2, 1.5, guess=1.02 * k)
    assert k2 == pytest.approx(k, rel=1e-9)
    assert evals2 < evals


def test_ground_state_subcritical_raises(sphere_l2):
    with pytest.raises(NumericalError):
        ground_state(sphere_l2, 0.8)


def test_ground_state_approaches_threshold(sphere_l2):
    lam1 = classify(sphere_l2, 1.0).lambda_at_zero
    ks = [ground_state(sphere_l2, (1 + d) / lam1)[0] for d in (0.2, 0.05, 0.01)]
    assert ks[0] > ks[1] > ks[2] > 0
    assert ks[2] < 0.02


def test_certificate_sphere_inconclusive(sphere_l2):
    c = certificate(sphere_l2, 1.0)
    assert not c.holds
    assert c.gamma_inf == pytest.approx(1.0, rel=1e-2)
    assert c.threshold == pytest.approx(2.0, rel=1e-2)
    assert certificate(sphere_l2, 1e-3).holds
    with pytest.raises(ValueError):
        certificate(sphere_l2, 0.0)


def test_verdict_invariants():
    with pytest.raises(ValueError):
        SpectralVerdict(SUBCRITICAL, 0.5, 0.02, kappa_star=0.3)
    with pytest.raises(NumericalError):
        SpectralVerdict(CRITICAL, 1.0, 0.02, certificate=Certificate(0.1, 0.2, True))
    v = SpectralVerdict(SUBCRITICAL, 0.2, 0.02, certificate=Certificate(0.1, 0.2, True))
    assert v.to_record()["certificate_holds"] is True


def test_spectral_verdict_supercritical(sphere_l2):
    v = spectral_verdict(sphere_l2, 2.0)
    assert v.classification == SUPERCRITICAL
    assert v.kappa_star == pytest.approx(sphere_kappa_star(2.0), rel=2e-2)
    assert not v.certificate.holds


def test_elongated_sweep_small():
    rows, eps_star, monotone = elongated_sweep(1.0, [1.0, 2.0, 3.0], level=0, stop_at_certificate=False)
    assert [r["epsilon"] for r in rows] == [3.0, 2.0, 1.0]
    assert monotone
    assert eps_star == 3.0
    for r in rows:
        assert r["area"] > 1.0
        assert r["certificate"] and r["lambda_max"] < 1.0
    rows2, _, _ = elongated_sweep(1.0, [1.0, 2.0, 3.0], level=0)
    assert len(rows2) == 1


def test_certificate_sound_on_builtin_surfaces():
    specs = [g.Sphere(), g.Spheroid(2.0, 1.0), g.RadialHarmonic(1.0, 0.2, ((2, 0, 1.0),)), g.Revolution(1.0)]
    for spec in specs:
        mesh = g.build_mesh(spec, 1)
        op = assemble(mesh)
        for alpha0 in (0.1, 0.4, 1.0, 1.9, 3.0):
            cert = certificate(mesh, alpha0, op=op)
            lam = lambda_max(op, DensityWeight.constant_strength(mesh, alpha0)).lambda_max
            # Perron bound: lambda <= alpha0 * max row sum = threshold / 2
            assert lam <= cert.threshold / 2 * (1 + 1e-12)
            if cert.holds:
                assert lam < 1.0
