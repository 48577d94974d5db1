import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import eval_legendre

from surfdelta import geometry as g
from surfdelta.bs_operator import NumericalError, assemble
from surfdelta.capacity import gauss_energy, solve_equilibrium, verify_theorem1
from surfdelta.convergence import richardson


def spheroid_capacity(a, b):
    e = math.sqrt(a * a - b * b)
    return 2 * e / math.log((a + e) / (a - e))


def ellipsoid_capacity(a, b, c):
    """C = 2 / int_0^inf dt / sqrt((a^2+t)(b^2+t)(c^2+t)) (Gaussian units)."""
    val, _ = integrate.quad(lambda t: 1 / math.sqrt((a * a + t) * (b * b + t) * (c * c + t)), 0, np.inf,
                            epsabs=1e-14, epsrel=1e-12)
    return 2 / val


def test_two_capacity_oracles_agree():
    assert spheroid_capacity(2, 1) == pytest.approx(ellipsoid_capacity(1, 1, 2), rel=1e-10)
    assert spheroid_capacity(2, 1) == pytest.approx(1.3151907, abs=1e-7)


def test_sphere_capacity_and_uniform_density(cache):
    mesh = cache.mesh(g.Sphere(), 3)
    cap = solve_equilibrium(mesh, cache.op(g.Sphere(), 3))
    assert cap.C == pytest.approx(1.0, rel=5e-3)
    assert cap.positive
    assert cap.residual < 1e-12
    assert cap.sigma @ mesh.areas == pytest.approx(1.0, rel=1e-13)
    assert np.max(np.abs(cap.sigma * mesh.total_area - 1)) < 0.02
    assert cap.gauss_energy == pytest.approx(1 / cap.C, rel=1e-12)


def test_spheroid_capacity_converges(cache):
    spec = g.Spheroid(2.0, 1.0)
    Cs = [solve_equilibrium(cache.mesh(spec, lv), cache.op(spec, lv)).C for lv in (1, 2, 3)]
    est, _ = richardson(Cs)
    assert est == pytest.approx(ellipsoid_capacity(1, 1, 2), rel=2e-3)
    # density piles up at the tips of a prolate body
    cap = solve_equilibrium(cache.mesh(spec, 2), cache.op(spec, 2))
    mesh = cache.mesh(spec, 2)
    tip = np.argmax(mesh.centroids[:, 2])
    waist = np.argmin(np.abs(mesh.centroids[:, 2]))
    assert cap.sigma[tip] > cap.sigma[waist]


def test_revolution_eps1_is_a_spheroid():
    # built-in profile at eps = 1: prolate spheroid with semi-axes 1 and 1/pi^2
    spec = g.Revolution(1.0)
    Cs = [solve_equilibrium(g.build_mesh(spec, lv)).C for lv in (0, 1, 2)]
    est, _ = richardson(Cs)
    assert est == pytest.approx(spheroid_capacity(1.0, 1 / math.pi**2), rel=1e-2)


def test_capacity_scales_with_size():
    m = g.build_mesh(g.Sphere(), 2)
    C1 = solve_equilibrium(m).C
    C2 = solve_equilibrium(g.dilate(m, 2.0)).C
    assert C2 == pytest.approx(2 * C1, rel=1e-12)


def test_gauss_energy_smooth_oracle(cache):
    # mu = (1 + a z)/(4 pi) on the unit sphere: energy 1 + a^2/9 exactly
    mesh = cache.mesh(g.Sphere(), 3)
    a = 0.8
    mu = (1 + a * mesh.centroids[:, 2]) / (4 * math.pi)
    mu /= mu @ mesh.areas
    e = gauss_energy(mesh, mu, op=cache.op(g.Sphere(), 3))
    assert e == pytest.approx(1 + a * a / 9, rel=6e-3)


def test_gauss_energy_hemisphere_oracle(cache):
    # unit charge spread uniformly on the upper half: sum over l of (int_0^1 P_l)^2
    def half_moment(l):
        if l == 0:
            return 1.0
        return (eval_legendre(l - 1, 0.0) - eval_legendre(l + 1, 0.0)) / (2 * l + 1)

    exact = sum(half_moment(l) ** 2 for l in range(4000))
    assert half_moment(1) == pytest.approx(0.5)
    mesh = cache.mesh(g.Sphere(), 3)
    upper = mesh.centroids[:, 2] > 0
    mu = np.where(upper, 1.0, 0.0)
    mu /= mu @ mesh.areas
    e = gauss_energy(mesh, mu, op=cache.op(g.Sphere(), 3))
    # the staircase equator costs O(h); 2% is ample at level 3
    assert e == pytest.approx(exact, rel=2e-2)


def test_gauss_energy_minimal(cache):
    spec = g.Spheroid(2.0, 1.0)
    mesh, op = cache.mesh(spec, 2), cache.op(spec, 2)
    cap = solve_equilibrium(mesh, op)
    rng = np.random.default_rng(7)
    for _ in range(100):
        mu = rng.uniform(0.05, 1.0, mesh.n_panels)
        mu /= mu @ mesh.areas
        assert gauss_energy(mesh, mu, op=op) >= 1 / cap.C - 1e-12


def test_gauss_energy_input_checks(sphere_l2):
    op = assemble(sphere_l2)
    with pytest.raises(ValueError):
        gauss_energy(sphere_l2, np.ones(3), op=op)
    with pytest.raises(ValueError):
        gauss_energy(sphere_l2, -np.ones(sphere_l2.n_panels) / sphere_l2.total_area, op=op)
    with pytest.raises(ValueError):
        gauss_energy(sphere_l2, np.ones(sphere_l2.n_panels), op=op)
    with pytest.raises(ValueError):
        solve_equilibrium(sphere_l2, assemble(sphere_l2, 1.0))
    with pytest.raises(NumericalError):
        solve_equilibrium(sphere_l2, assemble(sphere_l2, storage="matrix_free"))


@pytest.mark.parametrize("spec", [g.Sphere(), g.Spheroid(2.0, 1.0), g.RadialHarmonic(1.0, 0.2, ((2, 0, 1.0),))])
def test_theorem1_single_level(cache, spec):
    rep = verify_theorem1(cache.mesh(spec, 2), cache.op(spec, 2))
    assert rep.pass_a and rep.pass_b
    assert rep.lambda_equilibrium == pytest.approx(1.0, abs=1e-12)
    assert rep.interaction_radius <= rep.capacity * (1 + 1e-12)


def test_spheroid_closed_form_sphere_limit():
    for b in (0.9, 0.99, 0.999999):
        assert spheroid_capacity(1.0, b) == pytest.approx(ellipsoid_capacity(b, b, 1.0), rel=1e-8)
    assert spheroid_capacity(1.0, 1 - 1e-9) == pytest.approx(1.0, abs=1e-6)


def ring_spread(mesh, sigma):
    """Largest relative spread of sigma over panels sharing a centroid height."""
    _, inv = np.unique(np.round(mesh.centroids[:, 2], 9), return_inverse=True)
    return max(np.ptp(sigma[inv == k]) / sigma[inv == k].mean() for k in range(inv.max() + 1))


@pytest.mark.parametrize("spec,level", [
    (g.Spheroid(2.0, 1.0), 3),
    (g.Revolution(1.0), 1),
    (g.RadialHarmonic(1.0, 0.2, ((2, 0, 1.0),)), 4),
])
def test_sigma_constant_on_latitude_rings(cache, spec, level):
    mesh = cache.mesh(spec, level)
    cap = solve_equilibrium(mesh, cache.op(spec, level))
    assert ring_spread(mesh, cap.sigma) < 1e-2
