"""Criticality verdicts, bound states and the no-bound-state certificate.

Criticality is read off lambda = lambda_max(alpha Gamma(0)): below 1 the
operator is subcritical, above 1 supercritical, and inside a tolerance band
around 1 the discrete answer is "critical".  A bound state at energy
-kappa^2 exists where lambda_max(alpha Gamma(i kappa)) = 1.
"""
from dataclasses import dataclass
import math

import numpy as np

from .bs_operator import DensityWeight, NumericalError, assemble, gamma_inf_norm, lambda_max

SUBCRITICAL, CRITICAL, SUPERCRITICAL = "subcritical", "critical", "supercritical"


@dataclass
class Certificate:
    gamma_inf: float
    threshold: float
    holds: bool


@dataclass
class SpectralVerdict:
    classification: str
    lambda_at_zero: float
    tol_band: float
    kappa_star: float = None
    energy: float = None
    certificate: Certificate = None

    def __post_init__(self):
        if (self.kappa_star is not None) and self.classification != SUPERCRITICAL:
            raise ValueError("only a supercritical verdict carries a ground state")
        if self.certificate is not None and self.certificate.holds and self.classification != SUBCRITICAL:
            raise NumericalError("certificate holds but the operator is not subcritical")

    def to_record(self):
        rec = {
            "classification": self.classification,
            "lambda_at_zero": self.lambda_at_zero,
            "tol_band": self.tol_band,
            "kappa_star": self.kappa_star,
            "energy": self.energy,
        }
        if self.certificate is not None:
            rec.update(gamma_inf=self.certificate.gamma_inf, certificate_threshold=self.certificate.threshold,
                       certificate_holds=self.certificate.holds)
        return rec


def _as_strength(mesh, alpha):
    if isinstance(alpha, DensityWeight):
        if alpha.relative:
            raise ValueError("expected a strength, got a relative density")
        return alpha
    return DensityWeight.constant_strength(mesh, float(alpha))


def verdict_from_lambda(lam, tol_band):
    if lam < 1.0 - tol_band:
        return SUBCRITICAL
    if lam > 1.0 + tol_band:
        return SUPERCRITICAL
    return CRITICAL


def classify(mesh, alpha, tol_band=0.02, op=None):
    """Sub/critical/supercritical verdict for the strength ``alpha`` (scalar or weight)."""
    weight = _as_strength(mesh, alpha)
    op = op if op is not None else assemble(mesh, 0.0)
    lam = lambda_max(op, weight).lambda_max
    return SpectralVerdict(verdict_from_lambda(lam, tol_band), lam, tol_band)


def bs_gap(mesh, alpha, kappa, storage="auto"):
    """g(kappa) = lambda_max(alpha Gamma(i kappa)) - 1."""
    weight = _as_strength(mesh, alpha)
    return lambda_max(assemble(mesh, kappa, storage=storage), weight).lambda_max - 1.0


def ground_state(mesh, alpha, bracket=None, tol=1e-10, coarse_rel=1e-2, max_eval=80, guess=None):
    """Decay rate kappa* of the ground state (energy -kappa*^2).

    Bisection on the decreasing function g(kappa) until the bracket is
    ``coarse_rel`` wide, then a safeguarded secant polish until |g| < tol.
    ``guess`` (e.g. the value from a coarser mesh) replaces the default
    bracket by a 5% window around it; either bracket is widened
    geometrically until g changes sign.
    Returns ``(kappa_star, energy, evaluations)``.
    """
    weight = _as_strength(mesh, alpha)
    if bracket is None:
        bracket = (0.95 * guess, 1.05 * guess) if guess else (1e-6, 10.0 / mesh.diameter())
    lo, hi = map(float, bracket)
    evals = 0

    def g(k):
        nonlocal evals
        evals += 1
        if evals > max_eval:
            raise NumericalError("ground-state search exceeded its evaluation budget")
        return lambda_max(assemble(mesh, k), weight).lambda_max - 1.0

    g_lo = g(lo)
    while g_lo <= 0.0 and guess and lo > 1e-6:
        hi, lo = lo, max(0.5 * lo, 1e-6)
        g_lo = g(lo)
    if g_lo <= 0.0:
        raise NumericalError(f"no sign change: g({lo:g}) = {g_lo:.3g} <= 0 (not supercritical)")
    g_hi = g(hi)
    while g_hi > 0.0:
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)
    while hi - lo > coarse_rel * hi:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid > 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    # secant from the bracket ends, kept inside [lo, hi]
    k0, g0, k1, g1 = lo, g_lo, hi, g_hi
    while True:
        k2 = k1 - g1 * (k1 - k0) / (g1 - g0)
        if not lo < k2 < hi:
            k2 = 0.5 * (lo + hi)
        g2 = g(k2)
        if abs(g2) < tol:
            return k2, -k2 * k2, evals
        if g2 > 0.0:
            lo = k2
        else:
            hi = k2
        k0, g0, k1, g1 = k1, g1, k2, g2


def certificate(mesh, alpha0, op=None):
    """No-bound-state certificate 2 alpha0 ||Gamma||_inf < 1 for a constant coupling."""
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    gi = gamma_inf_norm(mesh, op=op)[0]
    threshold = 2.0 * alpha0 * gi
    return Certificate(gamma_inf=gi, threshold=threshold, holds=threshold < 1.0)


def spectral_verdict(mesh, alpha0, tol_band=0.02, with_ground_state=True, with_certificate=True):
    """Full verdict for a constant coupling ``alpha0``."""
    op = assemble(mesh, 0.0)
    lam = lambda_max(op, DensityWeight.constant_strength(mesh, alpha0)).lambda_max
    cls = verdict_from_lambda(lam, tol_band)
    cert = certificate(mesh, alpha0, op=op) if with_certificate else None
    kappa_star = energy = None
    if cls == SUPERCRITICAL and with_ground_state:
        kappa_star, energy, _ = ground_state(mesh, alpha0)
    return SpectralVerdict(cls, lam, tol_band, kappa_star, energy, cert)


def sphere_s_wave_lambda(alpha0, kappa, radius=1.0):
    """Top eigenvalue of alpha0 Gamma(i kappa) on a sphere: the constant mode."""
    x = 2.0 * kappa * radius
    if x == 0.0:
        return alpha0 * radius
    return alpha0 * radius * (-math.expm1(-x)) / x


def kappa_sweep(mesh, alpha, kappas):
    """(kappa, lambda_max) pairs on a grid."""
    weight = _as_strength(mesh, alpha)
    return [(float(k), lambda_max(assemble(mesh, k), weight).lambda_max) for k in np.asarray(kappas, float)]


def sphere_kappa_star(alpha0, radius=1.0):
    """Root of alpha0 R (1 - exp(-2 kappa R)) / (2 kappa R) = 1 (needs alpha0 R > 1)."""
    from scipy.optimize import brentq

    if not alpha0 * radius > 1.0:
        raise ValueError("the sphere has no bound state for alpha0 R <= 1")
    hi = 1.0
    while sphere_s_wave_lambda(alpha0, hi, radius) > 1.0:
        hi *= 2.0
    return brentq(lambda k: sphere_s_wave_lambda(alpha0, k, radius) - 1.0, 1e-12, hi, xtol=1e-15, rtol=1e-14)


def elongated_sweep(alpha0, eps_grid, level=1, profile=None, n_u0=6, panel_aspect=1.0, stop_at_certificate=True):
    """Certificate sweep over the elongated family, largest eps first.

    Returns ``(rows, eps_star, monotone)``: one row per swept eps, the first
    eps whose certificate holds (or None), and whether ||Gamma_eps||_inf
    decreases strictly along the sweep.
    """
    from .geometry import Profile, Revolution, build_mesh, spec_area

    profile = profile if profile is not None else Profile.builtin()
    rows, eps_star = [], None
    for eps in sorted((float(e) for e in eps_grid), reverse=True):
        mesh = build_mesh(Revolution(eps, profile, n_u0, panel_aspect), level)
        op = assemble(mesh, 0.0)
        cert = certificate(mesh, alpha0, op=op)
        lam = lambda_max(op, DensityWeight.constant_strength(mesh, alpha0)).lambda_max
        if cert.holds and not lam < 1.0:
            raise NumericalError(f"certificate holds at eps={eps:g} but lambda_max = {lam!r} >= 1")
        rows.append({
            "epsilon": eps, "level": level, "n_panels": mesh.n_panels,
            "area": spec_area(mesh.spec), "mesh_area": mesh.total_area,
            "gamma_inf": cert.gamma_inf, "threshold": cert.threshold, "certificate": cert.holds,
            "lambda_max": lam, "subcritical": lam < 1.0,
        })
        if cert.holds and eps_star is None:
            eps_star = eps
            if stop_at_certificate:
                break
    gi = [r["gamma_inf"] for r in rows]
    monotone = all(b < a for a, b in zip(gi, gi[1:]))
    return rows, eps_star, monotone
