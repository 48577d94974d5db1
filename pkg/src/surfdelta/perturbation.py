"""Small-deformation series for r = 1 + eps * rho on the unit sphere.

``rho`` is given by real orthonormal harmonic coefficients; ``X0`` is the
constant value of its order-0 part and ``I_n`` the squared L2 norm of its
order-n part.  Through second order in eps:

    alpha_eps = 1 - eps X0 + eps^2 (X0^2 - (1/4pi) sum_n (n^2 + 1/n)/2 * I_n)
    sbar_eps  = 1 + eps X0 + eps^2 (1/4pi) sum_n (n^2 + n + 2)/4 * I_n
    alpha_eps * sbar_eps = 1 - eps^2 (1/4pi) sum_n c_n I_n,
        c_n = n^2/2 + 1/(2n) - (n^2 + n + 2)/4

Here alpha_eps is the critical constant coupling and sbar_eps the surface
radius of the deformed surface.  ``c_1 = 0``, so a pure order-1 deformation
needs the fourth-order term.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .harmonics import HarmonicCoeffs, mode_energy

FOUR_PI = 4.0 * math.pi


def product_coefficient(n):
    """c_n in the second-order deficit of alpha_eps * sbar_eps (n >= 1)."""
    if n < 1:
        raise ValueError("c_n is defined for n >= 1")
    return 0.5 * n * n + 0.5 / n - (n * n + n + 2) / 4.0


def alpha_coefficient(n):
    return 0.5 * (n * n + 1.0 / n)


def sbar_coefficient(n):
    return (n * n + n + 2) / 4.0


@dataclass
class PerturbationSeries:
    X0: float
    energies: dict = field(default_factory=dict)
    alpha1: float = 0.0
    alpha2: float = 0.0
    sbar1: float = 0.0
    sbar2: float = 0.0
    product2: float = 0.0
    # exterior / interior first-order harmonic amplitudes, per (n, m)
    S1: dict = field(default_factory=dict)
    R1: dict = field(default_factory=dict)
    R1_0: float = 0.0
    fourth_order: float = None

    def mode_table(self):
        return [
            {"n": n, "I_n": I, "c_n": product_coefficient(n)} for n, I in sorted(self.energies.items())
        ]

    def to_record(self):
        rec = {k: getattr(self, k) for k in ("X0", "alpha1", "alpha2", "sbar1", "sbar2", "product2")}
        rec["fourth_order"] = self.fourth_order
        rec["modes"] = self.mode_table()
        return rec


def series_from_profile(rho):
    """Second-order series coefficients for the deformation profile ``rho``."""
    if not isinstance(rho, HarmonicCoeffs):
        rho = HarmonicCoeffs.from_triples(rho)
    X0 = rho.get(0, 0) / math.sqrt(FOUR_PI)
    energies = {n: mode_energy(rho, n) for n in range(1, rho.n_max + 1)}
    energies = {n: I for n, I in energies.items() if I > 0.0}
    alpha2 = X0 * X0 - sum(alpha_coefficient(n) * I for n, I in energies.items()) / FOUR_PI
    sbar2 = sum(sbar_coefficient(n) * I for n, I in energies.items()) / FOUR_PI
    product2 = -sum(product_coefficient(n) * I for n, I in energies.items()) / FOUR_PI
    S1, R1 = {}, {}
    for (n, m), v in rho.coeffs.items():
        if n >= 1:
            S1[(n, m)] = (1.0 + n) / (2.0 * n) * v
            R1[(n, m)] = (1.0 - n) / (2.0 * n) * v
    fourth = None
    if set(energies) == {1} and X0 == 0.0:
        fourth = fourth_order_n1(rho.get(1, 0), rho.get(1, -1), rho.get(1, 1))
    return PerturbationSeries(
        X0=X0, energies=energies, alpha1=-X0, alpha2=alpha2, sbar1=X0, sbar2=sbar2,
        product2=product2, S1=S1, R1=R1, R1_0=-X0, fourth_order=fourth,
    )


def predict(series, epsilon):
    """Truncated-series values ``{alpha_eps, sbar_eps, product}``.

    The product uses its own combined expansion (the eps^1 terms cancel) plus
    the fourth-order term when the series carries one.
    """
    e = float(epsilon)
    alpha = 1.0 + e * series.alpha1 + e * e * series.alpha2
    sbar = 1.0 + e * series.sbar1 + e * e * series.sbar2
    product = 1.0 + e * e * series.product2
    if series.fourth_order is not None:
        product += e**4 * series.fourth_order
    return {"alpha_eps": alpha, "sbar_eps": sbar, "product": product}


def fourth_order_n1(A, B, C):
    """eps^4 coefficient of alpha_eps * sbar_eps for rho = A Y(1,0) + B Y(1,-1) + C Y(1,1), as published."""
    s = A * A + B * B + C * C
    return -3.0 * s * s / (20.0 * math.pi)


def fourth_order_n1_translation(A, B, C):
    """The same coefficient derived from the second-order series.

    A pure order-1 profile of amplitude d = eps*sqrt(A^2+B^2+C^2)*sqrt(3/4pi)
    is a translated sphere plus the order-2 bump d^2 sin^2/2; since the
    product is invariant under translation, the n = 2 part of that bump
    gives -d^4/180.
    """
    s = A * A + B * B + C * C
    return -s * s / (320.0 * math.pi**2)


# ---------------------------------------------------------------------------
# BEM side of the comparison
# ---------------------------------------------------------------------------


def _critical_alpha(mesh):
    from .bs_operator import DensityWeight, assemble, lambda_max

    op = assemble(mesh, 0.0)
    return 1.0 / lambda_max(op, DensityWeight.constant_strength(mesh, 1.0)).lambda_max


def deform_point(rho, epsilon, level, r0=1.0, alpha_ref=None):
    """BEM critical constant strength and product for one signed epsilon.

    ``alpha_ref`` is the same quantity for the undeformed sphere on the same
    level; dividing by ``alpha_ref * r0`` removes most of the discretisation
    error, since the product is exactly 1 on the sphere.
    """
    from .geometry import RadialHarmonic, build_mesh, spec_area, surface_radius

    spec = RadialHarmonic(r0, float(epsilon), tuple(tuple(t) for t in rho))
    mesh = build_mesh(spec, level)
    alpha = _critical_alpha(mesh)
    sbar = surface_radius(spec_area(spec))
    product = alpha * sbar
    normalized = product / (alpha_ref * r0) if alpha_ref else product
    return {
        "level": level, "epsilon": float(epsilon), "n_panels": mesh.n_panels, "alpha_eps": alpha,
        "sbar_eps": sbar, "product": product, "product_normalized": normalized, "deficit": 1.0 - normalized,
    }


def deform_scan(rho, eps_grid, levels, r0=1.0, symmetric=True, normalize=True, extrapolate=True):
    """Deficit 1 - alpha_eps * sbar_eps over an epsilon grid and mesh levels.

    ``symmetric`` averages the deficits at +eps and -eps, which cancels the
    odd powers of eps.  Returns ``(level_rows, eps_rows)``; the extrapolated
    deficit is the Richardson value over ``levels`` when ``extrapolate``.
    """
    from .convergence import richardson
    from .geometry import Sphere, build_mesh

    series = series_from_profile(rho)
    level_rows = []
    per_eps = {float(e): [] for e in eps_grid}
    for level in levels:
        alpha_ref = _critical_alpha(build_mesh(Sphere(r0), level)) if normalize else None
        for eps in per_eps:
            signs = (1.0, -1.0) if symmetric else (1.0,)
            pts = [deform_point(rho, s * eps, level, r0, alpha_ref) for s in signs]
            level_rows += pts
            per_eps[eps].append(float(np.mean([p["deficit"] for p in pts])))
    eps_rows = []
    for eps, defs in per_eps.items():
        if extrapolate and len(defs) >= 3:
            deficit, err = richardson(defs)
        else:
            deficit, err = defs[-1], float("nan")
        pred = predict(series, eps)
        pred_def = 1.0 - pred["product"]
        row = {"epsilon": eps}
        row.update({f"deficit_L{lv}": d for lv, d in zip(levels, defs)})
        row.update(
            deficit=deficit, deficit_err=err, deficit_eps2=deficit / eps**2, deficit_eps4=deficit / eps**4,
            series_alpha=pred["alpha_eps"], series_sbar=pred["sbar_eps"], series_product=pred["product"],
            series_deficit=pred_def, series_deficit_eps2=pred_def / eps**2,
        )
        eps_rows.append(row)
    return level_rows, eps_rows


def limit_coefficient(eps, deficits):
    """Fit deficit / eps^2 = a + b eps^2 and return ``(a, b)``; ``a`` is the eps -> 0 limit."""
    eps = np.asarray(eps, dtype=float)
    y = np.asarray(deficits, dtype=float) / eps**2
    if len(eps) == 1:
        return float(y[0]), float("nan")
    b, a = np.polyfit(eps**2, y, 1)
    return float(a), float(b)


def loglog_fit(eps, deficits):
    """Least-squares ``deficit = prefactor * eps^slope``; needs positive deficits."""
    eps = np.asarray(eps, dtype=float)
    d = np.asarray(deficits, dtype=float)
    if np.any(d <= 0):
        raise ValueError("log-log fit needs positive deficits")
    slope, icpt = np.polyfit(np.log(eps), np.log(d), 1)
    return float(slope), float(np.exp(icpt))
