"""Electrostatic capacity, equilibrium charge density and the Gauss energy."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from .bs_operator import DensityWeight, NumericalError, assemble, critical_strength, lambda_max


@dataclass
class CapacityResult:
    C: float
    sigma: np.ndarray
    residual: float
    gauss_energy: float
    positive: bool
    level: int
    n_panels: int

    def to_record(self):
        return {
            "capacity": self.C,
            "residual": self.residual,
            "gauss_energy": self.gauss_energy,
            "inverse_capacity": 1.0 / self.C,
            "sigma_min": float(self.sigma.min()),
            "sigma_max": float(self.sigma.max()),
            "sigma_positive": self.positive,
            "level": self.level,
            "n_panels": self.n_panels,
        }


def _laplace_op(mesh, op):
    if op is None:
        return assemble(mesh, 0.0)
    if op.kappa != 0.0:
        raise ValueError("capacity needs the kappa = 0 operator")
    return op


def solve_equilibrium(mesh, op=None):
    """Unit-charge equilibrium density and capacity.

    Unknowns are panel charges ``q = a * sigma`` and the surface potential
    ``c = 1/C``; the bordered system ``[[4 pi K, -1], [1^T, 0]]`` is symmetric
    up to the sign of the last column and is solved densely.
    """
    op = _laplace_op(mesh, op)
    n = mesh.n_panels
    if op.kernel is None:
        raise NumericalError("dense capacity solve needs a dense operator")
    A = np.empty((n + 1, n + 1))
    A[:n, :n] = 4.0 * math.pi * op.kernel
    A[:n, n] = 1.0
    A[n, :n] = 1.0
    A[n, n] = 0.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    try:
        sol = linalg.solve(A, rhs, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise NumericalError(f"equilibrium system is singular: {exc}") from exc
    q, c = sol[:n], -sol[n]
    if not c > 0:
        raise NumericalError(f"non-positive surface potential {c!r}; mesh too coarse?")
    sigma = q / mesh.areas
    potential = 4.0 * math.pi * op.apply(sigma)
    residual = float(np.max(np.abs(potential - c)))
    energy = gauss_energy(mesh, sigma, op=op, check=False)
    return CapacityResult(
        C=1.0 / c,
        sigma=sigma,
        residual=residual,
        gauss_energy=energy,
        positive=bool(np.all(sigma > 0)),
        level=mesh.level,
        n_panels=n,
    )


def gauss_energy(mesh, mu, op=None, check=True):
    """Double integral of mu(x) mu(y)/|x - y| for a unit-charge density ``mu``."""
    mu = np.asarray(mu, dtype=float)
    if check:
        if mu.shape != (mesh.n_panels,):
            raise ValueError("density does not match the mesh")
        if np.any(mu < 0):
            raise ValueError("density must be non-negative")
        total = float(mu @ mesh.areas)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density has total charge {total!r}, expected 1")
    op = _laplace_op(mesh, op)
    q = mu * mesh.areas
    return float(4.0 * math.pi * (q @ op.apply_kernel(q)))


@dataclass
class Theorem1Report:
    capacity: float
    lambda_equilibrium: float
    interaction_radius: float
    gap: float
    sigma_positive: bool
    pass_a: bool
    pass_b: bool

    def to_record(self):
        return dict(self.__dict__)


def verify_theorem1(mesh, op=None, tol_a=5e-3, tol_b=5e-3):
    """Check both capacity statements on one mesh.

    (a) the weight 4 pi C sigma is exactly critical: lambda_max = 1;
    (b) the constant interaction has interaction radius <= C.
    ``tol_b`` is relative to C.
    """
    op = _laplace_op(mesh, op)
    cap = solve_equilibrium(mesh, op)
    if not cap.positive:
        raise NumericalError("equilibrium density not positive; refine the mesh")
    lam = lambda_max(op, DensityWeight(4.0 * math.pi * cap.C * cap.sigma, relative=False)).lambda_max
    radius = critical_strength(mesh, op=op).interaction_radius
    gap = cap.C - radius
    return Theorem1Report(
        capacity=cap.C,
        lambda_equilibrium=lam,
        interaction_radius=radius,
        gap=gap,
        sigma_positive=cap.positive,
        pass_a=abs(lam - 1.0) <= tol_a,
        pass_b=gap >= -tol_b * cap.C,
    )
