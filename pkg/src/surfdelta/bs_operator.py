"""Birman-Schwinger single-layer operator on a surface mesh.

Discretisation: piecewise-constant densities, panel-averaged test functions.
The raw matrix ``G[i, j]`` (see :mod:`surfdelta.kernels`) acts on density
values, ``(Gamma u)_i ~ sum_j G[i, j] u_j`` with row ``i`` the quadrature
average over panel ``i``.  The near field is integrated analytically on one
side only, which leaves ``G[i, j] / a_j`` slightly non-symmetric, so the
operator keeps the symmetrised kernel matrix::

    K[i, j] = (G[i, j] / a_j + G[j, i] / a_i) / 2,      Gamma u = K (a * u)

Areas therefore live outside ``K``.  For a positive weight ``w`` (a strength
alpha or a relative density) the weighted operator ``w Gamma`` is similar to
the symmetric positive matrix ``D K D`` with ``D = diag(sqrt(w a))``, and that
form is what the eigen-solvers see.
"""
from dataclasses import dataclass, field
import math
import struct

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from . import kernels
from .kernels import DEFAULT_NEAR

DENSE_LIMIT = 6000
# above this size the top few eigenpairs come from ARPACK, not a dense solve
EIGH_LIMIT = 1500


class NumericalError(RuntimeError):
    """A solver failed to converge or produced an inadmissible result."""


@dataclass
class DensityWeight:
    """Per-panel positive function: a strength alpha (1/length) or a relative density (1/length^2)."""

    values: np.ndarray
    relative: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0.0):
            raise ValueError("density weight must be strictly positive")

    @classmethod
    def constant_relative(cls, mesh):
        return cls(np.full(mesh.n_panels, 1.0 / mesh.total_area), relative=True)

    @classmethod
    def constant_strength(cls, mesh, alpha0):
        return cls(np.full(mesh.n_panels, float(alpha0)), relative=False)

    @classmethod
    def normalized(cls, mesh, values):
        """Relative density proportional to ``values``."""
        values = np.asarray(values, dtype=float)
        return cls(values / float(values @ mesh.areas), relative=True)

    def total(self, mesh):
        """Global strength [alpha] (or 1 for a relative density)."""
        return float(self.values @ mesh.areas)

    def check(self, mesh):
        if self.values.shape != (mesh.n_panels,):
            raise ValueError("weight does not match the mesh")
        if self.relative and abs(self.total(mesh) - 1.0) > 1e-12:
            raise ValueError(f"relative density integrates to {self.total(mesh)!r}, not 1")


@dataclass
class BsOperator:
    """Discretised Gamma(i kappa) on ``mesh``; dense or matrix-free."""

    mesh: object
    kappa: float = 0.0
    storage: str = "dense"
    near: float = DEFAULT_NEAR
    backend: str = None
    kernel: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self._args = None

    @property
    def n(self):
        return self.mesh.n_panels

    def apply_kernel(self, x):
        """K x (symmetric kernel matrix, areas excluded)."""
        if self.kernel is not None:
            return kernels.matvec(self.kernel, x, backend=self.backend)
        if self._args is None:
            self._args = kernels._panel_args(self.mesh)
        return kernels.matfree_matvec(self.mesh, x, self.kappa, self.near, self.backend, _args=self._args)

    def apply(self, u):
        """Gamma applied to the per-panel density ``u``."""
        return self.apply_kernel(self.mesh.areas * np.asarray(u, dtype=float))

    def row_integrals(self):
        """(Gamma 1)(c_i) = 1/(4 pi) * integral of exp(-kappa r)/r over the surface."""
        return self.apply(np.ones(self.n))

    def weighted(self, weight):
        """Symmetric matvec ``x -> D K D x`` for the weighted operator."""
        d = np.sqrt(weight.values * self.mesh.areas)
        return lambda x: d * self.apply_kernel(d * x)

    def dense_matrix(self):
        """The matrix acting on density values, G_sym = K diag(a)."""
        if self.kernel is None:
            raise NumericalError("matrix-free operator has no stored matrix")
        return self.kernel * self.mesh.areas[None, :]

    def dump(self, path):
        """Binary dump: magic, then n (int64), kappa (float64), level (int64), then G row-major."""
        G = self.dense_matrix()
        with open(path, "wb") as fh:
            fh.write(b"SDBS0001")
            fh.write(struct.pack("<qdq", self.n, float(self.kappa), int(self.mesh.level)))
            fh.write(np.ascontiguousarray(G, dtype="<f8").tobytes())


def load_dump(path):
    """Inverse of :meth:`BsOperator.dump`; returns ``(G, kappa, level)``."""
    with open(path, "rb") as fh:
        if fh.read(8) != b"SDBS0001":
            raise ValueError(f"{path}: not a surfdelta operator dump")
        n, kappa, level = struct.unpack("<qdq", fh.read(24))
        G = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
    return G, kappa, level


def assemble(mesh, kappa=0.0, storage="auto", near=DEFAULT_NEAR, backend=None):
    """Assemble Gamma(i kappa) for kernel exp(-kappa r)/(4 pi r)."""
    if not kappa >= 0:
        raise ValueError("kappa must be non-negative")
    if storage == "auto":
        storage = "dense" if mesh.n_panels <= DENSE_LIMIT else "matrix_free"
    if storage not in ("dense", "matrix_free"):
        raise ValueError(f"unknown storage mode {storage!r}")
    op = BsOperator(mesh, float(kappa), storage, float(near), backend)
    if storage == "dense":
        op.kernel = kernels.assemble_kernel(mesh, kappa, near, backend)
    return op


@dataclass
class CriticalityReport:
    lambda_max: float
    eigvec: np.ndarray
    critical_strength: float
    interaction_radius: float
    iterations: int
    residual: float
    level: int
    kappa: float
    n_panels: int
    method: str = "power"

    def to_record(self):
        return {
            "lambda_max": self.lambda_max,
            "critical_strength": self.critical_strength,
            "interaction_radius": self.interaction_radius,
            "iterations": self.iterations,
            "residual": self.residual,
            "level": self.level,
            "kappa": self.kappa,
            "n_panels": self.n_panels,
            "method": self.method,
            "eigvec_min": float(np.min(self.eigvec)),
            "eigvec_max": float(np.max(self.eigvec)),
        }


def _dense_top(op, weight, k=1):
    d = np.sqrt(weight.values * op.mesh.areas)
    if op.kernel is not None:
        B = d[:, None] * op.kernel * d[None, :]
        n = B.shape[0]
        if n <= EIGH_LIMIT:
            vals, vecs = linalg.eigh(B, subset_by_index=[n - k, n - 1])
            return vals[::-1], vecs[:, ::-1]
        lin = B
    else:
        lin = LinearOperator((op.n, op.n), matvec=op.weighted(weight), dtype=float)
    # fixed start vector keeps ARPACK deterministic
    vals, vecs = eigsh(lin, k=k, which="LA", v0=np.ones(op.n), tol=1e-13)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def lambda_max(op, weight, tol=1e-12, max_iter=2000):
    """Largest eigenvalue of ``weight * Gamma`` and its positive eigenvector.

    Power iteration on the symmetric form from the constant vector; stops when
    successive Rayleigh quotients agree to ``tol`` (relative).  Falls back to
    a dense symmetric eigensolve when the iteration cap is hit.
    """
    weight.check(op.mesh)
    apply = op.weighted(weight)
    x = np.ones(op.n) / math.sqrt(op.n)
    lam_old = None
    method, it = "power", 0
    for it in range(1, max_iter + 1):
        y = apply(x)
        lam = float(x @ y)
        x = y / np.linalg.norm(y)
        if lam_old is not None and abs(lam - lam_old) < tol * abs(lam):
            break
        lam_old = lam
    else:
        vals, vecs = _dense_top(op, weight, 1)
        lam, x = float(vals[0]), vecs[:, 0] * np.sign(vecs[:, 0].sum())
        method = "dense"
    if not lam > 0:
        raise NumericalError(f"non-positive top eigenvalue {lam!r}")
    y = apply(x)
    lam = float(x @ y)
    residual = float(np.linalg.norm(y - lam * x) / lam)
    a = op.mesh.areas
    u = np.sqrt(weight.values / a) * x
    u /= math.sqrt(float(u * u @ a))
    strength = (1.0 if weight.relative else weight.total(op.mesh)) / lam
    return CriticalityReport(
        lambda_max=lam,
        eigvec=u,
        critical_strength=strength,
        interaction_radius=strength / (4.0 * math.pi),
        iterations=it,
        residual=residual,
        level=op.mesh.level,
        kappa=op.kappa,
        n_panels=op.n,
        method=method,
    )


def top_eigenvalues(op, weight=None, k=2):
    """The ``k`` largest eigenvalues of ``weight * Gamma`` (plain Gamma by default)."""
    if weight is None:
        weight = DensityWeight(np.ones(op.n), relative=False)
    return _dense_top(op, weight, k)[0]


def critical_strength(mesh, rel_density=None, op=None):
    """Critical global strength [alpha^]_c = 1/||alpha^ Gamma|| at fixed relative density."""
    if rel_density is None:
        rel_density = DensityWeight.constant_relative(mesh)
    if not rel_density.relative:
        raise ValueError("critical_strength needs a relative density")
    if op is None:
        op = assemble(mesh, 0.0)
    elif op.kappa != 0.0:
        raise ValueError("critical strength is defined at kappa = 0")
    return lambda_max(op, rel_density)


def gamma_inf_norm(mesh, op=None):
    """(1/4 pi) max over collocation points of the integral of 1/r over the surface.

    Returns ``(value, panel_index, point)``.
    """
    if op is None:
        op = assemble(mesh, 0.0)
    rows = op.row_integrals()
    i = int(np.argmax(rows))
    return float(rows[i]), i, mesh.centroids[i].copy()
