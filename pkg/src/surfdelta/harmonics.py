"""Real orthonormal spherical harmonics and quadrature on the unit sphere.

Angle convention: every function takes ``polar`` (colatitude, 0 at +z) first
and ``azimuth`` second.  Perturbation formulas written with phi as the polar
angle and theta as the azimuth map as ``polar = phi``, ``azimuth = theta``.

Real harmonics carry no Condon-Shortley phase::

    Y(n, 0)  = P(n, 0)
    Y(n, m)  = sqrt(2) P(n, m) cos(m azimuth)      m > 0
    Y(n, -m) = sqrt(2) P(n, m) sin(m azimuth)      m > 0

with ``P(n, m)`` the orthonormalised associated Legendre function, so that
``Y(1, 0) = sqrt(3/4pi) cos(polar)`` and ``Y(1, 1) = sqrt(3/4pi) sin(polar) cos(azimuth)``.
"""
from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np


def index(n, m):
    """Flat position of (n, m) in arrays ordered n = 0, 1, ...; m = -n..n."""
    return n * n + n + m


def _check_nm(n, m):
    if n < 0 or abs(m) > n or int(n) != n or int(m) != m:
        raise ValueError(f"invalid harmonic index (n={n}, m={m})")


def legendre_normalized(n_max, x):
    """Orthonormalised associated Legendre values ``P[n, m, k]`` for m <= n.

    Recurrences carry the normalisation, so they stay finite up to n ~ 100.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((n_max + 1, n_max + 1, x.size))
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, n_max + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, n_max):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, n_max + 1):
        for n in range(m + 2, n_max + 1):
            a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    return P


def real_harmonics(n_max, polar, azimuth):
    """All real harmonics up to ``n_max``, shape ((n_max+1)**2, npts)."""
    polar = np.atleast_1d(np.asarray(polar, dtype=float))
    azimuth = np.broadcast_to(np.asarray(azimuth, dtype=float), polar.shape).ravel()
    polar = polar.ravel()
    P = legendre_normalized(n_max, np.cos(polar))
    Y = np.empty(((n_max + 1) ** 2, polar.size))
    r2 = math.sqrt(2.0)
    for n in range(n_max + 1):
        Y[index(n, 0)] = P[n, 0]
        for m in range(1, n + 1):
            Y[index(n, m)] = r2 * P[n, m] * np.cos(m * azimuth)
            Y[index(n, -m)] = r2 * P[n, m] * np.sin(m * azimuth)
    return Y


def eval_harmonic(n, m, polar, azimuth):
    """Value of the real orthonormal harmonic Y(n, m) at the given angles."""
    _check_nm(n, m)
    out = real_harmonics(n, polar, azimuth)[index(n, m)]
    return float(out[0]) if np.ndim(polar) == 0 and np.ndim(azimuth) == 0 else out


def harmonic_gradients(n_max, polar, azimuth):
    """Surface-gradient components of every real harmonic.

    Returns ``(d_polar, d_az)`` with ``d_polar = dY/dpolar`` and
    ``d_az = (1/sin polar) dY/dazimuth``; points must avoid the poles.
    """
    polar = np.atleast_1d(np.asarray(polar, dtype=float)).ravel()
    azimuth = np.broadcast_to(np.asarray(azimuth, dtype=float), polar.shape).ravel()
    P = legendre_normalized(n_max + 1, np.cos(polar))
    sin_p = np.sin(polar)
    dP = np.zeros((n_max + 1, n_max + 1, polar.size))
    for n in range(n_max + 1):
        if n >= 1:
            dP[n, 0] = -math.sqrt(n * (n + 1.0)) * P[n, 1]
        for m in range(1, n + 1):
            lo = math.sqrt((n + m) * (n - m + 1.0)) * P[n, m - 1]
            hi = math.sqrt((n + m + 1.0) * (n - m)) * P[n, m + 1] if m < n else 0.0
            # the m-1 = 0 neighbour carries no sqrt(2); P itself never does
            dP[n, m] = 0.5 * (lo - hi)
    n_coef = (n_max + 1) ** 2
    d_polar = np.empty((n_coef, polar.size))
    d_az = np.empty((n_coef, polar.size))
    r2 = math.sqrt(2.0)
    for n in range(n_max + 1):
        d_polar[index(n, 0)] = dP[n, 0]
        d_az[index(n, 0)] = 0.0
        for m in range(1, n + 1):
            c, s = np.cos(m * azimuth), np.sin(m * azimuth)
            d_polar[index(n, m)] = r2 * dP[n, m] * c
            d_polar[index(n, -m)] = r2 * dP[n, m] * s
            d_az[index(n, m)] = -r2 * m * P[n, m] * s / sin_p
            d_az[index(n, -m)] = r2 * m * P[n, m] * c / sin_p
    return d_polar, d_az


def sphere_quadrature(order):
    """Gauss-Legendre (in cos polar) x uniform azimuth rule, exact to degree ``order``.

    Returns ``(polar, azimuth, weights)`` flattened; weights sum to 4 pi.
    """
    n_pol = order // 2 + 1
    n_az = order + 1
    x, w = np.polynomial.legendre.leggauss(n_pol)
    az = 2.0 * math.pi * np.arange(n_az) / n_az
    polar = np.repeat(np.arccos(x), n_az)
    azimuth = np.tile(az, n_pol)
    weights = np.repeat(w, n_az) * (2.0 * math.pi / n_az)
    return polar, azimuth, weights


@dataclass
class HarmonicCoeffs:
    """Real coefficients ``c[(n, m)]`` of a function on the unit sphere."""

    coeffs: dict = field(default_factory=dict)
    n_max: int = 0

    def __post_init__(self):
        clean = {}
        for (n, m), v in self.coeffs.items():
            _check_nm(n, m)
            if v != 0.0:
                clean[(int(n), int(m))] = clean.get((int(n), int(m)), 0.0) + float(v)
        self.coeffs = clean
        top = max((n for n, _ in clean), default=0)
        self.n_max = max(int(self.n_max), top)

    @classmethod
    def from_triples(cls, triples, n_max=0):
        return cls({(int(n), int(m)): float(v) for n, m, v in triples}, n_max)

    @classmethod
    def from_array(cls, arr, tol=0.0):
        n_max = int(round(math.sqrt(len(arr)))) - 1
        c = {}
        for n in range(n_max + 1):
            for m in range(-n, n + 1):
                v = float(arr[index(n, m)])
                if abs(v) > tol:
                    c[(n, m)] = v
        return cls(c, n_max)

    def get(self, n, m):
        return self.coeffs.get((n, m), 0.0)

    def triples(self):
        return [(n, m, v) for (n, m), v in sorted(self.coeffs.items())]

    def to_array(self, n_max=None):
        n_max = self.n_max if n_max is None else n_max
        arr = np.zeros((n_max + 1) ** 2)
        for (n, m), v in self.coeffs.items():
            if n <= n_max:
                arr[index(n, m)] = v
        return arr

    def evaluate(self, polar, azimuth):
        Y = real_harmonics(self.n_max, polar, azimuth)
        return self.to_array() @ Y

    def gradient(self, polar, azimuth):
        """``(d/dpolar, (1/sin polar) d/dazimuth)`` of the expanded function."""
        dp, da = harmonic_gradients(self.n_max, polar, azimuth)
        arr = self.to_array()
        return arr @ dp, arr @ da

    def sup_norm_estimate(self, order=None):
        """Max |f| over a dense quadrature grid (used for embedding checks)."""
        order = order or max(64, 8 * self.n_max)
        p, a, _ = sphere_quadrature(order)
        p = np.concatenate([p, [0.0, math.pi]])
        a = np.concatenate([a, [0.0, 0.0]])
        return float(np.max(np.abs(self.evaluate(p, a)))) if self.coeffs else 0.0


def read_coeffs(path):
    """Read "n m value" lines; '#' starts a comment."""
    triples = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        n, m, v = line.split()
        triples.append((int(n), int(m), float(v)))
    return HarmonicCoeffs.from_triples(triples)


def write_coeffs(coeffs, path, header=None):
    lines = [f"# {header}"] if header else []
    lines += [f"{n} {m} {v!r}" for n, m, v in coeffs.triples()]
    Path(path).write_text("\n".join(lines) + "\n")


def expand(func, n_max, order=None):
    """Project a function on the unit sphere onto real harmonics up to ``n_max``.

    ``func`` is either a callable ``f(polar, azimuth)`` or an array of samples
    already taken at the nodes of ``sphere_quadrature(order)``.
    """
    order = 2 * n_max if order is None else int(order)
    if order < 2 * n_max:
        raise ValueError(f"quadrature order {order} < 2*n_max = {2 * n_max}")
    polar, azimuth, w = sphere_quadrature(order)
    if callable(func):
        vals = np.asarray(func(polar, azimuth), dtype=float)
    else:
        vals = np.asarray(func, dtype=float).ravel()
        if vals.size != polar.size:
            raise ValueError(f"expected {polar.size} samples for order {order}, got {vals.size}")
    Y = real_harmonics(n_max, polar, azimuth)
    return HarmonicCoeffs.from_array(Y @ (w * vals))


def mode_energy(coeffs, n):
    """Integral of the squared order-n component over the unit sphere."""
    if n < 0 or n > coeffs.n_max:
        raise ValueError(f"order {n} outside 0..{coeffs.n_max}")
    return float(sum(coeffs.get(n, m) ** 2 for m in range(-n, n + 1)))


def angular_energy(coeffs, n):
    """Integral of |surface gradient|^2 of the order-n component: n(n+1) I_n."""
    return n * (n + 1) * mode_energy(coeffs, n)


def angular_energy_quadrature(coeffs, n, order=None):
    """Same quantity as :func:`angular_energy`, by direct quadrature of the gradient."""
    if n < 0 or n > coeffs.n_max:
        raise ValueError(f"order {n} outside 0..{coeffs.n_max}")
    part = HarmonicCoeffs({k: v for k, v in coeffs.coeffs.items() if k[0] == n}, n)
    order = order or 2 * n + 4
    polar, azimuth, w = sphere_quadrature(order)
    gp, ga = part.gradient(polar, azimuth)
    return float(w @ (gp * gp + ga * ga))
