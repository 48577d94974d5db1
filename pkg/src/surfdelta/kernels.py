"""Hot numeric kernels: flat-triangle single-layer integrals and BEM assembly.

Every kernel exists twice, a numba version (``*_nb``) and a vectorised numpy
version (``*_np``).  The public wrappers pick one according to
``surfdelta._accel.USE_NUMBA`` unless a backend is passed explicitly.

Entry convention for the raw matrix::

    G[i, j] = 1/(4 pi) * mean over panel i of the integral over panel j of exp(-kappa r)/r

i.e. the potential of a unit density on panel j, averaged over panel i with
the 7-point degree-5 rule.  Near pairs (centroid distance below ``near`` times
the larger panel diameter) take the inner 1/r integral in closed form and add
a 7x7 product-rule quadrature of the bounded remainder ``expm1(-kappa r)/r``;
far pairs use the 7x7 product rule on the whole kernel.  Panel averaging
(rather than a point value at the centroid) keeps ``G[i, j]/a_j`` symmetric
up to quadrature error, which matters for first-kind solves.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

INV4PI = 1.0 / (4.0 * math.pi)

# Strang-Fix / Dunavant 7-point rule, exact for degree 5; weights sum to 1.
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827
TRI_BARY = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI_WEIGHTS = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])

DEFAULT_NEAR = 3.0


def quadrature_points(tri_verts):
    """Physical quadrature nodes, shape (N, 7, 3), for panels (N, 3, 3)."""
    return np.einsum("qk,nkd->nqd", TRI_BARY, tri_verts)


# ---------------------------------------------------------------------------
# closed-form integral of 1/|x - y| over a flat triangle
# ---------------------------------------------------------------------------


@njit(cache=True)
def tri_potential_nb(x0, x1, x2, tri, nrm):
    """Integral of 1/|x - y| over the flat triangle ``tri`` (3x3, CCW about ``nrm``)."""
    h = (x0 - tri[0, 0]) * nrm[0] + (x1 - tri[0, 1]) * nrm[1] + (x2 - tri[0, 2]) * nrm[2]
    r0 = x0 - h * nrm[0]
    r1 = x1 - h * nrm[1]
    r2 = x2 - h * nrm[2]
    ah = abs(h)
    total = 0.0
    for k in range(3):
        kb = (k + 1) % 3
        e0 = tri[kb, 0] - tri[k, 0]
        e1 = tri[kb, 1] - tri[k, 1]
        e2 = tri[kb, 2] - tri[k, 2]
        L = math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
        s0 = e0 / L
        s1 = e1 / L
        s2 = e2 / L
        # outward in-plane edge normal m = s x n
        m0 = s1 * nrm[2] - s2 * nrm[1]
        m1 = s2 * nrm[0] - s0 * nrm[2]
        m2 = s0 * nrm[1] - s1 * nrm[0]
        a0 = tri[k, 0] - r0
        a1 = tri[k, 1] - r1
        a2 = tri[k, 2] - r2
        t0 = a0 * m0 + a1 * m1 + a2 * m2
        if abs(t0) <= 1e-14 * L:
            continue
        sm = a0 * s0 + a1 * s1 + a2 * s2
        sp = sm + L
        r0sq = t0 * t0 + h * h
        rm = math.sqrt(r0sq + sm * sm)
        rp = math.sqrt(r0sq + sp * sp)
        num = rp + sp if sp >= 0.0 else r0sq / (rp - sp)
        den = rm + sm if sm >= 0.0 else r0sq / (rm - sm)
        total += t0 * math.log(num / den)
        if ah > 0.0:
            total -= ah * (
                math.atan(t0 * sp / (r0sq + ah * rp)) - math.atan(t0 * sm / (r0sq + ah * rm))
            )
    return total


def tri_potential_np(x, tri, nrm):
    """Vectorised counterpart of :func:`tri_potential_nb`.

    ``x`` (M, 3) observation points, ``tri`` (M, 3, 3), ``nrm`` (M, 3).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tri = np.asarray(tri, dtype=float).reshape(-1, 3, 3)
    nrm = np.atleast_2d(np.asarray(nrm, dtype=float))
    h = np.einsum("md,md->m", x - tri[:, 0], nrm)
    rho = x - h[:, None] * nrm
    ah = np.abs(h)
    total = np.zeros(len(x))
    for k in range(3):
        pa = tri[:, k]
        pb = tri[:, (k + 1) % 3]
        e = pb - pa
        L = np.linalg.norm(e, axis=1)
        s = e / L[:, None]
        m = np.cross(s, nrm)
        a = pa - rho
        t0 = np.einsum("md,md->m", a, m)
        sm = np.einsum("md,md->m", a, s)
        sp = sm + L
        r0sq = t0 * t0 + h * h
        rm = np.sqrt(r0sq + sm * sm)
        rp = np.sqrt(r0sq + sp * sp)
        live = np.abs(t0) > 1e-14 * L
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.where(sp >= 0.0, rp + sp, r0sq / (rp - sp))
            den = np.where(sm >= 0.0, rm + sm, r0sq / (rm - sm))
            contrib = t0 * np.log(num / den)
            contrib -= ah * (
                np.arctan(t0 * sp / (r0sq + ah * rp)) - np.arctan(t0 * sm / (r0sq + ah * rm))
            )
        total += np.where(live, contrib, 0.0)
    return total


# ---------------------------------------------------------------------------
# single matrix entry (numba) and dense / matrix-free drivers
# ---------------------------------------------------------------------------


@njit(cache=True)
def _entry_nb(i, j, cent, tv, nrm, area, diam, qp, qw, near, kappa):
    dx = cent[i, 0] - cent[j, 0]
    dy = cent[i, 1] - cent[j, 1]
    dz = cent[i, 2] - cent[j, 2]
    dc = math.sqrt(dx * dx + dy * dy + dz * dz)
    nq = qw.shape[0]
    is_near = dc < near * max(diam[i], diam[j])
    val = 0.0
    if is_near:
        for p in range(nq):
            val += qw[p] * tri_potential_nb(qp[i, p, 0], qp[i, p, 1], qp[i, p, 2], tv[j], nrm[j])
        if kappa == 0.0:
            return val * INV4PI
    s = 0.0
    for p in range(nq):
        for q in range(nq):
            ex = qp[i, p, 0] - qp[j, q, 0]
            ey = qp[i, p, 1] - qp[j, q, 1]
            ez = qp[i, p, 2] - qp[j, q, 2]
            d = math.sqrt(ex * ex + ey * ey + ez * ez)
            if is_near:
                # bounded remainder exp(-kappa d)/d - 1/d
                k = -kappa if d < 1e-300 else math.expm1(-kappa * d) / d
            elif kappa > 0.0:
                k = math.exp(-kappa * d) / d
            else:
                k = 1.0 / d
            s += qw[p] * qw[q] * k
    return (val + area[j] * s) * INV4PI


@njit(parallel=True, cache=True)
def _assemble_nb(cent, tv, nrm, area, diam, qp, qw, near, kappa, out):
    n = cent.shape[0]
    for i in prange(n):
        for j in range(n):
            out[i, j] = _entry_nb(i, j, cent, tv, nrm, area, diam, qp, qw, near, kappa)


@njit(parallel=True, cache=True)
def _assemble_sym_nb(cent, tv, nrm, area, diam, qp, qw, near, kappa, out):
    # upper triangle only; far pairs are exactly symmetric under the product rule
    n = cent.shape[0]
    for i in prange(n):
        for j in range(i, n):
            kij = _entry_nb(i, j, cent, tv, nrm, area, diam, qp, qw, near, kappa) / area[j]
            if i == j:
                out[i, i] = kij
                continue
            dx = cent[i, 0] - cent[j, 0]
            dy = cent[i, 1] - cent[j, 1]
            dz = cent[i, 2] - cent[j, 2]
            if math.sqrt(dx * dx + dy * dy + dz * dz) < near * max(diam[i], diam[j]):
                kji = _entry_nb(j, i, cent, tv, nrm, area, diam, qp, qw, near, kappa) / area[i]
                v = 0.5 * (kij + kji)
            else:
                v = kij
            out[i, j] = v
            out[j, i] = v


@njit(parallel=True, cache=True)
def _matfree_matvec_nb(cent, tv, nrm, area, diam, qp, qw, near, kappa, x, y):
    n = cent.shape[0]
    for i in prange(n):
        acc = 0.0
        for j in range(n):
            gij = _entry_nb(i, j, cent, tv, nrm, area, diam, qp, qw, near, kappa)
            gji = _entry_nb(j, i, cent, tv, nrm, area, diam, qp, qw, near, kappa)
            acc += 0.5 * (gij / area[j] + gji / area[i]) * x[j]
        y[i] = acc


@njit(parallel=True, cache=True)
def _symmetrize_nb(g, area):
    n = g.shape[0]
    for i in prange(n):
        for j in range(i + 1, n):
            v = 0.5 * (g[i, j] / area[j] + g[j, i] / area[i])
            g[i, j] = v
            g[j, i] = v
        g[i, i] = g[i, i] / area[i]


@njit(parallel=True, cache=True)
def _matvec_nb(k, x, y):
    n = k.shape[0]
    for i in prange(n):
        acc = 0.0
        for j in range(n):
            acc += k[i, j] * x[j]
        y[i] = acc


def _block_np(rows, cols, cent, tv, nrm, area, diam, qp, qw, near, kappa):
    """Raw entries ``G[rows][:, cols]`` (numpy path)."""
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    diff = cent[rows][:, None, :] - cent[None, cols, :]
    dc = np.sqrt(np.einsum("bnd,bnd->bn", diff, diff))
    near_mask = dc < near * np.maximum(diam[rows][:, None], diam[None, cols])
    qi = qp[rows]
    out = np.empty((len(rows), len(cols)))
    for p in range(len(qw)):
        qd = qi[:, None, None, p, :] - qp[None, cols, :, :]
        d = np.sqrt(np.einsum("bnqd,bnqd->bnq", qd, qd))
        with np.errstate(divide="ignore", invalid="ignore"):
            if kappa > 0.0:
                k = np.where(near_mask[:, :, None],
                             np.where(d < 1e-300, -kappa, np.expm1(-kappa * d) / d),
                             np.exp(-kappa * d) / d)
            else:
                k = np.where(near_mask[:, :, None], 0.0, 1.0 / d)
        term = qw[p] * (k @ qw)
        if p == 0:
            out[:] = term
        else:
            out += term
    out *= area[None, cols]
    bi, bj = np.nonzero(near_mask)
    if bi.size:
        ii = rows[bi]
        jj = cols[bj]
        nq = len(qw)
        xs = qp[ii].reshape(-1, 3)
        pot = tri_potential_np(xs, np.repeat(tv[jj], nq, axis=0), np.repeat(nrm[jj], nq, axis=0))
        out[bi, bj] += pot.reshape(-1, nq) @ qw
    return out * INV4PI


def _assemble_np(cent, tv, nrm, area, diam, qp, qw, near, kappa, out, block=16):
    n = cent.shape[0]
    cols = np.arange(n)
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        out[rows] = _block_np(rows, cols, cent, tv, nrm, area, diam, qp, qw, near, kappa)


def _matfree_matvec_np(cent, tv, nrm, area, diam, qp, qw, near, kappa, x, y, block=16):
    n = cent.shape[0]
    cols = np.arange(n)
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        g = _block_np(rows, cols, cent, tv, nrm, area, diam, qp, qw, near, kappa)
        gt = _block_np(cols, rows, cent, tv, nrm, area, diam, qp, qw, near, kappa).T
        k = 0.5 * (g / area[None, :] + gt / area[rows, None])
        y[rows] = np.einsum("ij,j->i", k, x)


def _symmetrize_np(g, area):
    g /= area[None, :]
    g += g.T.copy()
    g *= 0.5


def _matvec_np(k, x, y):
    y[:] = np.einsum("ij,j->i", k, x)


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------


def _use_numba(backend):
    if backend is None:
        return _accel.USE_NUMBA
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend == "numba" and _accel.HAVE_NUMBA


def _panel_args(mesh):
    tv = mesh.vertices[mesh.triangles]
    return (
        np.ascontiguousarray(mesh.centroids),
        np.ascontiguousarray(tv),
        np.ascontiguousarray(mesh.normals),
        np.ascontiguousarray(mesh.areas),
        np.ascontiguousarray(mesh.diameters),
        np.ascontiguousarray(quadrature_points(tv)),
        TRI_WEIGHTS,
    )


def assemble_raw(mesh, kappa=0.0, near=DEFAULT_NEAR, backend=None):
    """Dense raw matrix G of panel-averaged potentials (not yet symmetrised)."""
    args = _panel_args(mesh)
    n = len(mesh.areas)
    out = np.empty((n, n))
    if _use_numba(backend):
        _assemble_nb(*args, float(near), float(kappa), out)
    else:
        _assemble_np(*args, float(near), float(kappa), out)
    return out


def assemble_kernel(mesh, kappa=0.0, near=DEFAULT_NEAR, backend=None):
    """Dense symmetric kernel matrix K (areas excluded), K_ij = (G_ij/a_j + G_ji/a_i)/2."""
    args = _panel_args(mesh)
    n = len(mesh.areas)
    out = np.empty((n, n))
    if _use_numba(backend):
        _assemble_sym_nb(*args, float(near), float(kappa), out)
    else:
        _assemble_np(*args, float(near), float(kappa), out)
        _symmetrize_np(out, args[3])
    return out


def symmetrize(g, area, backend=None):
    """In place: G -> K with K_ij = (G_ij/a_j + G_ji/a_i)/2.  Returns ``g``."""
    if _use_numba(backend):
        _symmetrize_nb(g, area)
    else:
        _symmetrize_np(g, area)
    return g


def matvec(k, x, backend=None):
    """Row-ordered dense product, bitwise independent of the thread count."""
    y = np.empty(k.shape[0])
    x = np.ascontiguousarray(x, dtype=float)
    if _use_numba(backend):
        _matvec_nb(k, x, y)
    else:
        _matvec_np(k, x, y)
    return y


def matfree_matvec(mesh, x, kappa=0.0, near=DEFAULT_NEAR, backend=None, _args=None):
    """Apply the symmetrised kernel matrix K without storing it."""
    args = _args if _args is not None else _panel_args(mesh)
    x = np.ascontiguousarray(x, dtype=float)
    y = np.empty(len(x))
    if _use_numba(backend):
        _matfree_matvec_nb(*args, float(near), float(kappa), x, y)
    else:
        _matfree_matvec_np(*args, float(near), float(kappa), x, y)
    return y
