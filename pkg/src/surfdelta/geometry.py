"""Surface families, triangulation and metric quantities.

Sphere-topology surfaces (sphere, spheroid, radially deformed sphere) are
meshed by icosahedron subdivision: new vertices are edge midpoints pushed back
onto the unit sphere and then mapped onto the exact surface.  Surfaces of
revolution use a (u, t) grid with ``v = -cos t`` and triangle fans at the two
poles, refined by splitting every triangle into four in parameter space.
Either way the panel count grows by exactly 4 per level and every vertex lies
on the exact surface.
"""
from dataclasses import asdict, dataclass, field
import json
import math
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .harmonics import HarmonicCoeffs, real_harmonics


class GeometryError(ValueError):
    """Invalid surface description or mesh."""


# ---------------------------------------------------------------------------
# surface specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("sphere radius must be positive")


@dataclass(frozen=True)
class Spheroid:
    """Spheroid with polar semi-axis ``a`` (along z) and equatorial semi-axis ``b``."""

    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise GeometryError("spheroid semi-axes must be positive")


@dataclass(frozen=True)
class RadialHarmonic:
    """r(polar, azimuth) = r0 (1 + epsilon * rho), rho given as (n, m, value) triples."""

    r0: float = 1.0
    epsilon: float = 0.0
    rho: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple((int(n), int(m), float(v)) for n, m, v in self.rho))
        if not self.r0 > 0:
            raise GeometryError("r0 must be positive")
        sup = self.coeffs.sup_norm_estimate()
        if abs(self.epsilon) * sup >= 1.0:
            raise GeometryError(
                f"embedding violated: |epsilon|*sup|rho| = {abs(self.epsilon) * sup:.4g} >= 1"
            )

    @property
    def coeffs(self):
        return HarmonicCoeffs.from_triples(self.rho)

    def radius(self, polar, azimuth):
        if not self.rho or self.epsilon == 0.0:
            return np.full(np.shape(polar), self.r0, dtype=float)
        return self.r0 * (1.0 + self.epsilon * self.coeffs.evaluate(polar, azimuth))


class Profile:
    """Meridian profile f on (-1, 1) for a surface of revolution.

    ``Profile.builtin("ellipse")`` is f(v) = sqrt(1 - v^2)/pi^2, which is
    positive inside, vanishes at v = +-1 with infinite slope there, and
    satisfies 2 pi * integral f = 1.  Tabulated profiles are interpolated with
    a monotone (PCHIP) cubic.
    """

    BUILTINS = ("ellipse",)

    def __init__(self, name, f, df, table=None):
        self.name = name
        self.f = f
        self.df = df
        self.table = table

    @classmethod
    def builtin(cls, name="ellipse"):
        if name != "ellipse":
            raise GeometryError(f"unknown built-in profile {name!r}; have {cls.BUILTINS}")
        c = 1.0 / math.pi**2

        def f(v):
            return c * np.sqrt(np.clip(1.0 - np.asarray(v, dtype=float) ** 2, 0.0, None))

        def df(v):
            v = np.asarray(v, dtype=float)
            with np.errstate(divide="ignore"):
                return -c * v / np.sqrt(np.clip(1.0 - v * v, 0.0, None))

        return cls("ellipse", f, df)

    @classmethod
    def tabulated(cls, v, fv, name="table"):
        v = np.asarray(v, dtype=float)
        fv = np.asarray(fv, dtype=float)
        if v.ndim != 1 or v.shape != fv.shape or v.size < 3 or np.any(np.diff(v) <= 0):
            raise GeometryError("profile table needs increasing v samples with matching f")
        if abs(v[0] + 1.0) > 1e-12 or abs(v[-1] - 1.0) > 1e-12:
            raise GeometryError("profile table must span [-1, 1]")
        interp = PchipInterpolator(v, fv)
        deriv = interp.derivative()
        prof = cls(name, lambda x: interp(np.asarray(x, dtype=float)), deriv, table=(v, fv))
        prof._integral = float(interp.integrate(-1.0, 1.0))
        return prof

    @classmethod
    def from_file(cls, path):
        data = np.loadtxt(path, comments="#", ndmin=2)
        return cls.tabulated(data[:, 0], data[:, 1], name=str(path))

    def integral(self):
        if hasattr(self, "_integral"):
            return self._integral
        val, _ = integrate.quad(lambda t: float(self.f(-math.cos(t))) * math.sin(t), 0.0, math.pi,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def validate(self):
        ends = self.f(np.array([-1.0, 1.0]))
        if np.any(np.abs(ends) > 1e-12):
            raise GeometryError("profile must vanish at v = +-1")
        probe = np.cos(np.linspace(0.0, math.pi, 2001)[1:-1])
        if np.any(self.f(probe) <= 0.0):
            raise GeometryError("profile must be positive on (-1, 1)")
        total = 2.0 * math.pi * self.integral()
        if abs(total - 1.0) > 1e-8:
            raise GeometryError(f"profile not normalised: 2 pi * integral f = {total:.12g}")

    def __eq__(self, other):
        return isinstance(other, Profile) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"Profile({self.name!r})"


@dataclass(frozen=True)
class Revolution:
    """x = eps f(v) cos u, y = eps f(v) sin u, z = v / eps.

    ``n_u0`` is the number of azimuthal segments at level 0; the number of
    meridian segments is chosen so base panels have roughly the requested
    length-to-width ``panel_aspect``.
    """

    epsilon: float = 1.0
    profile: Profile = field(default_factory=Profile.builtin)
    n_u0: int = 6
    panel_aspect: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise GeometryError("revolution epsilon must be positive")
        if self.n_u0 < 3:
            raise GeometryError("need at least 3 azimuthal segments")
        self.profile.validate()

    def point(self, u, t):
        v = -np.cos(t)
        r = self.epsilon * self.profile.f(v)
        return np.stack([r * np.cos(u), r * np.sin(u), v / self.epsilon], axis=-1)

    def n_t0(self):
        probe = np.linspace(-1.0, 1.0, 2001)
        circ = 2.0 * math.pi * self.epsilon * float(np.max(self.profile.f(probe)))
        length = 2.0 / self.epsilon
        return max(4, int(math.ceil(length * self.n_u0 / (self.panel_aspect * circ))))


SPEC_TYPES = {"sphere": Sphere, "spheroid": Spheroid, "radial": RadialHarmonic, "revolution": Revolution}


def describe(spec):
    """Plain-dict description of a spec (for headers and provenance)."""
    if isinstance(spec, Revolution):
        d = {"shape": "revolution", "epsilon": spec.epsilon, "profile": spec.profile.name,
             "n_u0": spec.n_u0, "panel_aspect": spec.panel_aspect}
        if spec.profile.table is not None:
            d["profile_table"] = [list(map(float, c)) for c in spec.profile.table]
        return d
    kind = {Sphere: "sphere", Spheroid: "spheroid", RadialHarmonic: "radial"}[type(spec)]
    d = {"shape": kind, **asdict(spec)}
    if kind == "radial":
        d["rho"] = [list(t) for t in spec.rho]
    return d


def spec_from_dict(d, base_dir=None):
    """Build a spec from a config mapping (keys documented in the README)."""
    d = dict(d)
    shape = d.pop("shape", None)
    try:
        if shape == "sphere":
            return Sphere(float(d.get("radius", 1.0)))
        if shape == "spheroid":
            return Spheroid(float(d.get("a", 2.0)), float(d.get("b", 1.0)))
        if shape == "radial":
            rho = d.get("rho", [])
            if "rho_file" in d:
                from .harmonics import read_coeffs

                path = Path(d["rho_file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                rho = read_coeffs(path).triples()
            return RadialHarmonic(float(d.get("r0", 1.0)), float(d.get("epsilon", 0.0)),
                                  tuple(tuple(t) for t in rho))
        if shape == "revolution":
            if "profile_table" in d and isinstance(d["profile_table"], (list, tuple)):
                prof = Profile.tabulated(*d["profile_table"])
            elif "profile_table" in d:
                path = Path(d["profile_table"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                prof = Profile.from_file(path)
            else:
                prof = Profile.builtin(d.get("profile", "ellipse"))
            return Revolution(float(d.get("epsilon", 1.0)), prof, int(d.get("n_u0", 6)),
                              float(d.get("panel_aspect", 1.0)))
    except (TypeError, KeyError) as exc:
        raise GeometryError(f"bad surface description: {exc}") from exc
    raise GeometryError(f"unknown shape {shape!r}; expected one of {sorted(SPEC_TYPES)}")


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    spec: object = None
    level: int = 0
    centroids: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)
    diameters: np.ndarray = field(init=False)
    total_area: float = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        p = v[t]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        twice = np.linalg.norm(cross, axis=1)
        if np.any(twice <= 0.0):
            raise GeometryError("degenerate panel (zero area)")
        edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        values = {
            "vertices": v,
            "triangles": t,
            "centroids": p.mean(axis=1),
            "areas": 0.5 * twice,
            "normals": cross / twice[:, None],
            "diameters": np.linalg.norm(edges, axis=2).max(axis=1),
        }
        for name, arr in values.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "total_area", float(np.sum(values["areas"])))

    @property
    def n_panels(self):
        return len(self.triangles)

    @property
    def h(self):
        """Mean panel diameter (mesh size)."""
        return float(np.mean(self.diameters))

    def diameter(self):
        """Largest vertex-to-vertex distance estimate (bounding-box diagonal)."""
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))


def _icosahedron():
    g = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
        [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
        [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(faces, n_vertices, midpoint):
    """Split every triangle into four; ``midpoint(a, b)`` returns new vertex data."""
    cache = {}
    new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
    counter = [n_vertices]
    extra = []

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        k = cache.get(key)
        if k is None:
            k = counter[0]
            counter[0] += 1
            cache[key] = k
            extra.append(midpoint(key[0], key[1]))
        return k

    for idx, (a, b, c) in enumerate(faces):
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces[4 * idx: 4 * idx + 4] = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return new_faces, extra


def icosphere(level):
    """Unit-sphere vertices and outward-oriented faces after ``level`` subdivisions."""
    v, f = _icosahedron()
    for _ in range(level):
        verts = v

        def midpoint(a, b, verts=verts):
            m = verts[a] + verts[b]
            return m / np.linalg.norm(m)

        f, extra = _subdivide(f, len(v), midpoint)
        v = np.vstack([v, np.array(extra)])
    return v, f


def _revolution_grid(spec, level):
    n_u, n_t = spec.n_u0, spec.n_t0()
    # parameter pairs (u, t); poles have u = nan
    params = [(math.nan, 0.0)]
    for k in range(1, n_t):
        for j in range(n_u):
            params.append((2.0 * math.pi * j / n_u, math.pi * k / n_t))
    params.append((math.nan, math.pi))
    south, north = 0, len(params) - 1

    def ring(k, j):
        return 1 + (k - 1) * n_u + (j % n_u)

    faces = []
    for j in range(n_u):
        faces.append([south, ring(1, j + 1), ring(1, j)])
        faces.append([north, ring(n_t - 1, j), ring(n_t - 1, j + 1)])
    for k in range(1, n_t - 1):
        for j in range(n_u):
            a, b = ring(k, j), ring(k, j + 1)
            c, d = ring(k + 1, j), ring(k + 1, j + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    faces = np.array(faces, dtype=np.int64)
    params = np.array(params, dtype=float)

    for _ in range(level):
        par = params

        def midpoint(a, b, par=par):
            ua, ta = par[a]
            ub, tb = par[b]
            t = 0.5 * (ta + tb)
            if math.isnan(ua):
                return (ub, t)
            if math.isnan(ub):
                return (ua, t)
            if abs(ua - ub) > math.pi:
                if ua < ub:
                    ua += 2.0 * math.pi
                else:
                    ub += 2.0 * math.pi
            return ((0.5 * (ua + ub)) % (2.0 * math.pi), t)

        faces, extra = _subdivide(faces, len(params), midpoint)
        params = np.vstack([params, np.array(extra)])

    u = np.nan_to_num(params[:, 0])
    verts = spec.point(u, params[:, 1])
    return verts, faces


def _orient_outward(verts, faces):
    """Flip the whole face list if the signed volume is negative."""
    p = verts[faces]
    vol = np.einsum("nd,nd->", p[:, 0], np.cross(p[:, 1], p[:, 2])) / 6.0
    return faces[:, ::-1].copy() if vol < 0 else faces


def build_mesh(spec, level):
    """Triangulate ``spec`` at refinement ``level`` (panel count x4 per level)."""
    if level < 0 or int(level) != level:
        raise GeometryError("level must be a non-negative integer")
    if isinstance(spec, Revolution):
        verts, faces = _revolution_grid(spec, int(level))
    else:
        dirs, faces = icosphere(int(level))
        if isinstance(spec, Sphere):
            verts = spec.radius * dirs
        elif isinstance(spec, Spheroid):
            verts = dirs * np.array([spec.b, spec.b, spec.a])
        elif isinstance(spec, RadialHarmonic):
            polar = np.arccos(np.clip(dirs[:, 2], -1.0, 1.0))
            azimuth = np.arctan2(dirs[:, 1], dirs[:, 0])
            verts = dirs * spec.radius(polar, azimuth)[:, None]
        else:
            raise GeometryError(f"unsupported spec type {type(spec).__name__}")
    faces = _orient_outward(verts, faces)
    return SurfaceMesh(verts, faces, spec=spec, level=int(level))


def surface_radius(S):
    """Radius of the sphere with area ``S``."""
    if not S > 0:
        raise GeometryError("area must be positive")
    return math.sqrt(S / (4.0 * math.pi))


def dilate(mesh, s):
    """Scale a mesh about the origin by ``s``."""
    if not s > 0:
        raise GeometryError("dilation factor must be positive")
    return SurfaceMesh(mesh.vertices * s, mesh.triangles, spec=mesh.spec, level=mesh.level)


def spec_area(spec, order=None):
    """Area of the exact (curved) surface, by quadrature of its parametrisation."""
    if isinstance(spec, Sphere):
        return 4.0 * math.pi * spec.radius**2
    if isinstance(spec, Spheroid):
        a, b = spec.a, spec.b
        val, _ = integrate.quad(
            lambda t: b * math.sin(t) * math.sqrt(a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2),
            0.0, math.pi, epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2.0 * math.pi * val
    if isinstance(spec, RadialHarmonic):
        if not spec.rho or spec.epsilon == 0.0:
            return 4.0 * math.pi * spec.r0**2
        from .harmonics import sphere_quadrature

        c = spec.coeffs
        order = order or max(96, 12 * c.n_max)
        polar, azimuth, w = sphere_quadrature(order)
        rho = c.evaluate(polar, azimuth)
        gp, ga = c.gradient(polar, azimuth)
        R = 1.0 + spec.epsilon * rho
        integrand = R * np.sqrt(R * R + spec.epsilon**2 * (gp * gp + ga * ga))
        return float(spec.r0**2 * (w @ integrand))
    if isinstance(spec, Revolution):
        eps, prof = spec.epsilon, spec.profile

        def integrand(t):
            v = -math.cos(t)
            st = math.sin(t)
            if st == 0.0:
                return 0.0
            fv = float(prof.f(v))
            dfv = float(prof.df(v))
            return math.sqrt((fv * st) ** 2 + eps**4 * (fv * dfv * st) ** 2)

        val, _ = integrate.quad(integrand, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=400)
        return 2.0 * math.pi * val
    raise GeometryError(f"unsupported spec type {type(spec).__name__}")


def boundary_edges(mesh):
    """Edges not shared by exactly one opposite-oriented pair (empty for closed meshes)."""
    directed = {}
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            directed[e] = directed.get(e, 0) + 1
    bad = []
    for (a, b), cnt in directed.items():
        if cnt != 1 or directed.get((b, a), 0) != 1:
            bad.append((a, b))
    return bad


# ---------------------------------------------------------------------------
# text I/O
# ---------------------------------------------------------------------------


def export_mesh(mesh, path, header=()):
    """Write a plain triangle list: '#' header, 'v x y z' lines, 'f i j k' lines (0-based)."""
    lines = ["# surfdelta triangle mesh"] + [f"# {h}" for h in header]
    if mesh.spec is not None:
        lines.append("# spec: " + json.dumps(describe(mesh.spec), sort_keys=True))
    lines.append(f"# level: {mesh.level}")
    lines.append(f"# panels: {mesh.n_panels}")
    lines += [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in mesh.vertices]
    lines += [f"f {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def import_mesh(path):
    verts, faces, spec, level = [], [], None, 0
    for line in Path(path).read_text().splitlines():
        if line.startswith("# spec:"):
            spec = spec_from_dict(json.loads(line[len("# spec:"):]))
        elif line.startswith("# level:"):
            level = int(line.split(":", 1)[1])
        elif line.startswith("v "):
            verts.append([float(x) for x in line.split()[1:4]])
        elif line.startswith("f "):
            faces.append([int(x) for x in line.split()[1:4]])
    if not verts or not faces:
        raise GeometryError(f"{path}: no vertices or faces")
    return SurfaceMesh(np.array(verts), np.array(faces, dtype=np.int64), spec=spec, level=level)
