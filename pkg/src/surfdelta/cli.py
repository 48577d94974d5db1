"""Command-line front end: ``surfdelta <command> [--config run.yaml] ...``.

Every command writes its tables as CSV, a keyed-text summary, and with
``--format json`` or ``both`` a JSON mirror.  Each file starts with a header
carrying the config hash and the mesh levels.  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""
import os

# dense LAPACK calls must not depend on the thread count (byte-identical output)
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
import sys
import time

import numpy as np
import yaml

from . import __version__, _accel
from .bs_operator import DensityWeight, NumericalError, assemble, critical_strength, gamma_inf_norm, lambda_max
from .capacity import solve_equilibrium, verify_theorem1
from .convergence import observed_order, richardson
from .geometry import (
    GeometryError, RadialHarmonic, Sphere, build_mesh, describe, export_mesh, spec_from_dict,
)
from .perturbation import (
    deform_scan, fourth_order_n1, fourth_order_n1_translation, limit_coefficient, loglog_fit,
    series_from_profile,
)
from .records import config_hash, to_csv, to_keyed_text
from .spectrum import (
    SUPERCRITICAL, SpectralVerdict, certificate, elongated_sweep, ground_state, kappa_sweep,
    sphere_kappa_star, sphere_s_wave_lambda, verdict_from_lambda,
)

log = logging.getLogger("surfdelta")

COMMANDS = ("critical", "capacity", "deform-scan", "elongated", "bound-state", "mesh-export")
FORMATS = ("csv", "json", "both")

DEFAULTS = {
    "surface": {"shape": "sphere", "radius": 1.0},
    "levels": [2, 3, 4],
    "extrapolate": True,
    "out": "results",
    "format": "csv",
    "threads": 0,
    "alpha0": [1.1],
    "eps_grid": [],
    "kappa_grid": [],
    "tol_band": None,
    "tol_band_factor": 5.0,
    "tol_band_default": 0.02,
    "symmetric": True,
    "normalize": True,
    "stop_at_certificate": True,
    "export_sigma": True,
}

COMMAND_DEFAULTS = {
    "deform-scan": {
        "surface": {"shape": "radial", "r0": 1.0, "rho": [[2, 0, 1.0]]},
        "eps_grid": [0.05, 0.1, 0.15, 0.2],
    },
    "elongated": {
        "surface": {"shape": "revolution", "profile": "ellipse", "n_u0": 6, "panel_aspect": 1.0},
        "levels": [1],
        "extrapolate": False,
        "alpha0": [1.0],
        "eps_grid": [1.0, 0.5, 0.25, 0.125],
    },
    "mesh-export": {"levels": [0, 1, 2], "extrapolate": False},
}

# keys that do not change results and so stay out of the config hash
_RUNTIME_KEYS = ("out", "format", "threads")


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


def _float_list(value, name):
    if isinstance(value, (int, float)):
        value = [value]
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number or a list of numbers") from exc


@dataclass
class RunConfig:
    command: str
    surface: dict
    levels: tuple
    extrapolate: bool = True
    out: Path = Path("results")
    format: str = "csv"
    threads: int = 0
    alpha0: tuple = (1.1,)
    eps_grid: tuple = ()
    kappa_grid: tuple = ()
    tol_band: float = None
    tol_band_factor: float = 5.0
    tol_band_default: float = 0.02
    symmetric: bool = True
    normalize: bool = True
    stop_at_certificate: bool = True
    export_sigma: bool = True
    base_dir: Path = field(default=None, repr=False)

    @classmethod
    def from_mapping(cls, command, mapping, base_dir=None):
        merged = {**DEFAULTS, **COMMAND_DEFAULTS.get(command, {}), **mapping}
        unknown = set(merged) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if not isinstance(merged["surface"], dict):
            raise ConfigError("surface must be a mapping")
        try:
            levels = tuple(int(v) for v in merged["levels"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("levels must be a list of integers") from exc
        cfg = cls(
            command=command,
            surface=dict(merged["surface"]),
            levels=levels,
            extrapolate=bool(merged["extrapolate"]),
            out=Path(merged["out"]),
            format=str(merged["format"]),
            threads=int(merged["threads"] or 0),
            alpha0=_float_list(merged["alpha0"], "alpha0"),
            eps_grid=_float_list(merged["eps_grid"], "eps_grid"),
            kappa_grid=_float_list(merged["kappa_grid"], "kappa_grid"),
            tol_band=None if merged["tol_band"] is None else float(merged["tol_band"]),
            tol_band_factor=float(merged["tol_band_factor"]),
            tol_band_default=float(merged["tol_band_default"]),
            symmetric=bool(merged["symmetric"]),
            normalize=bool(merged["normalize"]),
            stop_at_certificate=bool(merged["stop_at_certificate"]),
            export_sigma=bool(merged["export_sigma"]),
            base_dir=base_dir,
        )
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.levels:
            raise ConfigError("need at least one mesh level")
        if any(lv < 0 for lv in self.levels):
            raise ConfigError("mesh levels must be non-negative")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError(f"levels must be strictly increasing, got {list(self.levels)}")
        if self.extrapolate and len(self.levels) < 3:
            raise ConfigError("extrapolation needs at least 3 levels (or set extrapolate: false)")
        if any(e <= 0 for e in self.eps_grid):
            raise ConfigError("eps_grid entries must be positive")
        if self.command in ("deform-scan", "elongated") and not self.eps_grid:
            raise ConfigError(f"{self.command} needs a non-empty eps_grid")
        if any(k < 0 for k in self.kappa_grid):
            raise ConfigError("kappa_grid entries must be non-negative")
        if any(a <= 0 for a in self.alpha0):
            raise ConfigError("alpha0 must be positive")
        if self.tol_band is not None and not self.tol_band > 0:
            raise ConfigError("tol_band must be positive")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        shape = self.surface.get("shape")
        if self.command == "deform-scan" and shape != "radial":
            raise ConfigError("deform-scan needs a radial surface (shape: radial)")
        if self.command == "elongated" and shape != "revolution":
            raise ConfigError("elongated needs a revolution surface (shape: revolution)")

    def spec(self):
        return spec_from_dict(self.surface, self.base_dir)

    def to_dict(self):
        d = {k: getattr(self, k) for k in DEFAULTS if k not in _RUNTIME_KEYS}
        d["command"] = self.command
        d["levels"] = list(self.levels)
        for k in ("alpha0", "eps_grid", "kappa_grid"):
            d[k] = list(d[k])
        d["surface"] = describe(self.spec())
        return d

    def hash(self):
        return config_hash(self.to_dict())

    def header(self):
        return [
            f"surfdelta {__version__} {self.command}",
            f"config_hash: {self.hash()}",
            f"levels: {','.join(map(str, self.levels))}",
            f"surface: {json.dumps(self.to_dict()['surface'], sort_keys=True)}",
            f"backend: {_accel.backend_name()}",
        ]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


class Writer:
    def __init__(self, cfg):
        self.cfg = cfg
        self.header = cfg.header()
        self.mirror = {}
        self.files = []
        cfg.out.mkdir(parents=True, exist_ok=True)

    def _write(self, name, text):
        path = self.cfg.out / name
        path.write_text(text)
        self.files.append(path)

    def table(self, name, rows, columns=None):
        columns = columns or list(dict.fromkeys(k for r in rows for k in r))
        if self.cfg.format in ("csv", "both"):
            self._write(f"{name}.csv", to_csv(rows, columns, self.header))
        self.mirror[name] = [{c: r.get(c) for c in columns} for r in rows]

    def summary(self, name, record):
        self._write(f"{name}.txt", to_keyed_text(record, self.header))
        self.mirror[name] = record

    def finish(self, name):
        if self.cfg.format in ("json", "both"):
            doc = {"header": self.header, "config_hash": self.cfg.hash(), "levels": list(self.cfg.levels),
                   "config": self.cfg.to_dict(), **self.mirror}
            self._write(f"{name}.json", json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n")
        return self.files


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return str(v)


def _extrapolated(cfg, rows, keys, summary):
    """Add Richardson value, error estimate and observed order for ``keys``."""
    for k in keys:
        vals = [r[k] for r in rows]
        if cfg.extrapolate:
            est, err = richardson(vals)
            summary[f"{k}_extrapolated"] = est
            summary[f"{k}_error"] = err
            summary[f"{k}_order"] = observed_order(vals)
        summary[f"{k}_finest"] = vals[-1]


def _level_context(level):
    def wrap(exc):
        return NumericalError(f"level {level}: {exc}")
    return wrap


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_critical(cfg):
    spec = cfg.spec()
    rows = []
    for level in cfg.levels:
        t0 = time.perf_counter()
        mesh = build_mesh(spec, level)
        op = assemble(mesh, 0.0)
        rep = critical_strength(mesh, op=op)
        rows.append({
            "level": level, "n_panels": mesh.n_panels, "h": mesh.h, "area": mesh.total_area,
            "lambda_max": rep.lambda_max, "critical_strength": rep.critical_strength,
            "interaction_radius": rep.interaction_radius,
            "critical_alpha0": rep.critical_strength / mesh.total_area,
            "iterations": rep.iterations, "residual": rep.residual,
        })
        log.info("critical level %d: %d panels, %.1fs", level, mesh.n_panels, time.perf_counter() - t0)
    summary = {"command": "critical"}
    _extrapolated(cfg, rows, ("critical_strength", "interaction_radius", "critical_alpha0"), summary)
    w = Writer(cfg)
    w.table("critical", rows)
    w.summary("critical_summary", summary)
    return w.finish("critical")


def cmd_capacity(cfg):
    spec = cfg.spec()
    rows = []
    w = Writer(cfg)
    for level in cfg.levels:
        t0 = time.perf_counter()
        mesh = build_mesh(spec, level)
        op = assemble(mesh, 0.0)
        try:
            cap = solve_equilibrium(mesh, op)
            th = verify_theorem1(mesh, op)
        except NumericalError as exc:
            raise _level_context(level)(exc) from exc
        mean_sigma = 1.0 / mesh.total_area
        rows.append({
            "level": level, "n_panels": mesh.n_panels, "h": mesh.h, "capacity": cap.C,
            "inverse_capacity": 1.0 / cap.C, "residual": cap.residual, "gauss_energy": cap.gauss_energy,
            "energy_gap": cap.gauss_energy - 1.0 / cap.C,
            "sigma_min": float(cap.sigma.min()), "sigma_max": float(cap.sigma.max()),
            "sigma_spread": float(np.max(np.abs(cap.sigma / mean_sigma - 1.0))),
            "sigma_positive": cap.positive, "lambda_equilibrium": th.lambda_equilibrium,
            "interaction_radius": th.interaction_radius,
        })
        if cfg.export_sigma:
            c = mesh.centroids
            sig_rows = [
                {"panel": i, "x": c[i, 0], "y": c[i, 1], "z": c[i, 2], "area": mesh.areas[i], "sigma": cap.sigma[i]}
                for i in range(mesh.n_panels)
            ]
            w.table(f"capacity_sigma_L{level}", sig_rows)
        log.info("capacity level %d: %d panels, %.1fs", level, mesh.n_panels, time.perf_counter() - t0)
    summary = {"command": "capacity"}
    _extrapolated(cfg, rows, ("capacity", "interaction_radius", "lambda_equilibrium"), summary)
    key = "extrapolated" if cfg.extrapolate else "finest"
    summary["radius_minus_capacity"] = summary[f"interaction_radius_{key}"] - summary[f"capacity_{key}"]
    w.table("capacity", rows)
    w.summary("capacity_summary", summary)
    return w.finish("capacity")


def cmd_deform_scan(cfg):
    spec = cfg.spec()
    if not isinstance(spec, RadialHarmonic):
        raise ConfigError("deform-scan needs a radial surface")
    rho = spec.rho
    for eps in cfg.eps_grid:
        # embedding check for both signs before any expensive work
        RadialHarmonic(spec.r0, eps, rho)
        if cfg.symmetric:
            RadialHarmonic(spec.r0, -eps, rho)
    level_rows, eps_rows = deform_scan(
        rho, cfg.eps_grid, cfg.levels, r0=spec.r0, symmetric=cfg.symmetric,
        normalize=cfg.normalize, extrapolate=cfg.extrapolate,
    )
    series = series_from_profile(rho)
    eps = [r["epsilon"] for r in eps_rows]
    defs = [r["deficit"] for r in eps_rows]
    summary = {"command": "deform-scan", "series_coefficient": -series.product2}
    if rho:
        a, b = limit_coefficient(eps, defs)
        summary.update(limit_coefficient=a, limit_slope_eps2=b)
        try:
            slope, pref = loglog_fit(eps, defs)
            summary.update(loglog_slope=slope, loglog_prefactor=pref)
        except ValueError:
            summary.update(loglog_slope=None, loglog_prefactor=None)
    else:
        summary["max_abs_deficit"] = max(abs(d) for d in defs)
    if series.fourth_order is not None:
        A, B, C = (dict(((n, m), v) for n, m, v in rho).get((1, m), 0.0) for m in (0, -1, 1))
        summary["fourth_order_published"] = -fourth_order_n1(A, B, C)
        summary["fourth_order_translation"] = -fourth_order_n1_translation(A, B, C)
    w = Writer(cfg)
    w.table("deform_levels", level_rows)
    w.table("deform_scan", eps_rows)
    w.summary("deform_summary", summary)
    return w.finish("deform_scan")


def cmd_elongated(cfg):
    s = cfg.surface
    prof = cfg.spec().profile
    alpha0 = cfg.alpha0[0]
    rows, eps_star, monotone = elongated_sweep(
        alpha0, cfg.eps_grid, level=cfg.levels[-1], profile=prof, n_u0=int(s.get("n_u0", 6)),
        panel_aspect=float(s.get("panel_aspect", 1.0)), stop_at_certificate=cfg.stop_at_certificate,
    )
    summary = {
        "command": "elongated", "alpha0": alpha0, "profile": prof.name, "certified": eps_star is not None,
        "eps_star": eps_star, "gamma_inf_monotone": monotone, "swept": len(rows),
    }
    if eps_star is not None:
        star = next(r for r in rows if r["epsilon"] == eps_star)
        summary.update(area_at_star=star["area"], gamma_inf_at_star=star["gamma_inf"],
                       lambda_max_at_star=star["lambda_max"])
    w = Writer(cfg)
    w.table("elongated", rows)
    w.summary("elongated_summary", summary)
    files = w.finish("elongated")
    if eps_star is None:
        raise NumericalError("sweep exhausted without a certificate; trend table written")
    return files


def cmd_bound_state(cfg):
    spec = cfg.spec()
    sphere_r = spec.radius if isinstance(spec, Sphere) else None
    meshes = [build_mesh(spec, level) for level in cfg.levels]
    ops0 = [assemble(m, 0.0) for m in meshes]
    level_rows, verdict_rows, sweep_rows = [], [], []
    for alpha0 in cfg.alpha0:
        lams = [lambda_max(op, DensityWeight.constant_strength(m, alpha0)).lambda_max for m, op in zip(meshes, ops0)]
        if cfg.extrapolate:
            lam0, lam_err = richardson(lams)
        else:
            lam0, lam_err = lams[-1], float("nan")
        if cfg.tol_band is not None:
            band = cfg.tol_band
        elif cfg.extrapolate:
            band = max(cfg.tol_band_factor * lam_err, 1e-12)
        else:
            band = cfg.tol_band_default
        cls = verdict_from_lambda(lam0, band)
        kappas = []
        if cls == SUPERCRITICAL:
            guess = None
            for m in meshes:
                try:
                    k, _, _ = ground_state(m, alpha0, guess=guess)
                except NumericalError as exc:
                    raise _level_context(m.level)(exc) from exc
                kappas.append(k)
                guess = k
        for i, m in enumerate(meshes):
            level_rows.append({
                "alpha0": alpha0, "level": m.level, "n_panels": m.n_panels, "lambda_at_zero": lams[i],
                "kappa_star": kappas[i] if kappas else None,
            })
        cert = certificate(meshes[-1], alpha0, op=ops0[-1])
        kappa_star = energy = kerr = None
        if kappas:
            kappa_star, kerr = richardson(kappas) if cfg.extrapolate else (kappas[-1], float("nan"))
            energy = -kappa_star * kappa_star
        verdict = SpectralVerdict(cls, lam0, band, kappa_star, energy, cert)
        row = {"alpha0": alpha0, **verdict.to_record(), "lambda_error": lam_err, "kappa_error": kerr}
        if sphere_r is not None:
            row["oracle_lambda_at_zero"] = alpha0 * sphere_r
            row["oracle_kappa_star"] = sphere_kappa_star(alpha0, sphere_r) if alpha0 * sphere_r > 1 else None
        verdict_rows.append(row)
        if cfg.kappa_grid:
            for k, lam in kappa_sweep(meshes[-1], alpha0, cfg.kappa_grid):
                r = {"alpha0": alpha0, "kappa": k, "lambda_max": lam}
                if sphere_r is not None:
                    r["oracle_lambda"] = sphere_s_wave_lambda(alpha0, k, sphere_r)
                sweep_rows.append(r)
    summary = {"command": "bound-state"}
    for i, r in enumerate(verdict_rows):
        summary.update({f"{k}[{i}]": v for k, v in r.items()})
    w = Writer(cfg)
    w.table("bound_state", verdict_rows)
    w.table("bound_state_levels", level_rows)
    if sweep_rows:
        w.table("bound_state_sweep", sweep_rows)
    w.summary("bound_state_summary", summary)
    return w.finish("bound_state")


def cmd_mesh_export(cfg):
    spec = cfg.spec()
    w = Writer(cfg)
    rows = []
    for level in cfg.levels:
        mesh = build_mesh(spec, level)
        name = f"mesh_L{level}.txt"
        export_mesh(mesh, cfg.out / name, header=w.header)
        w.files.append(cfg.out / name)
        gi = gamma_inf_norm(mesh)[0] if mesh.n_panels <= 2000 else None
        rows.append({"level": level, "file": name, "n_vertices": len(mesh.vertices), "n_panels": mesh.n_panels,
                     "h": mesh.h, "area": mesh.total_area, "gamma_inf": gi})
    w.table("meshes", rows)
    return w.finish("meshes")


HANDLERS = {
    "critical": cmd_critical,
    "capacity": cmd_capacity,
    "deform-scan": cmd_deform_scan,
    "elongated": cmd_elongated,
    "bound-state": cmd_bound_state,
    "mesh-export": cmd_mesh_export,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _parse_levels(text):
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad --levels {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="surfdelta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"surfdelta {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="YAML run configuration")
        sp.add_argument("--levels", help="mesh levels, e.g. 2,3,4")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--format", choices=FORMATS)
        sp.add_argument("--threads", type=int, help="numba worker threads (0 = default)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (value parsed as YAML)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args):
    mapping, base_dir = {}, None
    if args.config is not None:
        try:
            mapping = yaml.safe_load(args.config.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {args.config}: {exc}") from exc
        if not isinstance(mapping, dict):
            raise ConfigError("config file must hold a mapping")
        base_dir = args.config.parent
        declared = mapping.pop("command", args.command)
        if declared != args.command:
            raise ConfigError(f"config is for {declared!r}, not {args.command!r}")
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            mapping[key.strip()] = yaml.safe_load(val)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad value in --set {item!r}") from exc
    if args.levels is not None:
        mapping["levels"] = _parse_levels(args.levels)
    for key in ("out", "format", "threads"):
        if getattr(args, key) is not None:
            mapping[key] = getattr(args, key)
    try:
        cfg = RunConfig.from_mapping(args.command, mapping, base_dir)
        cfg.spec()
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        _accel.set_threads(cfg.threads)
        files = HANDLERS[cfg.command](cfg)
    except (ConfigError, GeometryError) as exc:
        print(f"surfdelta: config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"surfdelta: numerical failure: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
