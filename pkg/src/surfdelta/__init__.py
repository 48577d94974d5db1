"""Boundary-element tools for delta interactions supported on closed surfaces.

Submodules: ``geometry`` (surfaces and meshes), ``harmonics`` (real
spherical harmonics), ``bs_operator`` (the single-layer operator and its top
eigenvalue), ``capacity``, ``perturbation`` (small-deformation series),
``spectrum`` (verdicts, bound states, certificate) and ``cli``.
"""
import importlib

__version__ = "0.1.0"

_SUBMODULES = ("geometry", "harmonics", "kernels", "bs_operator", "capacity", "perturbation", "spectrum",
               "convergence", "records", "cli")

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    # lazy, so that ``surfdelta.cli`` can pin BLAS threads before numpy loads
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
