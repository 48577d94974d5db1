import json

import pytest

from surfdelta import geometry
from surfdelta.bs_operator import assemble

# acceptance verdict lines, echoed once more at the end of the run
ACCEPTANCE_LINES = []


class OpCache:
    """Meshes and kappa = 0 operators shared across the session (assembly dominates runtime)."""

    def __init__(self):
        self._meshes = {}
        self._ops = {}

    @staticmethod
    def _key(spec, level):
        return json.dumps(geometry.describe(spec), sort_keys=True), int(level)

    def mesh(self, spec, level):
        key = self._key(spec, level)
        if key not in self._meshes:
            self._meshes[key] = geometry.build_mesh(spec, level)
        return self._meshes[key]

    def op(self, spec, level):
        key = self._key(spec, level)
        if key not in self._ops:
            self._ops[key] = assemble(self.mesh(spec, level), 0.0)
        return self._ops[key]


@pytest.fixture(scope="session")
def cache():
    return OpCache()


@pytest.fixture(scope="session")
def sphere_l2(cache):
    return cache.mesh(geometry.Sphere(1.0), 2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
