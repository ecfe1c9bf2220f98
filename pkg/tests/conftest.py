"""Shared fixtures.

Ground states are expensive, so the few that several modules need are
solved once per session.  Acceptance verdicts are collected here and
repeated in the terminal summary.
"""

import pytest

from inlslab.groundstate import solve_ground_state
from inlslab.params import ProblemParams

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])


@pytest.fixture
def verdict(request):
    """``verdict(k, ok, detail)`` records and prints one PASS/FAIL line."""
    store = request.config.stash[_VERDICTS]

    def report(k, ok, detail):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[k] = line
        print(line)
        return ok

    return report


@pytest.fixture(scope="session")
def ref_params():
    return ProblemParams.of(3, 1, "1/2")


@pytest.fixture(scope="session")
def V_small(ref_params):
    """V at (3, 1, 1/2) on a 1024-node grid; cheap but well converged."""
    return solve_ground_state("V", ref_params, M=1024, R_max=32.0)


@pytest.fixture(scope="session")
def V_petviashvili_small(ref_params):
    return solve_ground_state("V", ref_params, M=1024, R_max=32.0, route="petviashvili")
