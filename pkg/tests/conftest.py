import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from markovifs.attractor import grid_for, iterate_attractor  # noqa: E402
from markovifs.instances import make_instance  # noqa: E402

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

_CACHE = {}


def cached_attractor(name, resolution, k):
    """Attractor approximants are pure functions of their inputs; share them across tests."""
    key = (name, resolution, k)
    if key not in _CACHE:
        ifs = make_instance(name).ifs
        _CACHE[key] = iterate_attractor(ifs, grid_for(ifs, resolution), k)
    return _CACHE[key]


@pytest.fixture(scope="session")
def attractor():
    return cached_attractor


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=str):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
