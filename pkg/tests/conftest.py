from pathlib import Path

import numpy as np
import pytest

from flexkit import Ellipsoid, Hyperbox, load_system

DATA = Path(__file__).resolve().parents[1] / "src" / "flexkit" / "data"

MEAN = np.array([4.0, 5.0])
COV = np.array([[2.0, 1.0], [1.0, 3.0]])
DEV = np.array([4.243, 5.196])

# criterion id -> list of (ok, line); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def design_a():
    return load_system(DATA / "design_a.json")


@pytest.fixture(scope="session")
def design_b():
    return load_system(DATA / "design_b.json")


@pytest.fixture(scope="session")
def ellipsoid():
    return Ellipsoid(MEAN, COV)


@pytest.fixture(scope="session")
def box():
    return Hyperbox(MEAN, DEV, DEV)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {line}")
