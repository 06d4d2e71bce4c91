import math

import numpy as np
import pytest

from loccdisc.core import BipartiteState, canonicalize, haar_vector

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = (KET0 + KET1) / math.sqrt(2)
MINUS = (KET0 - KET1) / math.sqrt(2)


def ket(*factors) -> BipartiteState:
    """Product state |a>|b> from two single-party vectors."""
    a, b = factors
    return BipartiteState.product(a, b)


def bell(sign: int = 1) -> BipartiteState:
    return BipartiteState(2, 2, np.array([1, 0, 0, sign]) / math.sqrt(2))


def random_orthogonal_pair(da: int, db: int, rng: np.random.Generator):
    phi = haar_vector(da * db, rng)
    psi = haar_vector(da * db, rng)
    psi = psi - np.vdot(phi, psi) * phi
    psi /= np.linalg.norm(psi)
    return BipartiteState(da, db, phi), BipartiteState(da, db, psi)


def instance_with_overlap(da, db, s, c, rng):
    """Random instance whose overlap is exactly ``c`` (up to rounding)."""
    phi = haar_vector(da * db, rng)
    perp = haar_vector(da * db, rng)
    perp = perp - np.vdot(phi, perp) * phi
    perp /= np.linalg.norm(perp)
    psi = c * phi + math.sqrt(max(1 - c * c, 0.0)) * perp
    return canonicalize(BipartiteState(da, db, phi), BipartiteState(da, db, psi), s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
