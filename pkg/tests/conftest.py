from __future__ import annotations

import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eigenphase.partialwave import phase_table  # noqa: E402
from eigenphase.potential import PotentialSpec, construct_potential  # noqa: E402
from eigenphase.spectral import EigenphaseSet  # noqa: E402

# acceptance bump: V0 = 0.4, R = 1, centered
ACCEPT_V0 = 0.4


@functools.lru_cache(maxsize=None)
def bump(V0: float = ACCEPT_V0, d: int = 3, R: float = 1.0):
    return construct_potential(PotentialSpec.radial_bump(V0, R, d))


@functools.lru_cache(maxsize=None)
def two_bump(V0: float = 0.3):
    return construct_potential(PotentialSpec.bump_sum([(V0, 0.5, (0.5, 0.0)), (V0, 0.5, (-0.5, 0.0))], 2))


@functools.lru_cache(maxsize=None)
def table(h: float, V0: float = ACCEPT_V0, d: int = 3):
    return phase_table(bump(V0, d), h, d)


def phases(h: float, V0: float = ACCEPT_V0, d: int = 3) -> EigenphaseSet:
    return EigenphaseSet.from_table(table(h, V0, d))


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Store one pass/fail line per acceptance criterion for the terminal summary."""

    def _record(n: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[n] = (bool(passed), detail)
        print(f"[criterion {n:2d}] {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
