from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from localroi.incompatibility import compute_roi
from localroi.measurements import MeasurementSet, projective_povm, random_set

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

# seeds for which random_set(2, 2, 2, seed) has roi > 1e-3
INCOMPATIBLE_QUBIT_SEEDS = (0, 10, 15, 23, 25, 30, 32, 34, 35, 38, 43, 45)

_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def xz_set() -> MeasurementSet:
    return MeasurementSet.of([projective_povm(SX), projective_povm(SZ)])


def z_set() -> MeasurementSet:
    return MeasurementSet.of([projective_povm(SZ)])


def incompatible_sets(count: int, dim: int, n_meas: int, n_out: int, start: int = 0, threshold: float = 1e-3):
    """First ``count`` random sets (by seed) whose robustness exceeds ``threshold``."""
    out = []
    seed = start
    while len(out) < count:
        s = random_set(dim, n_meas, n_out, seed)
        if compute_roi(s).roi > threshold:
            out.append((seed, s))
        seed += 1
        if seed - start > 50 * count:
            raise RuntimeError("could not find enough incompatible sets")
    return out


@pytest.fixture
def xz() -> MeasurementSet:
    return xz_set()


@pytest.fixture
def record_acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), title, detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}")
