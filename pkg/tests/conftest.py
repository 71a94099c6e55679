import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA_DIR = Path(__file__).parent / "data"


def random_kernel(rng, n, L=20):
    x = rng.standard_normal((n, L))
    d = ((x[:, None, :] - x[None, :, :]) ** 2).mean(axis=2)
    return (d + d.T) / 2


def random_labels(rng, n, allow_singleton=True):
    if n < (5 if allow_singleton else 6):
        raise ValueError(f"no legal labelling of n={n}")
    while True:
        labels = rng.integers(1, 4, size=n)
        sizes = np.bincount(labels, minlength=4)[1:]
        if sizes.min() == 0 or (sizes == 1).sum() > 1:
            continue
        if not allow_singleton and sizes.min() < 2:
            continue
        return labels


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def data_dir():
    return DATA_DIR


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
