import numpy as np
import pytest

from diffext.harness.experiments import spiral_points


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def spiral_data():
    """150 spiral samples with labels t, as in the synthetic experiment."""
    t = np.random.default_rng(2024).uniform(0.0, 1.0, 150)
    return spiral_points(t), t


ACCEPTANCE_LINES = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
