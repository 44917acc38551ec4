import numpy as np
import pytest

from tailcs.objective import TailProblem
from tailcs.problem_gen import make_instance

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict shown in the terminal summary."""
    def record(label: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def small_problem():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 8))
    y = rng.standard_normal(6)
    return TailProblem(A, y, 0.3, [1, 4])


@pytest.fixture
def instance_20x40():
    return make_instance(20, 40, 4, seed=11)
