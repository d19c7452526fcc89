import time

import numpy as np
import pytest

from fracgraph.model import GridFunction, paper_datum, paper_params
from fracgraph.solver import SolveConfig, solve


@pytest.fixture(scope="session")
def preset_setup():
    p = paper_params(0.5, 0.1, 0.1)
    return p, paper_datum(p)


def _preset_solution(n, p, u0):
    return solve(GridFunction.zeros(n, u0, p.d), SolveConfig(residual_tol=1e-10), p.s)


@pytest.fixture(scope="session")
def preset_solution(preset_setup):
    p, u0 = preset_setup
    return _preset_solution(257, p, u0)


@pytest.fixture(scope="session")
def preset_solution_coarse(preset_setup):
    p, u0 = preset_setup
    return _preset_solution(129, p, u0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


_ACCEPTANCE: dict = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        secs = time.perf_counter() - self._t0
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number} {status} ({secs:.1f} s) {self.title}: {self.detail}"
        if exc_type is not None:
            line += f" [{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
        _ACCEPTANCE[self.number] = line
        print(line)
        return False

    def elapsed(self) -> float:
        return time.perf_counter() - self._t0


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
