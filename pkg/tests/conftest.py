import os
import time

import pytest
from hypothesis import settings

from gcps.model import GcpsModel, Rule
from gcps.presets import load_preset

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sqrt2():
    return load_preset("sqrt2")


@pytest.fixture(scope="session")
def lv():
    return load_preset("lotka-renewable")


@pytest.fixture(scope="session")
def lv_finite():
    return load_preset("lotka-finite")


@pytest.fixture(scope="session")
def pure_death():
    return load_preset("pure-death")


@pytest.fixture
def transfer():
    """(tok,1)(tok,1) -> (tok,2)(tok,2) with cell 2 as output."""
    return GcpsModel.one_symbol(2, [Rule.tokens(1, 1, 2, 2)], [3, 0], output_cell=2)


_ACCEPTANCE: list[str] = []


class _Criterion:
    def __init__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, kind, exc, tb):
        elapsed = time.perf_counter() - self.start
        problem = None
        if exc is not None:
            problem = str(exc).strip().splitlines()[0] if str(exc).strip() else kind.__name__
        elif self.limit is not None and elapsed >= self.limit:
            problem = f"took {elapsed:.2f}s, budget {self.limit}s"
        line = (f"{'FAIL' if problem else 'PASS'} criterion {self.number:>2}: {self.title} "
                f"({elapsed:.2f}s)" + (f" -- {problem}" if problem else ""))
        _ACCEPTANCE.append(line)
        print(line)
        if exc is None and problem:
            raise AssertionError(problem)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title, seconds):`` times a block and logs one PASS/FAIL line."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
