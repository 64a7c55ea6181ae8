import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from evolvability.environment import PushBehavior  # noqa: E402
from evolvability.genotype import NetworkShape  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def push():
    return PushBehavior()


@pytest.fixture
def small_shape():
    return NetworkShape(3, (4,), 2)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, config, number, title, limit):
        self.config, self.number, self.title, self.limit = config, number, title, limit
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        slow = self.limit is not None and elapsed > self.limit
        ok = exc_type is None and not slow
        limit = f" (limit {self.limit:g}s)" if self.limit is not None else ""
        note = self.detail or (f"{exc_type.__name__}: {exc}" if exc_type else "")
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number}: {self.title} | {elapsed:.2f}s{limit} | {note}"
        self.config.stash.setdefault(_ACCEPTANCE_KEY, []).append((self.number, line))
        print(line)
        if exc_type is None and slow:
            raise AssertionError(f"criterion {self.number} took {elapsed:.1f}s, limit {self.limit}s")
        return False


@pytest.fixture
def criterion(request):
    def open_(number, title, limit=None):
        return _Criterion(request.config, number, title, limit)

    return open_


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
