import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("kcapture", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("kcapture")


@pytest.fixture
def pentagon():
    ang = 2 * math.pi * np.arange(5) / 5 + math.pi / 2
    return np.column_stack([np.cos(ang), np.sin(ang)])


@pytest.fixture
def square():
    return np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
