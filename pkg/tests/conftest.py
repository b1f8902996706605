import time

import pytest

from hypergap.corpus import random_profiles

_START = time.perf_counter()
SUITE_BUDGET = 180.0

# criterion number -> (status, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(number, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    prev = ACCEPTANCE.get(number)
    if prev is not None and prev[0] == "FAIL":
        status = "FAIL"
        detail = prev[1] + "; " + detail if detail else prev[1]
    elif prev is not None and detail:
        detail = prev[1] + "; " + detail
    ACCEPTANCE[number] = (status, detail)
    print(f"criterion {number}: {status}  {detail}")
    return ok


def elapsed():
    return time.perf_counter() - _START


@pytest.fixture(scope="session")
def corpus():
    """The 20 seeded profiles per dimension, shared so cached functionals are reused."""
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = random_profiles(n)
        return cache[n]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    total = elapsed()
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[k]
        if k == 11:
            ok = status == "PASS" and total < SUITE_BUDGET
            status = "PASS" if ok else "FAIL"
            detail = f"{detail}; full suite {total:.1f} s (budget {SUITE_BUDGET:.0f} s)"
        tr.write_line(f"criterion {k:2d}: {status}  {detail}")
