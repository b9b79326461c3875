import pytest

from celldde.ingredients import IngredientSet, StemParams

import frozen

# filled by test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def persist_set():
    return IngredientSet.build(StemParams(**frozen.PERSIST))


@pytest.fixture(scope="session")
def gas_set():
    return IngredientSet.build(StemParams(**frozen.GAS))


@pytest.fixture(scope="session")
def open_set():
    return IngredientSet.build(StemParams(**frozen.OPEN))
