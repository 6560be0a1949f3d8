from pathlib import Path

import numpy as np
import pytest

from fca2vec.context import FormalContext, load_burmeister, load_context

DATA = Path(__file__).resolve().parents[1] / "src" / "fca2vec" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def cex():
    return load_burmeister(DATA / "counterexample.cxt")


@pytest.fixture(scope="session")
def living():
    return load_burmeister(DATA / "living_beings.cxt")


@pytest.fixture(scope="session")
def temporal():
    return load_burmeister(DATA / "temporal.cxt", years=DATA / "temporal_years.tsv")


@pytest.fixture(scope="session")
def mushroom_like():
    return load_context(DATA / "mushroom_like.csv")


def ctx_from_matrix(inc) -> FormalContext:
    inc = np.asarray(inc, dtype=bool)
    return FormalContext.from_matrix(inc, [f"g{i}" for i in range(inc.shape[0])],
                                     [f"m{j}" for j in range(inc.shape[1])])


# acceptance results, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"acceptance {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
