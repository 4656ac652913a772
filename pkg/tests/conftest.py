import numpy as np
import pytest

from flagein import available_backends

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    from flagein.io_persist import load_golden

    return load_golden()


@pytest.fixture(scope="session")
def golden_classes(golden):
    from flagein import group_classes, match_kaehler

    return match_kaehler(group_classes([np.array(r.lam) for r in golden], 4), 4)


@pytest.fixture(scope="session")
def n3_solutions():
    from flagein.solver import SolverConfig, run

    return run(SolverConfig(n=3, trials=100000, rng_seed=7))
