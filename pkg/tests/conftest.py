import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from birkhoff_spectra import (  # noqa: E402
    SpectrumConfig,
    gauss_model,
    gibbs_chain,
    log_digit,
    renyi_model,
    solve_spectrum_point,
)


@pytest.fixture(scope="session")
def renyi():
    return renyi_model()


@pytest.fixture(scope="session")
def gauss():
    return gauss_model()


@pytest.fixture(scope="session")
def log_b1(renyi):
    return log_digit(renyi)


@pytest.fixture(scope="session")
def khinchin_point(renyi, log_b1):
    """The interior spectrum point at average log-digit 1.2."""
    return solve_spectrum_point(renyi, log_b1, 1.2, SpectrumConfig())


@pytest.fixture(scope="session")
def khinchin_chain(renyi, log_b1, khinchin_point):
    pt = khinchin_point
    return gibbs_chain(renyi, log_b1, pt.b, pt.q, -pt.q * pt.alpha)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
