import numpy as np
import pytest
from hypothesis import settings

from meanking import grid as G
from meanking.oracle import Regularization
from meanking.protocol import DEFAULT_SELECTION

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# Lines appended by the acceptance tests; printed once at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def default_grid():
    return G.make_grid(512, 40.0)


@pytest.fixture(scope="session")
def default_reg():
    return Regularization(0.05, 10.0)


@pytest.fixture(scope="session")
def selection():
    return DEFAULT_SELECTION


@pytest.fixture(scope="session")
def default_states(default_grid, selection, default_reg):
    pre = G.build_pre_state(default_grid, selection, default_reg)
    post = G.build_post_state(default_grid, selection, default_reg)
    return pre, post


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def integral_suite():
    """Relative errors of the closed form against adaptive quadrature on 50 seeded cases.

    25 one-dimensional and 25 two-dimensional exponents; computed once and
    shared by the oracle tests and the acceptance suite.
    """
    from meanking.oracle import gaussian_integral
    from oracles import brute_force_integral, random_integral_case

    out = []
    for k in range(50):
        m = 1 + k % 2
        g = random_integral_case(1000 + k, m)
        exact, brute = gaussian_integral(g), brute_force_integral(g)
        out.append((k, m, abs(exact - brute) / abs(brute)))
    return out
