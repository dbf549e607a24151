import numpy as np
import pytest
from hypothesis import settings

from mxonmtf import MultiplexNetwork

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, 1).astype(float)
    return upper + upper.T


def random_multiplex(rng, n=24, L=3, p=(0.1, 0.4)):
    return MultiplexNetwork([random_graph(rng, n, rng.uniform(*p)) for _ in range(L)])


def block_graph(sizes):
    """Disjoint cliques of the given sizes, zero diagonal."""
    n = sum(sizes)
    a = np.zeros((n, n))
    start = 0
    for s in sizes:
        a[start:start + s, start:start + s] = 1.0
        start += s
    np.fill_diagonal(a, 0.0)
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
