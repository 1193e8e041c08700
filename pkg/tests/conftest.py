import numpy as np
import pytest

from graphreg import _backend, _pykernels
from graphreg.graph import Graph


def random_graph(rng, n, p, weighted=False):
    g = Graph(n)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                g.add_edge(u, v, rng.uniform(0.1, 2.0) if weighted else 1.0)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3_graph():
    # three nodes, two edges: 0-1, 1-2
    return Graph(3, [(0, 1), (1, 2)])


KERNEL_IMPLS = [pytest.param(None, id="selected")]
if _backend.compiled_available():
    KERNEL_IMPLS.append(pytest.param(_pykernels, id="python"))


@pytest.fixture(params=KERNEL_IMPLS)
def kernel_impl(request):
    return request.param


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
