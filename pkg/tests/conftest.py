import numpy as np
import pytest
from hypothesis import settings

from exactsim.generators import complete_digraph, directed_cycle
from exactsim.graph import Graph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

C = 0.6


def fork_graph():
    """Arcs c->a and c->b with a=0, b=1, c=2."""
    return Graph.from_arcs(3, [2, 2], [0, 1])


def graph_from_mask(mask):
    src, dst = np.nonzero(np.asarray(mask, dtype=bool))
    return Graph.from_arcs(len(mask), src, dst)


@pytest.fixture
def two_cycle():
    return directed_cycle(2)


@pytest.fixture
def k3():
    return complete_digraph(3)


@pytest.fixture
def fork():
    return fork_graph()


@pytest.fixture
def isolated():
    # node 0 has no arcs at all; 1 <-> 2 keep the graph non-trivial
    return Graph.from_arcs(3, [1, 2], [2, 1])


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[num])
