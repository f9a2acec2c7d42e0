import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def weighted_graphs(draw, min_nodes=2, max_nodes=9, zero_weights=False, connected=False):
    """Small networkx graphs on ``0..n-1`` with ``weight`` and ``time`` attributes."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    G = nx.Graph()
    G.add_nodes_from(range(n))
    lo = 0.0 if zero_weights else 0.1
    for a, b in chosen:
        w = draw(st.one_of(st.floats(lo, 10.0), st.sampled_from([1.0, 2.0, 3.0])))
        t = draw(st.integers(0, 30))
        G.add_edge(a, b, weight=w, time=float(t))
    if connected:
        comps = [sorted(c) for c in nx.connected_components(G)]
        for c1, c2 in zip(comps, comps[1:]):
            G.add_edge(c1[0], c2[0], weight=1.0, time=0.0)
    return G


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
