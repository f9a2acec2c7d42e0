import pytest

from driftlink.graph import build_graph, is_connected
from driftlink.synthetic import generate_synthetic


def test_edge_count_follows_growth_rule():
    edges = generate_synthetic(100, 2, seed=0)
    assert len(edges) == 197 == 2 * 3 // 2 + (100 - 3) * 2
    assert len(generate_synthetic(50, 4, seed=1)) == 4 * 5 // 2 + (50 - 5) * 4


def test_same_seed_same_stream():
    a = generate_synthetic(200, 3, seed=9, triad_prob=0.5, internal_prob=0.3)
    b = generate_synthetic(200, 3, seed=9, triad_prob=0.5, internal_prob=0.3)
    assert a == b
    assert a != generate_synthetic(200, 3, seed=10, triad_prob=0.5, internal_prob=0.3)


def test_stream_is_connected_and_time_ordered():
    edges = generate_synthetic(300, 2, seed=3, triad_prob=0.7, internal_prob=0.4)
    assert [e.t for e in edges] == sorted(e.t for e in edges)
    g = build_graph(edges)
    assert g.n == 300 and is_connected(g)


def test_triads_raise_clustering():
    from driftlink.stats import network_stats
    plain = network_stats(build_graph(generate_synthetic(400, 3, seed=1)))
    triad = network_stats(build_graph(generate_synthetic(400, 3, seed=1, triad_prob=0.9)))
    assert triad.clustering > plain.clustering


@pytest.mark.parametrize("nodes,m,kwargs", [
    (2, 1, {}), (10, 0, {}), (10, 10, {}),
    (10, 2, {"triad_prob": 1.5}), (10, 2, {"internal_prob": 1.0}),
])
def test_infeasible_parameters(nodes, m, kwargs):
    with pytest.raises(ValueError):
        generate_synthetic(nodes, m, **kwargs)
