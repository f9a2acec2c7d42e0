"""Acceptance suite: one test per criterion, each printing a PASS/FAIL/SKIP line.

The summary lines are emitted at the end of the pytest run (see conftest.py)
and also when this file is executed directly with ``python tests/test_acceptance.py``.
"""

import functools
import io
import math
import os
import time
from fractions import Fraction
from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from scipy.stats import spearmanr

import oracles
from oracles import to_package
from driftlink.cli import main as cli_main
from driftlink.drift import (DriftConfig, drift_iterate, drift_step, fused_attractiveness,
                             neighbor_components, slot_field)
from driftlink.evaluation import (auc_exact, auc_sampled, delete_links, derive_seed,
                                  precision_at_L, random_split,
                                  run_experiment, scan_non_observed, sweep_iterations,
                                  undrifted_sweep_row, write_reports_csv,
                                  write_sweep_csv)
from driftlink.graph import (EdgeListFormat, WeightedGraph, build_graph, giant_component,
                             hop_distance, mean_shortest_distance, read_edge_list, write_edge_list)
from driftlink.similarity import (INDEX_NAMES, IndexKind, SimilarityEngine, path_cap, score_pair,
                                  score_wlp, structure_score)
from driftlink.synthetic import generate_synthetic

RESULTS: list[tuple[int, str, str]] = []


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except pytest.skip.Exception as exc:
                RESULTS.append((number, "SKIP", f"{title}: {exc.msg}"))
                raise
            except BaseException as exc:
                first = (str(exc).splitlines() or [""])[0][:400]
                RESULTS.append((number, "FAIL", f"{title}: {type(exc).__name__}: {first}"))
                raise
            took = time.perf_counter() - t0
            RESULTS.append((number, "PASS", f"{title} ({took:.1f}s){': ' + detail if detail else ''}"))
        return run
    return wrap


def summary_lines():
    return [f"criterion {n}: {status} - {text}" for n, status, text in sorted(RESULTS)]


def rel_close(a, b, rel=1e-12):
    return a == b or abs(a - b) <= rel * max(abs(a), abs(b))


# ---------------------------------------------------------------------------

@criterion(1, "formula oracles on 200 random graphs, 1e-12 relative, < 10 s")
def test_formula_oracles():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    checked = 0
    for _ in range(200):
        G = oracles.random_weighted_graph(rng, n_max=10)
        g = to_package(G)
        eps = float(rng.choice([0.0, 1e-3, 0.3]))
        n = g.n
        xs, ys = (np.array(p) for p in zip(*combinations(range(n), 2)))
        W, _ = oracles.dense(G)
        powers = {k: np.linalg.matrix_power(W, k) for k in range(2, 7)}
        cap = max(math.ceil(oracles.reachable_mean_distance(G) - 1e-12), 2)
        engine = SimilarityEngine(g, eps)
        for tag in INDEX_NAMES:
            batch = engine.score(tag, xs, ys)
            for x, y, got in zip(xs.tolist(), ys.tolist(), batch.tolist()):
                if tag == "WCN":
                    want = oracles.wcn(G, x, y)
                elif tag == "WAA":
                    want = oracles.waa(G, x, y)
                elif tag == "WRA":
                    want = oracles.wra(G, x, y)
                elif tag == "WLP":
                    want = powers[2][x, y] + eps * powers[3][x, y]
                    assert rel_close(want, oracles.walk_weight(G, x, y, 2)
                                     + eps * oracles.walk_weight(G, x, y, 3))
                else:
                    want = oracles.wsd(G, x, y, eps, cap)
                per_pair = score_pair(g, IndexKind(tag, eps), x, y)
                assert rel_close(got, want), (tag, x, y, got, want)
                assert rel_close(per_pair, want), (tag, x, y, per_pair, want)
                checked += 1
    took = time.perf_counter() - t0
    assert took < 10, f"took {took:.1f}s"
    return f"{checked} scores"


@criterion(2, "AUC calibration: constant 0.5, random 0.5 +- 0.02, sampled mean vs exact <= 0.01")
def test_auc_calibration():
    edges = generate_synthetic(500, 3, seed=11, triad_prob=0.6)
    split = random_split(edges, 0.9, seed=3)
    const = lambda a, b: np.zeros(len(a))
    assert auc_exact(const, split.train, split.probe, max_comparisons=10**9) == 0.5

    noise = np.random.default_rng(5)
    rand = lambda a, b: noise.random(len(a))
    r = auc_sampled(rand, split.train, split.probe, 10**5, seed=8)
    assert abs(r - 0.5) <= 0.02, r

    engine = SimilarityEngine(split.train)
    score = lambda a, b: engine.score("WRA", a, b)
    exact = auc_exact(score, split.train, split.probe, max_comparisons=10**9)
    sampled = [auc_sampled(score, split.train, split.probe, 10**5, seed=s) for s in range(20)]
    gap = abs(np.mean(sampled) - exact)
    assert gap <= 0.01, gap
    return f"random={r:.4f} exact={exact:.4f} sampled mean={np.mean(sampled):.4f}"


def _random_temporal_graph(rng):
    n = int(rng.integers(3, 25))
    G = nx.gnp_random_graph(n, rng.uniform(0.15, 0.7), seed=int(rng.integers(2**31)))
    for a, b in G.edges:
        G[a][b]["weight"] = 0.0 if rng.random() < 0.05 else float(rng.uniform(0.1, 8))
        G[a][b]["time"] = float(rng.integers(0, 50))
    return G


def _fixed_point_graph(rng):
    kind = rng.integers(3)
    if kind == 0:
        G = nx.complete_graph(int(rng.integers(2, 9)))
        nx.set_edge_attributes(G, float(rng.uniform(0.1, 5)), "weight")
    elif kind == 1:
        G = nx.cycle_graph(int(rng.integers(3, 12)))
        nx.set_edge_attributes(G, float(rng.uniform(0.1, 5)), "weight")
    else:
        G = nx.star_graph(int(rng.integers(1, 9)))
        for a, b in G.edges:
            G[a][b]["weight"] = float(rng.uniform(0.1, 5))
    nx.set_edge_attributes(G, float(rng.integers(0, 9)), "time")
    return G


def _fraction_fusion_gap(G, egos, comp):
    """|sum AI(NC) - |NC| AI(f)| in exact rational arithmetic."""
    w = {tuple(sorted(e)): Fraction(G[e[0]][e[1]]["weight"]) for e in G.edges}
    own = {m: sum(w[e] for e in egos[m]) for m in comp}
    ai_f = sum(w[e] for e in set().union(*(egos[m] for m in comp)))
    tot = sum(own.values())
    shares = [len(comp) * ai_f * own[m] / tot if tot else ai_f for m in comp]
    return sum(shares) - len(comp) * ai_f


@criterion(3, "drift invariants over 100 random weighted temporal graphs, < 30 s")
def test_drift_invariants():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    fusions = 0
    for _ in range(100):
        G = _random_temporal_graph(rng)
        g = to_package(G)
        f = slot_field(g)
        # per-node conservation of the deltas
        sums = np.bincount(g.slot_row, weights=f.delta, minlength=g.n)
        assert np.all(np.abs(sums) <= 1e-9)
        # one-step one-sided identity
        proposals = {a: oracles.one_sided_new(G, a) for a in G if G.degree(a)}
        for k in range(len(g.indices)):
            a, j = int(g.slot_row[k]), int(g.indices[k])
            want = proposals[a][j]
            assert rel_close(f.one_sided[k], want), (a, j, f.one_sided[k], want)
        one = drift_step(g, DriftConfig(1, "one-sided"))
        for e in range(g.m):
            a, b = int(g.edge_u[e]), int(g.edge_v[e])
            assert rel_close(one.weights[e], proposals[a][b])
        # non-negativity through several averaged rounds
        assert np.all(drift_iterate(g, DriftConfig(5)).weights >= 0)
        assert np.all(drift_iterate(g, DriftConfig(5, "one-sided")).weights >= 0)
        # fusion identity
        egos = {m: oracles.ego_edges(G, m) for m in G}
        for a in range(g.n):
            for comp in neighbor_components(g, a):
                if len(comp) > 1:
                    fused = fused_attractiveness(g, a, comp)
                    union = set().union(*(egos[m] for m in comp))
                    ai_f = sum(G[p][q]["weight"] for p, q in union)
                    assert rel_close(sum(fused.values()), len(comp) * ai_f)
                    assert _fraction_fusion_gap(G, egos, comp) == 0
                    fusions += 1
        # fixed points stay put
        F = to_package(_fixed_point_graph(rng))
        out = drift_iterate(F, DriftConfig(5))
        assert np.allclose(out.weights, F.weights, rtol=1e-12, atol=0)
    took = time.perf_counter() - t0
    assert took < 30, f"took {took:.1f}s"
    return f"{fusions} fused components checked"


@criterion(4, "WSD with distance 2 and unit denominator equals WLP on 50 graphs, exact")
def test_wsd_reduces_to_wlp():
    rng = np.random.default_rng(4)
    pairs = 0
    for _ in range(50):
        g = to_package(oracles.random_weighted_graph(rng, n_max=12))
        eps = float(rng.uniform(0, 2))
        for x, y in combinations(range(g.n), 2):
            for e in (eps, 0.0, 1e-3):
                assert structure_score(g, x, y, 2, 1.0, e) == score_wlp(g, x, y, e)
            pairs += 1
    return f"{pairs} pairs"


@criterion(5, "sparse graph with <d> > 3: neighbour indices useless, WSD still scores probes")
def test_sparse_network():
    # weighted ring of 60 with a few pendant nodes; probe pairs lie 4..9 hops apart
    rng = np.random.default_rng(9)
    n_ring = 60
    u = list(range(n_ring)) + [3, 17, 40]
    v = [(i + 1) % n_ring for i in range(n_ring)] + [60, 61, 62]
    g = WeightedGraph(63, u, v, rng.uniform(0.5, 3, len(u)))
    probe = np.array([[0, 4], [10, 16], [20, 29], [33, 40], [45, 52], [61, 21]])
    d = mean_shortest_distance(g)
    assert d > 3
    cap = path_cap(g)
    dists = [hop_distance(g, a, b) for a, b in probe]
    assert min(dists) > 3 and max(dists) <= cap
    for a, b in probe:
        assert not set(g.neighbors(a).tolist()) & set(g.neighbors(b).tolist())
    engine = SimilarityEngine(g)
    precision = {}
    for tag in INDEX_NAMES:
        ranked, looked = scan_non_observed(engine, tag, len(probe), probe)
        precision[tag] = precision_at_L(ranked, probe, n=g.n)
        if tag in ("WCN", "WAA", "WRA", "WLP"):
            assert np.all(looked == 0), tag
            assert precision[tag] == 0.0, tag
        else:
            assert np.all(looked > 0), looked
    return f"<d>={d:.2f}, cap={cap}, probe distances {dists}"


INFECTIOUS_ENV = "DRIFTLINK_INFECTIOUS"


@criterion(6, "Infectious giant component <d> = 3.482 +- 0.1")
def test_infectious_mean_distance():
    path = os.environ.get(INFECTIOUS_ENV)
    if not path:
        pytest.skip(f"dataset not supplied (set {INFECTIOUS_ENV}=path, "
                    f"{INFECTIOUS_ENV}_FORMAT=column roles, default 'tuv'); "
                    "formula oracles are covered by criterion 1")
    fmt = EdgeListFormat.parse(os.environ.get(INFECTIOUS_ENV + "_FORMAT", "tuv"))
    g = giant_component(build_graph(read_edge_list(path, fmt)))
    d = mean_shortest_distance(g)
    assert abs(d - 3.482) <= 0.1, d
    return f"<d>={d:.3f} on N={g.n}, M={g.m}"


@criterion(7, "robustness trend on 1000-node PA graphs over 10 seeds, < 5 min")
def test_robustness_trend():
    t0 = time.perf_counter()
    ratios = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    precision = {tag: np.zeros(len(ratios)) for tag in INDEX_NAMES}
    distance = np.zeros(len(ratios))
    for s in range(10):
        edges = generate_synthetic(1000, 4, seed=s, triad_prob=0.7)
        reports = run_experiment(edges, protocol="static-random", deletion_ratios=ratios, trials=1,
                                 seed=s, auc_samples=2000)
        for r in reports:
            precision[r.index][ratios.index(r.deletion_ratio)] += r.precision / 10
        split = random_split(edges, 0.9, seed=derive_seed(s, 0, 0))
        for i, ratio in enumerate(ratios):
            g = delete_links(split.train, ratio, derive_seed(s, 0, 1))
            distance[i] += mean_shortest_distance(g) / 10
    trends = {tag: spearmanr(ratios, p)[0] for tag, p in precision.items()}
    d_trend = spearmanr(ratios, distance)[0]
    took = time.perf_counter() - t0
    report = ("rho " + ", ".join(f"{t}={r:.2f}" for t, r in trends.items())
              + f", distance rho={d_trend:.2f} ({distance[0]:.2f}->{distance[-1]:.2f})")
    bad = [f"{t} precision {np.round(precision[t], 4).tolist()}" for t, r in trends.items() if not r < 0]
    if not d_trend > 0:
        bad.append(f"distance {np.round(distance, 3).tolist()}")
    if took >= 300:
        bad.append(f"took {took:.1f}s")
    assert not bad, f"{report}; not trending: {'; '.join(bad)}"
    return report


@criterion(8, "5000-node / 50000-edge pipeline < 60 s and byte-identical rerun")
def test_scale_and_determinism():
    edges = generate_synthetic(5000, 9, seed=0, triad_prob=0.5, internal_prob=0.12)
    g = build_graph(edges)
    assert g.n == 5000 and g.m >= 50_000
    kw = dict(protocol="evolving-temporal", drift=DriftConfig(3), trials=1, seed=1,
              auc_samples=10**5)
    t0 = time.perf_counter()
    first = run_experiment(edges, **kw)
    took = time.perf_counter() - t0
    second = run_experiment(edges, **kw)
    a, b = io.StringIO(), io.StringIO()
    write_reports_csv(first, a)
    write_reports_csv(second, b)
    assert a.getvalue() == b.getvalue()
    assert {r.index for r in first} == set(INDEX_NAMES)
    assert took < 60, f"took {took:.1f}s"
    return f"M={g.m}, first run {took:.1f}s, {len(first)} rows identical"


@criterion(9, "iteration sweep 0..5 gives 6 rows, iteration 0 bit-exact to drift-off")
def test_iteration_sweep(tmp_path):
    edges = generate_synthetic(300, 3, seed=12, triad_prob=0.5, internal_prob=0.4)
    kw = dict(trials=3, seed=2, auc_samples=3000)
    rows = sweep_iterations(edges, range(6), **kw)
    base = undrifted_sweep_row(edges, **kw)
    assert len(rows) == 6 and [r["drift_iterations"] for r in rows] == list(range(6))
    assert rows[0] == base

    data = tmp_path / "stream.txt"
    with open(data, "w") as fh:
        write_edge_list(edges, fh)
    out = tmp_path / "sweep"
    code = cli_main(["sweep-iterations", "--dataset", str(data), "--trials", "3", "--seed", "2",
                     "--auc-samples", "3000", "--out-dir", str(out)])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 6
    expected = io.StringIO()
    write_sweep_csv([base], expected)
    assert lines[1] == expected.getvalue().splitlines()[1]
    return f"auc by iteration {[round(r['auc_mean'], 4) for r in rows]}"


if __name__ == "__main__":
    import inspect
    import sys
    import tempfile
    from pathlib import Path

    for name, fn in list(globals().items()):
        if not name.startswith("test_"):
            continue
        try:
            if "tmp_path" in inspect.signature(fn).parameters:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except BaseException:
            pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(s != "FAIL" for _, s, _ in RESULTS) else 1)
