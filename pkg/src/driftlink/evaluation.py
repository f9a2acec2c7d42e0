"""Train/probe splits, link deletion, AUC and precision, experiment runner."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .drift import DriftConfig, drift_iterate
from .graph import (GraphError, TemporalEdge, WeightedGraph, build_graph, giant_component,
                    is_connected)
from .similarity import INDEX_NAMES, IndexKind, ScoredPairList, SimilarityEngine

PROTOCOLS = ("static-random", "evolving-temporal")
DEFAULT_AUC_SAMPLES = 100_000


class EvaluationError(RuntimeError):
    pass


@dataclass
class SplitResult:
    train: WeightedGraph
    probe: np.ndarray          # (K, 2) internal ids of ``train``, lo < hi, sorted
    retained_nodes: tuple
    universe_size: int

    @property
    def probe_keys(self) -> np.ndarray:
        return pair_keys(self.probe[:, 0], self.probe[:, 1], self.train.n)


def pair_keys(xs, ys, n: int) -> np.ndarray:
    xs, ys = np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)
    return np.minimum(xs, ys) * n + np.maximum(xs, ys)


def _unique_pairs(keys: np.ndarray, n: int) -> np.ndarray:
    keys = np.unique(keys)
    return np.stack([keys // n, keys % n], axis=1) if len(keys) else np.zeros((0, 2), dtype=np.int64)


def _make_split(train: WeightedGraph, probe: np.ndarray) -> SplitResult:
    n = train.n
    return SplitResult(train, probe, train.labels, n * (n - 1) // 2)


def temporal_split(edges: Sequence[TemporalEdge], train_fraction: float = 0.9,
                   aggregation: str = "count-interactions") -> SplitResult:
    """Earliest interactions train, the rest probe.

    Probe pairs already linked in training, or touching nodes outside the
    training giant component, are dropped.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    if len(edges) < 2:
        raise EvaluationError("need at least two interactions to split")
    times = np.array([e.t for e in edges])
    if times.min() == times.max():
        raise EvaluationError("all timestamps are identical; use random_split for static networks")
    order = np.argsort(times, kind="stable")
    k = min(max(int(round(train_fraction * len(edges))), 1), len(edges) - 1)
    train = giant_component(build_graph([edges[i] for i in order[:k]], aggregation))

    index = {lab: i for i, lab in enumerate(train.labels)}
    xs, ys = [], []
    for i in order[k:]:
        e = edges[i]
        a, b = index.get(e.u), index.get(e.v)
        if a is not None and b is not None:
            xs.append(a)
            ys.append(b)
    keys = pair_keys(xs, ys, train.n)
    keys = keys[train.edge_ids(np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)) < 0] \
        if len(keys) else keys
    return _make_split(train, _unique_pairs(keys, train.n))


def removable_edges(g: WeightedGraph, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` edge ids whose joint removal keeps ``g`` connected.

    Edges are visited in a random order and an edge is taken unless removing
    it would disconnect the graph given the edges still to come; this equals
    sequential rejection of bridges and is realised by protecting the
    spanning tree that prefers late edges.
    """
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    if not is_connected(g):
        raise EvaluationError("graph must be connected before removing links")
    perm = rng.permutation(g.m)
    rank = np.empty(g.m, dtype=np.int64)
    rank[perm] = np.arange(g.m)
    W = g.adjacency(False).copy()
    W.data = (g.m - rank[g.slot_edge]).astype(float)
    tree = minimum_spanning_tree(W).tocoo()
    protected = np.zeros(g.m, dtype=bool)
    protected[g.edge_ids(tree.row, tree.col)] = True
    candidates = perm[~protected[perm]]
    if len(candidates) < k:
        raise EvaluationError(
            f"cannot remove {k} links while staying connected: only {len(candidates)} non-bridge "
            f"links available in a graph with {g.m} links")
    return candidates[:k]


def random_split(edges: Sequence[TemporalEdge], train_fraction: float = 0.9, seed: int = 0,
                 aggregation: str = "keep-max-weight") -> SplitResult:
    """Uniformly random hold-out of simple links, keeping training connected."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    g = giant_component(build_graph(edges, aggregation))
    k = int(round((1 - train_fraction) * g.m))
    probe_ids = removable_edges(g, k, np.random.default_rng(seed))
    train = g.without_edges(probe_ids)
    keys = pair_keys(g.edge_u[probe_ids], g.edge_v[probe_ids], g.n)
    return _make_split(train, _unique_pairs(keys, g.n))


def delete_links(train: WeightedGraph, ratio: float, seed: int = 0) -> WeightedGraph:
    """Discard ``round(ratio * M)`` random links while keeping the graph connected."""
    if not 0 <= ratio < 1:
        raise ValueError("ratio must be in [0, 1)")
    k = int(round(ratio * train.m))
    if k == 0:
        return train
    return train.without_edges(removable_edges(train, k, np.random.default_rng(seed)))


# ---------------------------------------------------------------------------
# metrics

def auc_from_comparisons(probe_scores, other_scores) -> float:
    """``(n' + 0.5 n'') / n`` over paired comparisons."""
    p, q = np.asarray(probe_scores), np.asarray(other_scores)
    if len(p) == 0 or len(p) != len(q):
        raise EvaluationError("need equally many non-empty probe and nonexistent scores")
    higher = int(np.count_nonzero(p > q))
    ties = int(np.count_nonzero(p == q))
    return (higher + 0.5 * ties) / len(p)


def mann_whitney_auc(probe_scores, other_scores) -> float:
    """AUC over every probe x nonexistent comparison, ties worth one half."""
    p = np.asarray(probe_scores, dtype=float)
    q = np.sort(np.asarray(other_scores, dtype=float))
    if len(p) == 0 or len(q) == 0:
        raise EvaluationError("empty probe or nonexistent set")
    below = np.searchsorted(q, p, "left")
    upto = np.searchsorted(q, p, "right")
    return float((below.sum() + 0.5 * (upto - below).sum()) / (len(p) * len(q)))


def _forbidden_keys(train: WeightedGraph, probe: np.ndarray) -> np.ndarray:
    return np.union1d(train._keys, pair_keys(probe[:, 0], probe[:, 1], train.n))


def nonexistent_count(train: WeightedGraph, probe: np.ndarray) -> int:
    return train.n * (train.n - 1) // 2 - len(_forbidden_keys(train, probe))


def sample_nonexistent(train: WeightedGraph, probe: np.ndarray, size: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Uniform pairs from ``U minus (ET | EP)`` by rejection; ``U`` is never built."""
    forbidden = _forbidden_keys(train, probe)
    n = train.n
    if n * (n - 1) // 2 - len(forbidden) <= 0:
        raise EvaluationError("no nonexistent pairs to sample")
    got, have = [], 0
    while have < size:
        draw = max(2 * (size - have), 64)
        x = rng.integers(n, size=draw)
        y = rng.integers(n, size=draw)
        ok = x != y
        keys = pair_keys(x[ok], y[ok], n)
        pos = np.minimum(np.searchsorted(forbidden, keys), len(forbidden) - 1)
        keys = keys[forbidden[pos] != keys]
        got.append(keys[:size - have])
        have += len(got[-1])
    keys = np.concatenate(got)
    return np.stack([keys // n, keys % n], axis=1)


@dataclass
class AucSample:
    probe: np.ndarray       # (n, 2)
    other: np.ndarray       # (n, 2)


def draw_auc_sample(train: WeightedGraph, probe: np.ndarray, n: int = DEFAULT_AUC_SAMPLES,
                    seed: int = 0) -> AucSample:
    if len(probe) == 0:
        raise EvaluationError("probe set is empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    picks = probe[rng.integers(len(probe), size=n)]
    return AucSample(picks, sample_nonexistent(train, probe, n, rng))


ScoreFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def auc_sampled(score_fn: ScoreFn, train: WeightedGraph, probe: np.ndarray,
                n: int = DEFAULT_AUC_SAMPLES, seed: int = 0) -> float:
    """``n`` independent probe-vs-nonexistent comparisons."""
    s = draw_auc_sample(train, probe, n, seed)
    return auc_from_comparisons(score_fn(s.probe[:, 0], s.probe[:, 1]),
                                score_fn(s.other[:, 0], s.other[:, 1]))


def auc_exact(score_fn: ScoreFn, train: WeightedGraph, probe: np.ndarray,
              max_comparisons: int = 10**7) -> float:
    """Exact rank statistic over every probe x nonexistent pair."""
    if len(probe) == 0:
        raise EvaluationError("probe set is empty")
    others = nonexistent_count(train, probe)
    if len(probe) * others > max_comparisons:
        raise EvaluationError(
            f"{len(probe)} x {others} comparisons exceed {max_comparisons}; use sampled AUC")
    n = train.n
    iu, ju = np.triu_indices(n, 1)
    keys = iu.astype(np.int64) * n + ju
    keep = ~np.isin(keys, _forbidden_keys(train, probe), assume_unique=True)
    return mann_whitney_auc(score_fn(probe[:, 0], probe[:, 1]), score_fn(iu[keep], ju[keep]))


def precision_at_L(ranked: ScoredPairList, probe: np.ndarray, L: int | None = None,
                   n: int | None = None) -> float:
    """Share of probe links among the ``L`` best ranked pairs (default ``L = |EP|``)."""
    L = len(probe) if L is None else L
    if L <= 0 or L > len(ranked):
        raise EvaluationError(f"L={L} outside 1..{len(ranked)}")
    if n is None:
        n = int(max(ranked.y.max(), probe.max() if len(probe) else 0)) + 1
    top = pair_keys(ranked.x[:L], ranked.y[:L], n)
    return float(np.isin(top, pair_keys(probe[:, 0], probe[:, 1], n)).sum() / L)


def scan_non_observed(engine: SimilarityEngine, tag: str, limit: int | None = None,
                      lookups: np.ndarray | None = None) -> tuple[ScoredPairList, np.ndarray]:
    """Rank ``U minus ET`` for one index in a single pass over source blocks.

    Keeps the ``limit`` best pairs (all of them if ``None``) under the
    descending-score, ascending-pair order, and reads off the scores of the
    ``lookups`` pairs (rows ``lo, hi``) along the way.
    """
    g = engine.g
    n = g.n
    total = n * (n - 1) // 2 - g.m
    limit = total if limit is None else min(limit, total)
    lookups = np.zeros((0, 2), dtype=np.int64) if lookups is None else np.asarray(lookups, dtype=np.int64)
    lk_lo = np.minimum(lookups[:, 0], lookups[:, 1])
    lk_hi = np.maximum(lookups[:, 0], lookups[:, 1])
    lk_order = np.argsort(lk_lo, kind="stable")
    lk_sorted = lk_lo[lk_order]
    lk_scores = np.zeros(len(lookups))

    best_s = np.zeros(0)
    best_x = np.zeros(0, dtype=np.int64)
    best_y = np.zeros(0, dtype=np.int64)
    cols = np.arange(n)
    for batch, blk in engine.iter_blocks(tag, np.arange(max(n - 1, 0))):
        s0, s1 = int(batch[0]), int(batch[-1]) + 1
        a, b = np.searchsorted(lk_sorted, s0), np.searchsorted(lk_sorted, s1)
        sel = lk_order[a:b]
        lk_scores[sel] = blk[lk_lo[sel] - s0, lk_hi[sel]]
        if limit == 0:
            continue
        valid = cols[None, :] > batch[:, None]
        lo, hi = g.indptr[s0], g.indptr[s1]
        valid[g.slot_row[lo:hi] - s0, g.indices[lo:hi]] = False
        if len(best_s) >= limit:
            valid &= blk > best_s[-1]
        flat = np.flatnonzero(valid)
        if not len(flat):
            continue
        cand_s = blk.ravel()[flat]
        cand_x = batch[flat // n]
        cand_y = flat % n
        ms = np.concatenate([best_s, cand_s])
        order = np.argsort(-ms, kind="stable")[:limit]
        best_s = ms[order]
        best_x = np.concatenate([best_x, cand_x])[order]
        best_y = np.concatenate([best_y, cand_y])[order]
    return ScoredPairList(best_x, best_y, best_s, g.labels), lk_scores


def rank_non_observed(g: WeightedGraph, kind: IndexKind, limit: int | None = None,
                      workers: int = 1) -> ScoredPairList:
    engine = SimilarityEngine(g, kind.epsilon, kind.s_cap_override, workers=workers)
    return scan_non_observed(engine, kind.tag, limit)[0]


# ---------------------------------------------------------------------------
# experiment runner

@dataclass
class MetricsReport:
    dataset: str
    protocol: str
    index: str
    drifted: bool
    drift_iterations: int
    deletion_ratio: float
    trial: int
    seed: int
    auc: float
    auc_method: str
    precision: float
    L: int
    n_probe: int
    n_train_links: int
    split_ms: float = 0.0
    delete_ms: float = 0.0
    drift_ms: float = 0.0
    index_ms: float = 0.0


TIMING_FIELDS = ("split_ms", "delete_ms", "drift_ms", "index_ms")
REPORT_FIELDS = tuple(f.name for f in fields(MetricsReport) if f.name not in TIMING_FIELDS)
TIMING_KEY_FIELDS = ("dataset", "index", "drifted", "drift_iterations", "deletion_ratio", "trial")


def derive_seed(master: int, *coords: int) -> int:
    """Seed for one cell of the experiment matrix, independent of run order."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(int(c) for c in coords))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _ms(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def run_experiment(edges: Sequence[TemporalEdge], protocol: str = "static-random",
                   indices: Sequence[IndexKind | str] = INDEX_NAMES,
                   drift: DriftConfig | None = None, deletion_ratios: Sequence[float] = (0.0,),
                   trials: int = 15, seed: int = 0, train_fraction: float = 0.9,
                   auc_samples: int = DEFAULT_AUC_SAMPLES, auc_method: str = "sampled",
                   include_undrifted: bool = True, aggregation: str | None = None,
                   dataset: str = "dataset", workers: int = 1,
                   on_report: Callable[[MetricsReport], None] | None = None) -> list[MetricsReport]:
    """Run the split / delete / drift / score / measure matrix.

    One report per (deletion ratio, trial, index, drifted?) cell.  With a
    drift config and ``include_undrifted`` both the original and the drifted
    training graph are scored on the same split and samples.  ``on_report``
    sees each report as soon as it exists.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if auc_method not in ("sampled", "exact"):
        raise ValueError("auc_method must be 'sampled' or 'exact'")
    kinds = [k if isinstance(k, IndexKind) else IndexKind(k) for k in indices]
    if aggregation is None:
        aggregation = "count-interactions" if protocol == "evolving-temporal" else "keep-max-weight"

    variants: list[DriftConfig | None] = []
    if drift is None or include_undrifted:
        variants.append(None)
    if drift is not None:
        variants.append(drift)

    reports = []
    cached_split = None
    for trial in range(trials):
        t0 = time.perf_counter()
        split_seed = derive_seed(seed, trial, 0)
        try:
            if protocol == "evolving-temporal":
                if cached_split is None:
                    cached_split = temporal_split(edges, train_fraction, aggregation)
                split = cached_split
            else:
                split = random_split(edges, train_fraction, split_seed, aggregation)
        except (GraphError, EvaluationError) as exc:
            raise EvaluationError(f"trial {trial}: split failed: {exc}") from exc
        split_ms = _ms(t0)
        probe = split.probe
        if len(probe) == 0:
            raise EvaluationError(f"trial {trial}: probe set is empty after filtering")

        for r_idx, ratio in enumerate(deletion_ratios):
            cell = f"trial {trial}, deletion ratio {ratio}"
            t0 = time.perf_counter()
            try:
                train = delete_links(split.train, ratio, derive_seed(seed, trial, 1))
            except (GraphError, EvaluationError) as exc:
                raise EvaluationError(f"{cell}: {exc}") from exc
            delete_ms = _ms(t0)
            auc_seed = derive_seed(seed, trial, 2, r_idx)
            sample = None
            if auc_method == "sampled":
                sample = draw_auc_sample(train, probe, auc_samples, auc_seed)
                lookups = np.concatenate([sample.probe, sample.other])
            else:
                lookups = None
            L = len(probe)
            if L > train.n * (train.n - 1) // 2 - train.m:
                raise EvaluationError(f"{cell}: L={L} exceeds the number of non-observed pairs")

            for cfg in variants:
                t0 = time.perf_counter()
                scored_graph = train if cfg is None else drift_iterate(train, cfg)
                drift_ms = _ms(t0) if cfg is not None else 0.0
                for kind in kinds:
                    t0 = time.perf_counter()
                    engine = SimilarityEngine(scored_graph, kind.epsilon, kind.s_cap_override,
                                              workers=workers)
                    try:
                        auc, method, prec = _score_cell(engine, kind.tag, train, probe, L, sample,
                                                        lookups)
                    except (GraphError, EvaluationError) as exc:
                        raise EvaluationError(f"{cell}, index {kind.tag}: {exc}") from exc
                    report = MetricsReport(
                        dataset=dataset, protocol=protocol, index=kind.tag,
                        drifted=cfg is not None,
                        drift_iterations=cfg.iterations if cfg is not None else 0,
                        deletion_ratio=float(ratio), trial=trial, seed=auc_seed, auc=auc,
                        auc_method=method, precision=prec, L=L, n_probe=len(probe),
                        n_train_links=train.m, split_ms=split_ms, delete_ms=delete_ms,
                        drift_ms=drift_ms, index_ms=_ms(t0))
                    reports.append(report)
                    if on_report is not None:
                        on_report(report)
    return reports


def _score_cell(engine, tag, train, probe, L, sample, lookups):
    if sample is not None:
        ranked, looked = scan_non_observed(engine, tag, L, lookups)
        n = len(sample.probe)
        auc = auc_from_comparisons(looked[:n], looked[n:])
        method = f"sampled(n={n})"
    else:
        ranked, _ = scan_non_observed(engine, tag, L)
        auc = auc_exact(lambda a, b: engine.score(tag, a, b), train, probe, max_comparisons=10**9)
        method = "exact"
    return auc, method, precision_at_L(ranked, probe, L, n=train.n)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_reports_csv(reports: Sequence[MetricsReport], fh) -> None:
    """Per-trial metrics, fixed column order, no timings (so reruns are byte-identical)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in reports:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in REPORT_FIELDS])


def write_timings_csv(reports: Sequence[MetricsReport], fh) -> None:
    """Per-stage wall-clock milliseconds keyed like the metrics rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TIMING_KEY_FIELDS + TIMING_FIELDS)
    for r in reports:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in TIMING_KEY_FIELDS + TIMING_FIELDS])


SUMMARY_FIELDS = ("dataset", "index", "drifted", "drift_iterations", "deletion_ratio", "trials",
                  "auc_mean", "auc_std", "precision_mean", "precision_std",
                  "index_ms_mean", "drift_ms_mean")


def summarize(reports: Sequence[MetricsReport]) -> list[dict]:
    """Mean and sample std per (index, drifted, ratio) cell, in first-seen order."""
    groups: dict[tuple, list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault((r.dataset, r.index, r.drifted, r.drift_iterations, r.deletion_ratio), []).append(r)
    rows = []
    for (ds, idx, drifted, iters, ratio), rs in groups.items():
        aucs = [r.auc for r in rs]
        precs = [r.precision for r in rs]
        rows.append({
            "dataset": ds, "index": idx + ("'" if drifted else ""), "drifted": drifted,
            "drift_iterations": iters, "deletion_ratio": ratio, "trials": len(rs),
            "auc_mean": statistics.fmean(aucs), "auc_std": statistics.stdev(aucs) if len(rs) > 1 else 0.0,
            "precision_mean": statistics.fmean(precs),
            "precision_std": statistics.stdev(precs) if len(rs) > 1 else 0.0,
            "index_ms_mean": statistics.fmean(r.index_ms for r in rs),
            "drift_ms_mean": statistics.fmean(r.drift_ms for r in rs),
        })
    return rows


def write_summary_csv(rows: Sequence[dict], fh, timings: bool = False) -> None:
    cols = SUMMARY_FIELDS if timings else SUMMARY_FIELDS[:-2]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in cols])


SWEEP_FIELDS = ("drift_iterations", "auc_mean", "auc_std", "precision_mean", "precision_std", "cells")


def sweep_iterations(edges: Sequence[TemporalEdge], iterations: Sequence[int] = range(6),
                     drift: DriftConfig | None = None, **kwargs) -> list[dict]:
    """Mean AUC and precision over indices and trials for each drift iteration count."""
    base = drift or DriftConfig()
    kwargs.setdefault("protocol", "evolving-temporal")
    rows = []
    for it in iterations:
        cfg = DriftConfig(it, base.symmetrization, base.temporal)
        reports = run_experiment(edges, drift=cfg, include_undrifted=False, **kwargs)
        rows.append(_sweep_row(it, reports))
    return rows


def _sweep_row(iterations: int, reports: Sequence[MetricsReport]) -> dict:
    aucs = [r.auc for r in reports]
    precs = [r.precision for r in reports]
    return {
        "drift_iterations": iterations,
        "auc_mean": statistics.fmean(aucs),
        "auc_std": statistics.stdev(aucs) if len(aucs) > 1 else 0.0,
        "precision_mean": statistics.fmean(precs),
        "precision_std": statistics.stdev(precs) if len(precs) > 1 else 0.0,
        "cells": len(reports),
    }


def undrifted_sweep_row(edges: Sequence[TemporalEdge], **kwargs) -> dict:
    """Row computed with drift switched off entirely, for comparison with iteration 0."""
    kwargs.setdefault("protocol", "evolving-temporal")
    return _sweep_row(0, run_experiment(edges, drift=None, **kwargs))


def write_sweep_csv(rows: Sequence[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in SWEEP_FIELDS])

