"""Weighted local similarity indices: WCN, WAA, WRA, WLP and WSD.

Two routes are provided.  The ``score_*`` functions evaluate one pair
directly from neighbourhoods and BFS layers.  :class:`SimilarityEngine`
scores whole blocks of source nodes at once with sparse products, which is
what the evaluation harness uses to rank every non-observed pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .graph import GraphError, WeightedGraph, _walk_from, bfs_distances, reachable_mean_distance

INDEX_NAMES = ("WCN", "WAA", "WRA", "WLP", "WSD")
DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True)
class IndexKind:
    tag: str
    epsilon: float = DEFAULT_EPSILON
    s_cap_override: int | None = None

    def __post_init__(self):
        tag = self.tag.upper()
        if tag not in INDEX_NAMES:
            raise ValueError(f"unknown index {self.tag!r}; valid names: {', '.join(INDEX_NAMES)}")
        object.__setattr__(self, "tag", tag)
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.s_cap_override is not None and self.s_cap_override < 1:
            raise ValueError("path cap must be >= 1")


def path_cap(g: WeightedGraph) -> int:
    """``max(ceil(<d>), 2)``; ``<d>`` over reachable pairs if ``g`` is disconnected."""
    return max(math.ceil(reachable_mean_distance(g) - 1e-12), 2)


# ---------------------------------------------------------------------------
# per-pair scorers

def _common(g: WeightedGraph, x: int, y: int) -> list[int]:
    if x == y:
        raise GraphError("similarity needs two distinct nodes")
    return sorted(set(g.neighbors(x).tolist()) & set(g.neighbors(y).tolist()))


def score_wcn(g: WeightedGraph, x: int, y: int) -> float:
    return sum(g.weight(x, z) + g.weight(z, y) for z in _common(g, x, y))


def score_waa(g: WeightedGraph, x: int, y: int) -> float:
    s = g.strength
    total = 0.0
    for z in _common(g, x, y):
        num = g.weight(x, z) + g.weight(z, y)
        if num:
            total += num / math.log1p(s[z])
    return total


def score_wra(g: WeightedGraph, x: int, y: int) -> float:
    s = g.strength
    total = 0.0
    for z in _common(g, x, y):
        num = g.weight(x, z) + g.weight(z, y)
        if num:
            total += num / s[z]
    return total


def score_wlp(g: WeightedGraph, x: int, y: int, epsilon: float = DEFAULT_EPSILON) -> float:
    _common(g, x, y)
    walks = _walk_lengths(g, x, 3)
    return walks[2].get(y, 0.0) + epsilon * walks[3].get(y, 0.0)


def _walk_lengths(g: WeightedGraph, x: int, upto: int) -> list[dict[int, float]]:
    out = [{x: 1.0}]
    for k in range(1, upto + 1):
        out.append(_walk_from(g, x, k))
    return out


def shortest_path_interiors(g: WeightedGraph, x: int, y: int) -> tuple[int | None, float, float]:
    """Distance and interior statistics over all shortest x-y paths.

    Returns ``(s, strength_sum, occurrences)`` where the sums run over the
    multiset of interior nodes of every shortest path (a node on two paths
    counts twice), found by intersecting the BFS layers from both ends.
    """
    dx, sx = _bfs_counts(g, x)
    if dx[y] < 0:
        return None, 0.0, 0.0
    s = int(dx[y])
    dy, sy = _bfs_counts(g, y)
    on_path = (dx >= 0) & (dy >= 0) & (dx + dy == s) & (dx > 0) & (dy > 0)
    mult = sx[on_path] * sy[on_path]
    return s, float(np.dot(mult, g.strength[on_path])), float(mult.sum())


def _bfs_counts(g: WeightedGraph, src: int) -> tuple[np.ndarray, np.ndarray]:
    dist = bfs_distances(g, src)
    sigma = np.zeros(g.n)
    sigma[src] = 1.0
    for x in np.argsort(dist, kind="stable"):
        if dist[x] <= 0:
            continue
        nb = g.neighbors(x)
        sigma[x] = sigma[nb[dist[nb] == dist[x] - 1]].sum()
    return dist, sigma


def score_wsd(g: WeightedGraph, x: int, y: int, epsilon: float = DEFAULT_EPSILON,
              s_cap: int | None = None) -> float:
    """Structure-dependent index.

    Walk weights at the pair's hop distance ``s`` and ``s + 1`` divided by the
    mean strength of the interior nodes of the shortest paths.  Pairs farther
    apart than the cap score 0; adjacent pairs have no interior and use a
    unit denominator.
    """
    _common(g, x, y)
    cap = path_cap(g) if s_cap is None else s_cap
    s, strength_sum, occurrences = shortest_path_interiors(g, x, y)
    if s is None or s > cap:
        return 0.0
    if s == 1:
        mean_strength = 1.0
    else:
        if strength_sum == 0:
            return 0.0
        mean_strength = strength_sum / occurrences
    return structure_score(g, x, y, s, mean_strength, epsilon)


def structure_score(g: WeightedGraph, x: int, y: int, s: int, mean_strength: float,
                    epsilon: float = DEFAULT_EPSILON) -> float:
    """``(W^s + eps W^(s+1))[x, y] / mean_strength`` for a given distance and denominator."""
    walks = _walk_lengths(g, x, s + 1)
    return (walks[s].get(y, 0.0) + epsilon * walks[s + 1].get(y, 0.0)) / mean_strength


def score_pair(g: WeightedGraph, kind: IndexKind, x: int, y: int) -> float:
    if kind.tag == "WCN":
        return score_wcn(g, x, y)
    if kind.tag == "WAA":
        return score_waa(g, x, y)
    if kind.tag == "WRA":
        return score_wra(g, x, y)
    if kind.tag == "WLP":
        return score_wlp(g, x, y, kind.epsilon)
    return score_wsd(g, x, y, kind.epsilon, kind.s_cap_override)


# ---------------------------------------------------------------------------
# ranked output

@dataclass
class ScoredPairList:
    """Pairs ordered by descending score, ties by ascending ``(min, max)`` id."""

    x: np.ndarray
    y: np.ndarray
    score: np.ndarray
    labels: tuple | None = field(default=None, repr=False)

    @classmethod
    def rank(cls, xs, ys, scores, labels=None) -> "ScoredPairList":
        xs, ys = np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)
        scores = np.asarray(scores, dtype=float)
        lo, hi = np.minimum(xs, ys), np.maximum(xs, ys)
        if len(lo):
            keys = np.unique(lo * (int(hi.max()) + 1) + hi)
            if len(keys) != len(lo):
                raise GraphError("duplicate unordered pair in input")
            if not np.all(np.isfinite(scores)):
                raise GraphError("non-finite score")
        order = np.lexsort((hi, lo, -scores))
        return cls(lo[order], hi[order], scores[order], labels)

    def __len__(self):
        return len(self.score)

    def __iter__(self):
        return zip(self.x.tolist(), self.y.tolist(), self.score.tolist())

    def to_csv(self, fh, header: bool = True):
        lab = self.labels
        if header:
            fh.write("x,y,score\n")
        for a, b, s in self:
            if lab is not None:
                a, b = lab[a], lab[b]
            fh.write(f"{a},{b},{s:.12g}\n")


def score_pairs(g: WeightedGraph, kind: IndexKind, pairs, workers: int = 1) -> ScoredPairList:
    """Score unordered pairs of internal node ids and rank them."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise GraphError("pair with identical endpoints")
    engine = SimilarityEngine(g, epsilon=kind.epsilon, s_cap=kind.s_cap_override, workers=workers)
    scores = engine.score(kind.tag, pairs[:, 0], pairs[:, 1])
    return ScoredPairList.rank(pairs[:, 0], pairs[:, 1], scores, labels=g.labels)


# ---------------------------------------------------------------------------
# batched engine

class SimilarityEngine:
    """Block scorer over all targets for a batch of source nodes.

    Column blocks ``M @ E`` (``E`` = indicator columns of the sources) are
    built with sparse-times-dense products, so the cost per block is a few
    passes over the edge list and nothing quadratic is ever held beyond
    ``n x batch_size``.  Each column is computed independently, so results
    do not depend on batch size or worker count.
    """

    def __init__(self, g: WeightedGraph, epsilon: float = DEFAULT_EPSILON, s_cap: int | None = None,
                 batch_size: int | None = None, workers: int = 1):
        self.g = g
        self.epsilon = epsilon
        self.W = g.adjacency(True)
        self.A = g.adjacency(False)
        s = g.strength
        self._s = s
        self._inv_log = np.divide(1.0, np.log1p(s), out=np.zeros_like(s), where=s > 0)
        self._inv_s = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
        self._s_cap = s_cap
        if batch_size is None:
            batch_size = int(max(1, min(256, 2_000_000 // max(g.n, 1))))
        self.batch_size = batch_size
        self.workers = max(1, int(workers))

    @property
    def s_cap(self) -> int:
        if self._s_cap is None:
            self._s_cap = path_cap(self.g)
        return self._s_cap

    def block(self, tag: str, sources) -> np.ndarray:
        """Scores of every node against each source: shape ``(len(sources), n)``."""
        sources = np.asarray(sources, dtype=np.int64)
        tag = tag.upper()
        A1 = np.ascontiguousarray(self.A[sources].toarray().T)
        W1 = np.ascontiguousarray(self.W[sources].toarray().T)
        if tag == "WCN":
            out = self.W @ A1 + self.A @ W1
        elif tag == "WAA":
            d = self._inv_log[:, None]
            out = self.W @ (d * A1) + self.A @ (d * W1)
        elif tag == "WRA":
            d = self._inv_s[:, None]
            out = self.W @ (d * A1) + self.A @ (d * W1)
        elif tag == "WLP":
            W2 = self.W @ W1
            out = W2 + self.epsilon * (self.W @ W2)
        elif tag == "WSD":
            out = self._wsd_block(sources, A1, W1)
        else:
            raise ValueError(f"unknown index {tag!r}; valid names: {', '.join(INDEX_NAMES)}")
        out = np.ascontiguousarray(out.T)
        out[np.arange(len(sources)), sources] = 0.0
        return out

    def _wsd_block(self, sources, A1, W1) -> np.ndarray:
        cap, eps = self.s_cap, self.epsilon
        walks = [None, W1]
        for _ in range(cap):
            walks.append(self.W @ walks[-1])
        out = np.zeros_like(A1)
        reached = A1 > 0
        reached[sources, np.arange(len(sources))] = True
        # adjacent pairs: no interior nodes, unit denominator
        hit = A1 > 0
        out[hit] = walks[1][hit] + eps * walks[2][hit]
        # interior[s] = sum_k A^k S A^(s-k) E; count[s] = A^s E
        strength = self._s[:, None]
        count_prev, interior = A1, np.zeros_like(A1)
        for s in range(2, cap + 1):
            interior = self.A @ (interior + strength * count_prev)
            count = self.A @ count_prev
            new = (count > 0) & ~reached
            den = interior[new]
            num = (walks[s][new] + eps * walks[s + 1][new]) * ((s - 1) * count[new])
            out[new] = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            reached |= new
            count_prev = count
        return out

    def batches(self, sources) -> list[np.ndarray]:
        sources = np.asarray(sources, dtype=np.int64)
        return [sources[i:i + self.batch_size] for i in range(0, len(sources), self.batch_size)]

    def iter_blocks(self, tag: str, sources) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(batch_sources, block)`` in source order."""
        batches = self.batches(sources)
        if self.workers == 1 or len(batches) < 2:
            for b in batches:
                yield b, self.block(tag, b)
            return
        with ThreadPoolExecutor(self.workers) as pool:
            window = self.workers * 2
            futures = [pool.submit(self.block, tag, b) for b in batches[:window]]
            for i, b in enumerate(batches):
                if i + window < len(batches):
                    futures.append(pool.submit(self.block, tag, batches[i + window]))
                yield b, futures[i].result()
                futures[i] = None

    def score(self, tag: str, xs, ys) -> np.ndarray:
        xs, ys = np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)
        out = np.zeros(len(xs))
        if not len(xs):
            return out
        order = np.argsort(xs, kind="stable")
        uniq = np.unique(xs)
        for batch, blk in self.iter_blocks(tag, uniq):
            lo = np.searchsorted(xs[order], batch[0], "left")
            hi = np.searchsorted(xs[order], batch[-1], "right")
            sel = order[lo:hi]
            row = np.searchsorted(batch, xs[sel])
            out[sel] = blk[row, ys[sel]]
        return out
