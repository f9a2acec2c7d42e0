"""Weighted temporal graph representation, edge-list ingestion and traversal."""

from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Invalid graph input or query."""


class DisconnectedGraphError(GraphError):
    pass


class EdgeListError(GraphError):
    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass(frozen=True)
class TemporalEdge:
    """One recorded interaction between ``u`` and ``v`` at time ``t``."""

    u: Hashable
    v: Hashable
    w: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        if self.u == self.v:
            raise GraphError(f"self-loop on node {self.u!r}")
        if not self.w >= 0:
            raise GraphError(f"negative or NaN weight {self.w!r}")
        if not math.isfinite(self.t):
            raise GraphError(f"non-finite timestamp {self.t!r}")


@dataclass(frozen=True)
class EdgeListFormat:
    """Column layout of a whitespace (or ``delimiter``) separated edge list.

    ``columns`` names the role of each column: ``u``, ``v``, ``w``, ``t`` or
    ``-`` for a column to ignore.  Trailing optional columns (``w``/``t``) may
    be absent on a line, in which case the defaults apply.
    """

    columns: tuple[str, ...] = ("u", "v", "w", "t")
    delimiter: str | None = None
    default_weight: float = 1.0
    default_time: float = 0.0

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        for c in cols:
            if c not in ("u", "v", "w", "t", "-"):
                raise ValueError(f"unknown column role {c!r}")
        for req in ("u", "v"):
            if cols.count(req) != 1:
                raise ValueError(f"format needs exactly one {req!r} column")
        for opt in ("w", "t"):
            if cols.count(opt) > 1:
                raise ValueError(f"duplicate {opt!r} column")

    @classmethod
    def parse(cls, pattern: str, delimiter: str | None = None) -> "EdgeListFormat":
        """Build from a compact column pattern such as ``"uvwt"``, ``"tuv"`` or ``"u,v,-,t"``."""
        pattern = pattern.strip()
        cols = tuple(c.strip() for c in pattern.split(",")) if "," in pattern else tuple(pattern)
        return cls(columns=cols, delimiter=delimiter)


def parse_edge_list(source, fmt: EdgeListFormat | None = None) -> list[TemporalEdge]:
    """Parse a line-oriented edge list into :class:`TemporalEdge` records.

    ``source`` may be a binary or text stream, or a string/bytes payload.
    Lines starting with ``#`` or ``%`` and blank lines are skipped.
    """
    fmt = fmt or EdgeListFormat()
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)

    cols = fmt.columns
    iu, iv = cols.index("u"), cols.index("v")
    iw = cols.index("w") if "w" in cols else None
    it = cols.index("t") if "t" in cols else None
    need = max(iu, iv) + 1

    edges = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split(fmt.delimiter)
        if fmt.delimiter is not None:
            parts = [p.strip() for p in parts]
        if len(parts) < need:
            raise EdgeListError(f"expected at least {need} columns, got {len(parts)}", lineno)
        u, v = parts[iu], parts[iv]
        if u == v:
            raise EdgeListError(f"self-loop on node {u!r}", lineno)
        try:
            w = float(parts[iw]) if iw is not None and iw < len(parts) else fmt.default_weight
            t = float(parts[it]) if it is not None and it < len(parts) else fmt.default_time
        except ValueError as exc:
            raise EdgeListError(f"malformed number ({exc})", lineno) from None
        if not w >= 0 or not math.isfinite(w):
            raise EdgeListError(f"invalid weight {w!r}", lineno)
        if not math.isfinite(t):
            raise EdgeListError(f"invalid timestamp {t!r}", lineno)
        edges.append(TemporalEdge(u, v, w, t))
    return edges


def read_edge_list(path, fmt: EdgeListFormat | None = None) -> list[TemporalEdge]:
    with open(path, "rb") as fh:
        try:
            return parse_edge_list(fh, fmt)
        except EdgeListError as exc:
            raise EdgeListError(f"{path}: {exc}") from None


def write_edge_list(edges: Iterable[TemporalEdge], fh) -> None:
    """Write ``u v w t`` lines readable with the default format."""
    for e in edges:
        fh.write(f"{e.u} {e.v} {e.w:.12g} {e.t:.12g}\n")


def _label_key(label):
    if isinstance(label, (int, np.integer)):
        return (0, int(label), "")
    try:
        return (0, int(label), "")
    except (TypeError, ValueError):
        return (1, 0, str(label))


class WeightedGraph:
    """Immutable simple undirected graph with per-edge weight and timestamp.

    Nodes are dense integers ``0..n-1``; ``labels[i]`` is the original token.
    Edges are stored once with ``edge_u < edge_v``, sorted lexicographically,
    alongside a CSR adjacency whose ``slot_edge`` maps each adjacency slot
    back to its edge id.
    """

    def __init__(self, n: int, u, v, w=None, t=None, labels: Sequence | None = None):
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        m = len(u)
        w = np.ones(m) if w is None else np.asarray(w, dtype=float).ravel()
        t = np.zeros(m) if t is None else np.asarray(t, dtype=float).ravel()
        if not (len(v) == len(w) == len(t) == m):
            raise GraphError("edge arrays differ in length")
        if m:
            if np.any(u == v):
                raise GraphError("self-loops are not allowed")
            if u.min() < 0 or max(u.max(), v.max()) >= n:
                raise GraphError("edge endpoint out of range")
            if not np.all(w >= 0) or not np.all(np.isfinite(w)):
                raise GraphError("weights must be finite and non-negative")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        order = np.lexsort((hi, lo))
        lo, hi, w, t = lo[order], hi[order], w[order], t[order]
        keys = lo * n + hi
        if m > 1 and np.any(keys[1:] == keys[:-1]):
            raise GraphError("multi-edges are not allowed")

        self.n = int(n)
        self.labels = tuple(range(n)) if labels is None else tuple(labels)
        if len(self.labels) != self.n:
            raise GraphError("labels do not match node count")
        self.edge_u, self.edge_v = lo, hi
        self.weights, self.times = w, t
        self._keys = keys

        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        eids = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((cols, rows))
        self.indices = cols[order]
        self.slot_edge = eids[order]
        self.slot_row = rows[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=self.indptr[1:])

        for arr in (self.edge_u, self.edge_v, self.weights, self.times, self._keys,
                    self.indices, self.slot_edge, self.slot_row, self.indptr):
            arr.flags.writeable = False
        self._cache = {}

    # construction helpers -------------------------------------------------

    def with_weights(self, weights) -> "WeightedGraph":
        """Same topology and timestamps, new weights (given in edge order)."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != self.weights.shape:
            raise GraphError("weight vector does not match edge count")
        if not np.all(weights >= 0) or not np.all(np.isfinite(weights)):
            raise GraphError("weights must be finite and non-negative")
        g = object.__new__(WeightedGraph)
        g.__dict__.update(self.__dict__)
        g.weights = weights.copy()
        g.weights.flags.writeable = False
        g._cache = {k: val for k, val in self._cache.items() if k in _TOPOLOGY_CACHE}
        return g

    def subgraph(self, nodes) -> "WeightedGraph":
        """Induced subgraph, nodes relabelled densely in ascending id order."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.edge_u] >= 0) & (remap[self.edge_v] >= 0)
        return WeightedGraph(
            len(nodes),
            remap[self.edge_u[keep]],
            remap[self.edge_v[keep]],
            self.weights[keep],
            self.times[keep],
            labels=[self.labels[i] for i in nodes],
        )

    def without_edges(self, edge_ids) -> "WeightedGraph":
        keep = np.ones(self.m, dtype=bool)
        keep[np.asarray(edge_ids, dtype=np.int64)] = False
        return WeightedGraph(self.n, self.edge_u[keep], self.edge_v[keep],
                             self.weights[keep], self.times[keep], labels=self.labels)

    # basic queries --------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.edge_u)

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"

    def _check(self, x):
        if not 0 <= x < self.n:
            raise GraphError(f"unknown node {x!r}")

    def node_index(self, label) -> int:
        if "label_index" not in self._cache:
            self._cache["label_index"] = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._cache["label_index"][label]
        except KeyError:
            raise GraphError(f"unknown node label {label!r}") from None

    def neighbors(self, x: int) -> np.ndarray:
        self._check(x)
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def incident_edges(self, x: int) -> np.ndarray:
        self._check(x)
        return self.slot_edge[self.indptr[x]:self.indptr[x + 1]]

    def edge_id(self, x: int, y: int) -> int | None:
        a, b = (x, y) if x < y else (y, x)
        key = a * self.n + b
        i = int(np.searchsorted(self._keys, key))
        if i < self.m and self._keys[i] == key:
            return i
        return None

    def edge_ids(self, xs, ys) -> np.ndarray:
        """Vectorised :meth:`edge_id`; -1 where no edge exists."""
        xs, ys = np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)
        keys = np.minimum(xs, ys) * self.n + np.maximum(xs, ys)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(self.m - 1, 0))
        hit = (self._keys[pos] == keys) if self.m else np.zeros(len(keys), dtype=bool)
        return np.where(hit, pos, -1)

    def has_edge(self, x: int, y: int) -> bool:
        return self.edge_id(x, y) is not None

    def weight(self, x: int, y: int) -> float:
        e = self.edge_id(x, y)
        return 0.0 if e is None else float(self.weights[e])

    def timestamp(self, x: int, y: int) -> float:
        e = self.edge_id(x, y)
        if e is None:
            raise GraphError(f"no edge between {x} and {y}")
        return float(self.times[e])

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def strength(self) -> np.ndarray:
        if "strength" not in self._cache:
            s = np.bincount(self.edge_u, weights=self.weights, minlength=self.n)
            s += np.bincount(self.edge_v, weights=self.weights, minlength=self.n)
            self._cache["strength"] = s
        return self._cache["strength"]

    def adjacency(self, weighted: bool = True) -> sparse.csr_matrix:
        """Symmetric CSR matrix of weights (or of 0/1 adjacency)."""
        key = "W" if weighted else "A"
        if key not in self._cache:
            data = self.weights[self.slot_edge] if weighted else np.ones(len(self.indices))
            self._cache[key] = sparse.csr_matrix(
                (data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))
        return self._cache[key]

    def edges(self) -> Iterable[tuple[int, int, float, float]]:
        for e in range(self.m):
            yield int(self.edge_u[e]), int(self.edge_v[e]), float(self.weights[e]), float(self.times[e])

    def topology_key(self) -> int:
        """Hash of the edge set and timestamps (weights excluded)."""
        return hash((self.n, self._keys.tobytes(), self.times.tobytes()))

    def to_temporal_edges(self) -> list[TemporalEdge]:
        lab = self.labels
        return [TemporalEdge(lab[a], lab[b], w, t) for a, b, w, t in self.edges()]


_TOPOLOGY_CACHE = ("label_index", "A", "mean_distance", "reachable_mean_distance", "triangles",
                   "components", "drift_topology")


AGGREGATIONS = ("sum-weights", "count-interactions", "keep-max-weight")


def build_graph(edges: Sequence[TemporalEdge], aggregation: str = "count-interactions") -> WeightedGraph:
    """Collapse interactions into a simple graph.

    Duplicate unordered pairs are merged by ``aggregation``; the merged edge
    carries the latest interaction timestamp.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")
    labels = sorted({e.u for e in edges} | {e.v for e in edges}, key=_label_key)
    index = {lab: i for i, lab in enumerate(labels)}
    merged: dict[tuple[int, int], list[float]] = {}
    for e in edges:
        a, b = index[e.u], index[e.v]
        if a == b:
            raise GraphError(f"self-loop on node {e.u!r}")
        key = (a, b) if a < b else (b, a)
        cur = merged.get(key)
        if cur is None:
            merged[key] = [1.0 if aggregation == "count-interactions" else e.w, e.t]
            continue
        if aggregation == "sum-weights":
            cur[0] += e.w
        elif aggregation == "count-interactions":
            cur[0] += 1.0
        else:
            cur[0] = max(cur[0], e.w)
        cur[1] = max(cur[1], e.t)
    if not merged:
        return WeightedGraph(len(labels), [], [], labels=labels)
    keys = np.array(list(merged.keys()), dtype=np.int64)
    vals = np.array(list(merged.values()), dtype=float)
    return WeightedGraph(len(labels), keys[:, 0], keys[:, 1], vals[:, 0], vals[:, 1], labels=labels)


def components(g: WeightedGraph) -> tuple[int, np.ndarray]:
    if "components" not in g._cache:
        if g.n == 0:
            g._cache["components"] = (0, np.zeros(0, dtype=np.int64))
        else:
            g._cache["components"] = csgraph.connected_components(g.adjacency(False), directed=False)
    return g._cache["components"]


def is_connected(g: WeightedGraph) -> bool:
    return g.n > 0 and components(g)[0] == 1


def giant_component(g: WeightedGraph) -> WeightedGraph:
    """Induced subgraph on the largest component (ties: smallest member id)."""
    if g.n == 0:
        return g
    ncomp, labels = components(g)
    if ncomp == 1:
        return g
    sizes = np.bincount(labels)
    first = np.full(ncomp, g.n)
    np.minimum.at(first, labels, np.arange(g.n))
    best = min(range(ncomp), key=lambda c: (-sizes[c], first[c]))
    return g.subgraph(np.flatnonzero(labels == best))


def bfs_distances(g: WeightedGraph, source: int) -> np.ndarray:
    """Hop distances from ``source``; -1 marks unreachable nodes."""
    g._check(source)
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    indptr, indices = g.indptr, g.indices
    while queue:
        x = queue.popleft()
        d = dist[x] + 1
        for y in indices[indptr[x]:indptr[x + 1]]:
            if dist[y] < 0:
                dist[y] = d
                queue.append(y)
    return dist


def hop_distance(g: WeightedGraph, x: int, y: int) -> int | None:
    """Unweighted shortest hop count, or ``None`` when ``y`` is unreachable."""
    g._check(x)
    g._check(y)
    if x == y:
        return 0
    d = bfs_distances(g, x)[y]
    return None if d < 0 else int(d)


def _distance_sum(g: WeightedGraph, chunk: int | None = None) -> tuple[float, int]:
    """Sum of hop distances and count over reachable ordered pairs (x != y).

    Breadth-first search from a block of sources at once: the frontier is a
    dense ``n x chunk`` 0/1 matrix advanced by one sparse product per level.
    """
    n = g.n
    if chunk is None:
        chunk = int(max(1, min(256, 4_000_000 // max(n, 1))))
    A = g.adjacency(False).astype(np.float32)
    total, count = 0, 0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        frontier = np.zeros((n, len(idx)), dtype=np.float32)
        frontier[idx, np.arange(len(idx))] = 1.0
        reached = frontier > 0
        level = 0
        while True:
            level += 1
            nxt = (A @ frontier > 0) & ~reached
            found = int(np.count_nonzero(nxt))
            if not found:
                break
            total += level * found
            count += found
            reached |= nxt
            frontier = nxt.astype(np.float32)
    return float(total), count


def mean_shortest_distance(g: WeightedGraph) -> float:
    """Average hop distance over all unordered node pairs of a connected graph."""
    if "mean_distance" in g._cache:
        return g._cache["mean_distance"]
    if g.n < 2:
        raise GraphError("mean distance needs at least two nodes")
    if not is_connected(g):
        raise DisconnectedGraphError(
            "graph is disconnected; call giant_component() first")
    total, count = _distance_sum(g)
    g._cache["mean_distance"] = total / count
    return g._cache["mean_distance"]


def reachable_mean_distance(g: WeightedGraph) -> float:
    """Mean hop distance over mutually reachable pairs; 0.0 if there are none."""
    if "reachable_mean_distance" not in g._cache:
        if g.n < 2:
            value = 0.0
        else:
            total, count = _distance_sum(g)
            value = total / count if count else 0.0
        g._cache["reachable_mean_distance"] = value
    return g._cache["reachable_mean_distance"]


def ego_edge_set(g: WeightedGraph, j: int) -> set[tuple[int, int]]:
    """Edges with both endpoints in ``{j} | neighbors(j)``, as ``(lo, hi)`` pairs."""
    g._check(j)
    ego = set(g.neighbors(j).tolist())
    ego.add(j)
    out = set()
    for a in ego:
        for b in g.neighbors(a).tolist():
            if a < b and b in ego:
                out.add((a, b))
    return out


MAX_WALK_LENGTH = 5


def walk_weight(g: WeightedGraph, x: int, y: int, length: int) -> float:
    """Entry ``(W**length)[x, y]`` by sparse frontier expansion from ``x``."""
    g._check(x)
    g._check(y)
    if x == y:
        raise GraphError("walk_weight needs distinct endpoints")
    if not 2 <= length <= MAX_WALK_LENGTH:
        raise GraphError(f"walk length must be in 2..{MAX_WALK_LENGTH}, got {length}")
    return _walk_from(g, x, length).get(y, 0.0)


def _walk_from(g: WeightedGraph, x: int, length: int) -> dict[int, float]:
    indptr, indices = g.indptr, g.indices
    w = g.weights[g.slot_edge]
    frontier = {x: 1.0}
    for _ in range(length):
        nxt: dict[int, float] = {}
        for node, val in frontier.items():
            for k in range(indptr[node], indptr[node + 1]):
                z = int(indices[k])
                nxt[z] = nxt.get(z, 0.0) + val * w[k]
        frontier = nxt
    return frontier
