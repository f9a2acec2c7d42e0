"""Spatial-temporal network position drift.

Each node redistributes the total weight of its incident edges towards
neighbours in proportion to their spatial-temporal influence:

* attractiveness ``AI(j)``: total weight of the ego network of ``j``;
* neighbours that are linked to each other share a fused attractiveness;
* temporal importance ``PI``: logistic recency of the shared edge;
* influence ``A(j)``: product of the max-normalised ``AI`` and ``PI``.

The per-node functions below evaluate one centre at a time and are the
readable reference.  :func:`drift_step` computes the same quantities for all
centres at once and is what the pipeline runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.special import expit

from .graph import WeightedGraph, ego_edge_set

SYMMETRIZATIONS = ("average", "one-sided")
TEMPORAL_MODES = ("use-timestamps", "uniform")
MAX_ITERATIONS = 50


@dataclass(frozen=True)
class DriftConfig:
    iterations: int = 3
    symmetrization: str = "average"
    temporal: str = "use-timestamps"

    def __post_init__(self):
        if not 0 <= self.iterations <= MAX_ITERATIONS:
            raise ValueError(f"iterations must be in 0..{MAX_ITERATIONS}")
        if self.symmetrization not in SYMMETRIZATIONS:
            raise ValueError(f"symmetrization must be one of {SYMMETRIZATIONS}")
        if self.temporal not in TEMPORAL_MODES:
            raise ValueError(f"temporal must be one of {TEMPORAL_MODES}")


@dataclass
class InfluenceField:
    center: int
    attractiveness: dict[int, float] = field(default_factory=dict)
    temporal: dict[int, float] = field(default_factory=dict)
    influence: dict[int, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# reference, one centre at a time

def attractiveness(g: WeightedGraph, j: int) -> float:
    """Total weight of the edges inside ``{j} | neighbors(j)``."""
    return float(sum(g.weight(a, b) for a, b in ego_edge_set(g, j)))


def neighbor_components(g: WeightedGraph, a: int) -> list[frozenset[int]]:
    """Components of the subgraph induced on the neighbours of ``a``."""
    nbrs = set(g.neighbors(a).tolist())
    seen, parts = set(), []
    for start in sorted(nbrs):
        if start in seen:
            continue
        comp, stack = {start}, [start]
        while stack:
            x = stack.pop()
            for y in g.neighbors(x).tolist():
                if y in nbrs and y not in comp:
                    comp.add(y)
                    stack.append(y)
        seen |= comp
        parts.append(frozenset(comp))
    return parts


def fused_attractiveness(g: WeightedGraph, a: int, nc) -> dict[int, float]:
    """Attractiveness shared by a set of linked neighbours.

    The members' ego networks are merged into one virtual node ``f``; each
    member receives ``|NC| * AI(f)`` split in proportion to its own
    independent attractiveness.
    """
    nc = sorted(nc)
    union = set()
    for m in nc:
        union |= ego_edge_set(g, m)
    ai_f = float(sum(g.weight(p, q) for p, q in union))
    own = {m: attractiveness(g, m) for m in nc}
    total = sum(own.values())
    if total == 0:
        return {m: ai_f for m in nc}
    return {m: len(nc) * ai_f * own[m] / total for m in nc}


def temporal_importance(g: WeightedGraph, a: int, temporal: str = "use-timestamps") -> dict[int, float]:
    nbrs = g.neighbors(a).tolist()
    times = np.array([g.timestamp(a, j) for j in nbrs])
    if temporal == "uniform" or len(nbrs) == 0 or times.max() == times.min():
        return {j: 0.5 for j in nbrs}
    mean = times.mean()
    dt = (times.max() - times.min()) / len(nbrs)
    return {j: float(expit((t - mean) / (2 * dt))) for j, t in zip(nbrs, times)}


def combined_influence(g: WeightedGraph, a: int, temporal: str = "use-timestamps") -> InfluenceField:
    ai = {}
    for comp in neighbor_components(g, a):
        if len(comp) == 1:
            (j,) = comp
            ai[j] = attractiveness(g, j)
        else:
            ai.update(fused_attractiveness(g, a, comp))
    pi = temporal_importance(g, a, temporal)
    field_ = InfluenceField(a, ai, pi)
    if not ai:
        return field_
    max_ai = max(ai.values())
    max_pi = max(pi.values())
    for j in ai:
        spatial = ai[j] / max_ai if max_ai > 0 else 1.0
        field_.influence[j] = spatial * pi[j] / max_pi
    return field_


def drift_delta(g: WeightedGraph, a: int, temporal: str = "use-timestamps") -> dict[int, float]:
    """Change of similarity ``s(a, j)`` for each neighbour ``j`` of ``a``."""
    infl = combined_influence(g, a, temporal).influence
    s = {j: g.weight(a, j) for j in infl}
    total_s, total_a = sum(s.values()), sum(infl.values())
    if total_s == 0 or total_a == 0:
        return {j: 0.0 for j in infl}
    return {j: -total_s * (s[j] / total_s - infl[j] / total_a) for j in infl}


# ---------------------------------------------------------------------------
# vectorised, all centres

def _ragged(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(s, s + l)`` for each start/length pair."""
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.cumsum(lengths) - lengths
    return np.repeat(np.asarray(starts, dtype=np.int64) - offsets, lengths) + np.arange(total)


def triangles(g: WeightedGraph) -> np.ndarray:
    """All triangles as rows ``(p, q, r)`` with ``p < q < r``."""
    if "triangles" in g._cache:
        return g._cache["triangles"]
    higher = [set(int(y) for y in g.neighbors(x) if y > x) for x in range(g.n)]
    out = []
    for u, v in zip(g.edge_u.tolist(), g.edge_v.tolist()):
        hv = higher[v]
        if not hv:
            continue
        for w in higher[u] & hv:
            out.append((u, v, w))
    tri = np.array(sorted(out), dtype=np.int64).reshape(-1, 3)
    g._cache["triangles"] = tri
    return tri


@dataclass
class _DriftTopology:
    tri_node: np.ndarray       # node j of a triangle incidence
    tri_opp: np.ndarray        # edge opposite to j in that triangle
    slot_comp: np.ndarray      # neighbour-component id of each adjacency slot
    comp_size: np.ndarray
    fused_ptr: np.ndarray      # CSR over components: edges of the fused ego union
    fused_edge: np.ndarray
    row_nonempty: np.ndarray
    row_starts: np.ndarray


FUSED_CHUNK = 4_000_000


def _fused_unions(g: WeightedGraph, slot_comp, comp_size, tri_node, tri_opp):
    """Edge sets of the fused ego networks of every multi-member component.

    The union over members ``m`` of ego(m) is every edge incident to a member
    plus every edge opposite a member in a triangle.  Components are
    processed in chunks so the transient raw incidence list stays bounded.
    """
    ncomp = len(comp_size)
    multi = np.flatnonzero(comp_size[slot_comp] > 1)
    multi = multi[np.argsort(slot_comp[multi], kind="stable")]
    members = g.indices[multi]
    comps = slot_comp[multi]

    order = np.argsort(tri_node, kind="stable")
    tri_sorted_opp = tri_opp[order]
    tri_ptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tri_node, minlength=g.n), out=tri_ptr[1:])
    deg = g.degree
    raw = deg[members] + np.diff(tri_ptr)[members]

    counts = np.zeros(ncomp, dtype=np.int64)
    edge_chunks = []
    cum = np.cumsum(raw)
    start = 0
    while start < len(members):
        # extend to a component boundary once the raw budget is reached
        base = cum[start - 1] if start else 0
        stop = int(np.searchsorted(cum, base + FUSED_CHUNK, "right"))
        stop = max(stop, start + 1)
        if stop < len(members):
            stop = int(np.searchsorted(comps, comps[stop - 1], "right"))
        mem, cmp_ = members[start:stop], comps[start:stop]
        inc = g.slot_edge[_ragged(g.indptr[mem], deg[mem])]
        tcount = np.diff(tri_ptr)[mem]
        opp = tri_sorted_opp[_ragged(tri_ptr[mem], tcount)]
        key = np.unique(np.concatenate([np.repeat(cmp_, deg[mem]) * g.m + inc,
                                        np.repeat(cmp_, tcount) * g.m + opp]))
        kc = key // g.m
        counts += np.bincount(kc, minlength=ncomp)
        edge_chunks.append((key % g.m).astype(np.int32))
        start = stop
    ptr = np.zeros(ncomp + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    edges = np.concatenate(edge_chunks) if edge_chunks else np.zeros(0, dtype=np.int32)
    return ptr, edges


def _topology(g: WeightedGraph) -> _DriftTopology:
    if "drift_topology" in g._cache:
        return g._cache["drift_topology"]
    tri = triangles(g)
    p, q, r = tri[:, 0], tri[:, 1], tri[:, 2]
    e_pq, e_pr, e_qr = g.edge_ids(p, q), g.edge_ids(p, r), g.edge_ids(q, r)
    tri_node = np.concatenate([p, q, r])
    tri_opp = np.concatenate([e_qr, e_pr, e_pq])

    nslots = len(g.indices)
    slot_keys = g.slot_row * g.n + g.indices

    def slot(a, b):
        return np.searchsorted(slot_keys, a * g.n + b)

    left = np.concatenate([slot(p, q), slot(q, p), slot(r, p)])
    right = np.concatenate([slot(p, r), slot(q, r), slot(r, q)])
    link = sparse.coo_matrix((np.ones(len(left)), (left, right)), shape=(nslots, nslots))
    _, slot_comp = csgraph.connected_components(link, directed=False)
    comp_size = np.bincount(slot_comp)
    fused_ptr, fused_edge = _fused_unions(g, slot_comp, comp_size, tri_node, tri_opp)

    row_nonempty = np.flatnonzero(g.degree > 0)
    topo = _DriftTopology(tri_node, tri_opp, slot_comp, comp_size, fused_ptr, fused_edge,
                          row_nonempty, g.indptr[row_nonempty])
    g._cache["drift_topology"] = topo
    return topo


def _segment_sums(values: np.ndarray, ptr: np.ndarray, idx: np.ndarray, chunk: int = FUSED_CHUNK):
    """``sum(values[idx[ptr[i]:ptr[i+1]]])`` for every segment ``i``, in bounded chunks."""
    nseg = len(ptr) - 1
    out = np.zeros(nseg)
    lo = 0
    while lo < nseg:
        hi = int(np.searchsorted(ptr, ptr[lo] + chunk, "right")) - 1
        hi = min(max(hi, lo + 1), nseg)
        seg = np.arange(lo, hi)
        seg = seg[ptr[seg + 1] > ptr[seg]]
        if len(seg):
            vals = values[idx[ptr[lo]:ptr[hi]]]
            out[seg] = np.add.reduceat(vals, ptr[seg] - ptr[lo])
        lo = hi
    return out


@dataclass
class SlotField:
    """Per adjacency slot ``(a, j)`` quantities for every centre ``a``."""

    attractiveness: np.ndarray
    temporal: np.ndarray
    influence: np.ndarray
    delta: np.ndarray
    one_sided: np.ndarray


def _row_reduce(ufunc, values, topo: _DriftTopology, n: int, fill=0.0) -> np.ndarray:
    out = np.full(n, fill, dtype=float)
    if len(values):
        out[topo.row_nonempty] = ufunc.reduceat(values, topo.row_starts)
    return out


def slot_field(g: WeightedGraph, temporal: str = "use-timestamps") -> SlotField:
    topo = _topology(g)
    w = g.weights
    n, rows = g.n, g.slot_row
    ai_own = g.strength + np.bincount(topo.tri_node, weights=w[topo.tri_opp], minlength=n)

    ai = ai_own[g.indices]
    ncomp = len(topo.comp_size)
    fused = _segment_sums(w, topo.fused_ptr, topo.fused_edge)
    own_sum = np.bincount(topo.slot_comp, weights=ai, minlength=ncomp)
    c = topo.slot_comp
    in_multi = topo.comp_size[c] > 1
    share = np.divide(ai, own_sum[c], out=np.full(len(ai), np.nan), where=own_sum[c] > 0)
    share = np.where(np.isnan(share), 1.0 / topo.comp_size[c], share)
    ai = np.where(in_multi, topo.comp_size[c] * fused[c] * share, ai)

    deg = g.degree.astype(float)
    t = g.times[g.slot_edge]
    if temporal == "uniform":
        pi = np.full(len(t), 0.5)
    else:
        tmax = _row_reduce(np.maximum, t, topo, n)
        tmin = _row_reduce(np.minimum, t, topo, n)
        tmean = _row_reduce(np.add, t, topo, n) / np.maximum(deg, 1)
        span = (tmax - tmin)[rows]
        dt = span / deg[rows]
        z = np.divide(t - tmean[rows], 2 * dt, out=np.zeros(len(t)), where=span > 0)
        pi = expit(z)

    max_ai = _row_reduce(np.maximum, ai, topo, n)[rows]
    max_pi = _row_reduce(np.maximum, pi, topo, n)[rows]
    spatial = np.divide(ai, max_ai, out=np.ones(len(ai)), where=max_ai > 0)
    infl = spatial * (pi / max_pi) if len(pi) else spatial

    ws = w[g.slot_edge]
    total_s = g.strength[rows]
    total_a = _row_reduce(np.add, infl, topo, n)[rows]
    live = (total_s > 0) & (total_a > 0)
    one_sided = np.where(live, total_s * np.divide(infl, total_a, out=np.zeros(len(infl)), where=live), ws)
    delta = np.where(live, -total_s * (np.divide(ws, total_s, out=np.zeros(len(ws)), where=live)
                                       - np.divide(infl, total_a, out=np.zeros(len(ws)), where=live)), 0.0)
    return SlotField(ai, pi, infl, delta, one_sided)


def drift_step(g: WeightedGraph, cfg: DriftConfig | None = None) -> WeightedGraph:
    """One synchronous round: every centre's deltas from the same snapshot."""
    cfg = cfg or DriftConfig()
    if g.m == 0:
        return g
    f = slot_field(g, cfg.temporal)
    if cfg.symmetrization == "average":
        new = np.bincount(g.slot_edge, weights=f.one_sided, minlength=g.m) / 2.0
    else:
        lower = g.slot_row < g.indices
        new = np.empty(g.m)
        new[g.slot_edge[lower]] = f.one_sided[lower]
    return g.with_weights(np.maximum(new, 0.0))


def drift_iterate(g: WeightedGraph, cfg: DriftConfig | None = None) -> WeightedGraph:
    cfg = cfg or DriftConfig()
    for _ in range(cfg.iterations):
        g = drift_step(g, cfg)
    return g
