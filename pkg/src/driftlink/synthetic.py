"""Preferential-attachment interaction streams for self-contained experiments."""

from __future__ import annotations

import numpy as np

from .graph import TemporalEdge


def generate_synthetic(nodes: int, edges_per_node: int, seed: int = 0, triad_prob: float = 0.0,
                       internal_prob: float = 0.0) -> list[TemporalEdge]:
    """Grow a network by preferential attachment and return its interactions.

    Growth starts from a clique on ``edges_per_node + 1`` nodes.  Each later
    step either adds a node wired to ``edges_per_node`` distinct existing
    nodes, or (with probability ``internal_prob``) adds ``edges_per_node``
    interactions between existing nodes, which may repeat earlier pairs.
    Targets are picked proportionally to degree; with probability
    ``triad_prob`` a target after the first is instead a random neighbour of
    the previous target (Holme-Kim triad formation).

    With the defaults the stream has ``m(m+1)/2 + (nodes-m-1)m`` edges.
    Timestamps are insertion indices and weights are 1.
    """
    m = edges_per_node
    if nodes < 3:
        raise ValueError("need at least 3 nodes")
    if not 1 <= m < nodes:
        raise ValueError("edges_per_node must be in 1..nodes-1")
    if not (0 <= triad_prob <= 1 and 0 <= internal_prob < 1):
        raise ValueError("probabilities out of range")

    rng = np.random.default_rng(seed)
    adj: list[list[int]] = [[] for _ in range(nodes)]
    ends: list[int] = []
    out: list[TemporalEdge] = []

    def link(a, b):
        out.append(TemporalEdge(a, b, 1.0, float(len(out))))
        adj[a].append(b)
        adj[b].append(a)
        ends.extend((a, b))

    for a in range(m + 1):
        for b in range(a + 1, m + 1):
            link(a, b)

    def pick(exclude):
        while True:
            c = ends[rng.integers(len(ends))]
            if c not in exclude:
                return c

    current = m + 1
    while current < nodes:
        if internal_prob and rng.random() < internal_prob:
            for _ in range(m):
                a = ends[rng.integers(len(ends))]
                b = pick({a})
                link(a, b)
            continue
        chosen: list[int] = []
        while len(chosen) < m:
            target = None
            if chosen and triad_prob and rng.random() < triad_prob:
                options = [y for y in adj[chosen[-1]] if y not in chosen]
                if options:
                    target = options[rng.integers(len(options))]
            if target is None:
                target = pick(set(chosen))
            chosen.append(target)
        for target in chosen:
            link(current, target)
        current += 1
    return out
