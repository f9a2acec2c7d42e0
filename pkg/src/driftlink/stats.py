"""Structural statistics of a (giant-component) network."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .graph import WeightedGraph, mean_shortest_distance


@dataclass(frozen=True)
class NetworkStats:
    N: int
    M: int
    mean_degree: float
    mean_distance: float
    clustering: float
    weighted_clustering: float
    assortativity: float
    heterogeneity: float

    def as_dict(self) -> dict:
        return asdict(self)


def local_clustering(g: WeightedGraph) -> np.ndarray:
    """Triangles over wedges per node; 0 for nodes of degree < 2."""
    A = g.adjacency(False)
    closed = np.asarray(A.multiply(A @ A).sum(axis=1)).ravel()
    k = g.degree.astype(float)
    wedges = k * (k - 1)
    return np.divide(closed, wedges, out=np.zeros(g.n), where=wedges > 0)


def barrat_clustering(g: WeightedGraph) -> np.ndarray:
    """Weighted local clustering of Barrat et al.

    ``sum_{j,h} (w_ij + w_ih)/2 * a_ij a_ih a_jh / (s_i (k_i - 1))``, which
    equals ``sum_j w_ij (A^2)_ij / (s_i (k_i - 1))``.
    """
    A = g.adjacency(False)
    W = g.adjacency(True)
    num = np.asarray(W.multiply(A @ A).sum(axis=1)).ravel()
    den = g.strength * (g.degree - 1)
    return np.divide(num, den, out=np.zeros(g.n), where=den > 0)


def degree_assortativity(g: WeightedGraph) -> float:
    """Pearson correlation of endpoint degrees over edges (nan if undefined)."""
    if g.m == 0:
        return float("nan")
    k = g.degree.astype(float)
    x = np.concatenate([k[g.edge_u], k[g.edge_v]])
    y = np.concatenate([k[g.edge_v], k[g.edge_u]])
    dx, dy = x - x.mean(), y - y.mean()
    den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if den == 0:
        return float("nan")
    return float((dx * dy).sum() / den)


def degree_heterogeneity(g: WeightedGraph) -> float:
    k = g.degree.astype(float)
    if k.sum() == 0:
        return float("nan")
    return float(np.mean(k * k) / np.mean(k) ** 2)


def network_stats(g: WeightedGraph) -> NetworkStats:
    """Table of N, M, <k>, <d>, C, C_w, r, H.  ``g`` must be connected."""
    return NetworkStats(
        N=g.n,
        M=g.m,
        mean_degree=2.0 * g.m / g.n if g.n else 0.0,
        mean_distance=mean_shortest_distance(g),
        clustering=float(local_clustering(g).mean()),
        weighted_clustering=float(barrat_clustering(g).mean()),
        assortativity=degree_assortativity(g),
        heterogeneity=degree_heterogeneity(g),
    )
