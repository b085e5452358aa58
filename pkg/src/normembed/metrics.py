"""Fidelity and ranking metrics. Library functions return fractions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import spaces
from .graphs import Graph, PairStore
from .spaces import SpaceSpec

TIE_EPS = 1e-12
DEFAULT_BINS = 101


@dataclass
class FidelityReport:
    d_avg: float
    map: float
    histogram: list[tuple[float, float, int]]


def pair_distances(spec: SpaceSpec, points: np.ndarray, pairs: PairStore) -> np.ndarray:
    return spaces.distances(spec, points[pairs.u], points[pairs.v])


def d_avg(spec: SpaceSpec, points: np.ndarray, pairs: PairStore) -> float:
    """Mean of ``|d_Y - d_G| / d_G`` over all stored pairs."""
    if len(pairs) == 0:
        raise ValueError("no pairs")
    d = pair_distances(spec, points, pairs)
    return float(np.mean(np.abs(d - pairs.dist) / pairs.dist))


def average_precision_from_distances(dist_row: np.ndarray, anchor: int, neigh: np.ndarray) -> float:
    """AP of one anchor: neighbours ranked by the closed ball through each."""
    d = np.where(dist_row < TIE_EPS, 0.0, dist_row)
    others = np.delete(d, anchor)
    others.sort()
    nd = np.sort(d[neigh])
    # |R| = nodes within the ball, |N ∩ R| = neighbours within it
    ball = np.searchsorted(others, nd, side="right")
    hits = np.searchsorted(nd, nd, side="right")
    return float(np.mean(hits / ball))


def map_score(spec: SpaceSpec, points: np.ndarray, graph: Graph) -> float:
    """Mean average precision of graph neighbourhoods in the embedding."""
    if graph.is_weighted:
        raise ValueError("mAP is only defined for unweighted graphs")
    neighbors = graph.neighbors()
    total, count = 0.0, 0
    for a in range(graph.num_nodes):
        neigh = neighbors[a]
        if len(neigh) == 0:
            continue
        row = spaces.distances(spec, np.broadcast_to(points[a], points.shape), points)
        total += average_precision_from_distances(row, a, neigh)
        count += 1
    return total / count if count else float("nan")


def distortion_histogram(spec: SpaceSpec, points: np.ndarray, pairs: PairStore, bins: int = DEFAULT_BINS):
    """Histogram of ``d_Y / d_G - 1`` as ``(bin_low, bin_high, count)`` rows."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    values = pair_distances(spec, points, pairs) / pairs.dist - 1.0
    counts, edges = np.histogram(values, bins=bins)
    return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def fidelity(spec: SpaceSpec, points: np.ndarray, pairs: PairStore, graph: Graph | None = None,
             bins: int = DEFAULT_BINS) -> FidelityReport:
    m = map_score(spec, points, graph) if graph is not None and not graph.is_weighted else float("nan")
    return FidelityReport(d_avg(spec, points, pairs), m, distortion_histogram(spec, points, pairs, bins))


def auc(scores_pos, scores_neg) -> float:
    """P(random positive outranks random negative), ties counting one half."""
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auc needs positives and negatives")
    ranks = rankdata(np.concatenate([pos, neg]))
    n_pos, n_neg = len(pos), len(neg)
    return float((ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def hr_at_k(rank: int, k: int = 10) -> int:
    if rank < 1:
        raise ValueError("rank is 1-based")
    return int(rank <= k)


def ndcg_at_k(rank: int, k: int = 10) -> float:
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 / np.log2(rank + 1) if rank <= k else 0.0
