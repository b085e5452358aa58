"""Graph construction, generators, edge-list IO and all-pairs shortest paths."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class GraphError(ValueError):
    """Raised for invalid graph parameters or malformed graph files."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..num_nodes-1``.

    Edges are stored canonically (``u < v``) in insertion order. Use
    :meth:`from_edges` to build one; it drops self-loops and duplicate edges.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    node_names: tuple[str, ...] | None = field(default=None, compare=False)

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: Iterable[Sequence],
        node_names: Sequence[str] | None = None,
    ) -> "Graph":
        seen: set[tuple[int, int]] = set()
        src, dst, wts = [], [], []
        for edge in edges:
            u, v = int(edge[0]), int(edge[1])
            w = float(edge[2]) if len(edge) > 2 else 1.0
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
            if not w > 0 or not math.isfinite(w):
                raise GraphError(f"edge ({u}, {v}) has non-positive weight {w}")
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key in seen:
                continue
            seen.add(key)
            src.append(key[0])
            dst.append(key[1])
            wts.append(w)
        return cls(
            num_nodes=int(num_nodes),
            src=np.asarray(src, dtype=np.int64),
            dst=np.asarray(dst, dtype=np.int64),
            weight=np.asarray(wts, dtype=np.float64),
            node_names=tuple(node_names) if node_names is not None else None,
        )

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def is_weighted(self) -> bool:
        return bool(np.any(self.weight != 1.0))

    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))

    def adjacency(self) -> csr_matrix:
        n = self.num_nodes
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([self.weight, self.weight])
        return csr_matrix((vals, (rows, cols)), shape=(n, n))

    def neighbors(self) -> list[np.ndarray]:
        adj = self.adjacency()
        return [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(self.num_nodes)]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.src, 1)
        np.add.at(deg, self.dst, 1)
        return deg


@dataclass(frozen=True)
class PairStore:
    """Connected node pairs ``u < v`` with their shortest-path distance."""

    num_nodes: int
    u: np.ndarray
    v: np.ndarray
    dist: np.ndarray

    def __len__(self) -> int:
        return len(self.u)

    def subset(self, idx) -> "PairStore":
        return PairStore(self.num_nodes, self.u[idx], self.v[idx], self.dist[idx])


# ---------------------------------------------------------------------------
# generators


def gen_tree(branching: int, height: int) -> Graph:
    """Full ``branching``-ary tree of the given height, root 0, BFS numbering."""
    if branching < 1 or height < 0:
        raise GraphError("tree needs branching >= 1 and height >= 0")
    n = sum(branching**k for k in range(height + 1))
    edges = [((i - 1) // branching, i) for i in range(1, n)]
    return Graph.from_edges(n, edges)


def gen_grid(sides: Sequence[int]) -> Graph:
    """Axis-aligned lattice with row-major node ids (last axis fastest)."""
    sides = [int(s) for s in sides]
    if not sides or any(s < 2 for s in sides):
        raise GraphError("every grid side must be >= 2")
    n = math.prod(sides)
    coords = np.array(list(itertools.product(*[range(s) for s in sides])), dtype=np.int64)
    strides = [math.prod(sides[i + 1:]) for i in range(len(sides))]
    edges = []
    ids = np.arange(n)
    for axis, stride in enumerate(strides):
        mask = coords[:, axis] < sides[axis] - 1
        edges.extend(zip(ids[mask].tolist(), (ids[mask] + stride).tolist()))
    edges.sort()
    return Graph.from_edges(n, edges)


def cartesian_product(g1: Graph, g2: Graph) -> Graph:
    """Cartesian (box) product; node ``(i1, i2)`` gets id ``i1 * |V2| + i2``."""
    if g1.num_nodes == 0 or g2.num_nodes == 0:
        raise GraphError("cartesian product needs non-empty factors")
    n2 = g2.num_nodes
    edges = []
    for a, b, w in g1.edges():
        edges.extend((a * n2 + j, b * n2 + j, w) for j in range(n2))
    for a, b, w in g2.edges():
        edges.extend((i * n2 + a, i * n2 + b, w) for i in range(g1.num_nodes))
    edges.sort()
    return Graph.from_edges(g1.num_nodes * n2, edges)


def rooted_product(base: Graph, fiber: Graph, fiber_root: int = 0) -> Graph:
    """Attach a copy of ``fiber`` at every base node, gluing at ``fiber_root``.

    Node ``(b, j)`` gets id ``b * |V_fiber| + j``; the base node ``b`` is the
    copy of the fiber root, i.e. id ``b * |V_fiber| + fiber_root``.
    """
    if not 0 <= fiber_root < fiber.num_nodes:
        raise GraphError(f"fiber root {fiber_root} not in fiber")
    nf = fiber.num_nodes
    edges = [(a * nf + fiber_root, b * nf + fiber_root, w) for a, b, w in base.edges()]
    for i in range(base.num_nodes):
        edges.extend((i * nf + a, i * nf + b, w) for a, b, w in fiber.edges())
    return Graph.from_edges(base.num_nodes * nf, edges)


def margulis_moves(n: int, x: int, y: int) -> list[tuple[int, int]]:
    """The eight Margulis-Gabber-Galil neighbours of ``(x, y)`` in Z_n x Z_n."""
    return [
        ((x + 2 * y) % n, y),
        ((x - 2 * y) % n, y),
        ((x + 2 * y + 1) % n, y),
        ((x - 2 * y - 1) % n, y),
        (x, (y + 2 * x) % n),
        (x, (y - 2 * x) % n),
        (x, (y + 2 * x + 1) % n),
        (x, (y - 2 * x - 1) % n),
    ]


def gen_margulis(n: int) -> Graph:
    """Margulis-Gabber-Galil expander on Z_n x Z_n, reduced to a simple graph."""
    if n < 2:
        raise GraphError("margulis needs n >= 2")
    edges = []
    for x in range(n):
        for y in range(n):
            edges.extend((x * n + y, a * n + b) for a, b in margulis_moves(n, x, y))
    return Graph.from_edges(n * n, edges)


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, math.isqrt(q) + 1))


def gen_paley(q: int) -> Graph:
    """Paley graph: ``a ~ b`` iff ``a - b`` is a nonzero square mod ``q``."""
    if not is_prime(q) or q % 4 != 1:
        raise GraphError(f"paley needs a prime q = 1 mod 4, got {q}")
    residues = {(i * i) % q for i in range(1, q)}
    edges = [(a, b) for a in range(q) for b in range(a + 1, q) if (b - a) % q in residues]
    return Graph.from_edges(q, edges)


def gen_chordal_cycle(p: int) -> Graph:
    """Cycle on Z_p plus the chord ``i -- i^{-1}`` for every ``i >= 1``."""
    if not is_prime(p):
        raise GraphError(f"chordal cycle needs a prime, got {p}")
    edges = [(i, (i + 1) % p) for i in range(p)]
    edges += [(i, pow(i, -1, p)) for i in range(1, p)]
    return Graph.from_edges(p, edges)


# ---------------------------------------------------------------------------
# edge-list files


def load_edge_list(path, weighted: bool = False) -> Graph:
    """Read a whitespace-separated edge list.

    Node tokens are arbitrary strings, compacted to ``0..n-1`` in order of
    first appearance. ``#`` lines and blank lines are skipped. Duplicate
    edges keep the first weight seen.
    """
    ids: dict[str, int] = {}
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise GraphError(f"{path}:{lineno}: expected 'u v [w]', got {line!r}")
            w = 1.0
            if weighted and len(tokens) == 3:
                try:
                    w = float(tokens[2])
                except ValueError:
                    raise GraphError(f"{path}:{lineno}: bad weight {tokens[2]!r}") from None
                if not w > 0:
                    raise GraphError(f"{path}:{lineno}: weight must be positive, got {w}")
            u = ids.setdefault(tokens[0], len(ids))
            v = ids.setdefault(tokens[1], len(ids))
            edges.append((u, v, w))
    return Graph.from_edges(len(ids), edges, node_names=list(ids))


def write_edge_list(graph: Graph, path) -> Path:
    """Write ``graph`` as an edge list plus the ``<name>.nodes.tsv`` id map."""
    path = Path(path)
    weighted = graph.is_weighted
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={graph.num_nodes} edges={graph.num_edges}\n")
        for u, v, w in graph.edges():
            fh.write(f"{u} {v} {w!r}\n" if weighted else f"{u} {v}\n")
    names = graph.node_names or [str(i) for i in range(graph.num_nodes)]
    nodes_path = path.with_name(path.stem + ".nodes.tsv")
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(names):
            fh.write(f"{name}\t{i}\n")
    return nodes_path


# ---------------------------------------------------------------------------
# shortest paths


def distance_matrix(g: Graph) -> np.ndarray:
    """Dense shortest-path matrix; ``inf`` marks unreachable pairs.

    Unit-weight graphs are searched breadth-first, weighted ones with
    Dijkstra, one source at a time.
    """
    if g.num_nodes == 0:
        raise GraphError("graph is empty")
    return shortest_path(g.adjacency(), method="D", directed=False, unweighted=not g.is_weighted)


def apsp(g: Graph) -> PairStore:
    """Exact shortest-path distance for every connected pair ``u < v``."""
    dist = distance_matrix(g)
    u, v = np.triu_indices(g.num_nodes, k=1)
    d = dist[u, v]
    keep = np.isfinite(d)
    return PairStore(g.num_nodes, u[keep].astype(np.int64), v[keep].astype(np.int64), d[keep])
