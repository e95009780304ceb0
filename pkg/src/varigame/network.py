"""k-regular population structures with materialized, id-stable edges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegularGraph:
    """Simple undirected k-regular graph.

    ``neighbors[i]`` lists the k neighbors of node i in ascending order.
    ``edges`` materializes each undirected edge once (i < j) with a stable
    integer id equal to its row; ``edge_of[i, s]`` is the edge id between
    node i and its s-th neighbor.
    """

    neighbors: np.ndarray  # (n, k) int32
    edges: np.ndarray      # (m, 2) int32
    edge_of: np.ndarray    # (n, k) int32

    @property
    def n_nodes(self) -> int:
        return self.neighbors.shape[0]

    @property
    def degree(self) -> int:
        return self.neighbors.shape[1]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def validate(self) -> None:
        """Full scan for regularity, symmetry, and absence of self-loops."""
        n, k = self.neighbors.shape
        for i in range(n):
            row = self.neighbors[i]
            if len(set(row.tolist())) != k:
                raise ValueError(f"node {i} has repeated neighbors")
            if i in row:
                raise ValueError(f"node {i} has a self-loop")
            for j in row:
                if i not in self.neighbors[j]:
                    raise ValueError(f"adjacency not symmetric at ({i}, {j})")
        if self.n_edges * 2 != n * k:
            raise ValueError("edge count inconsistent with degree")


def _from_adjacency(adj: list) -> RegularGraph:
    """Build the graph record from per-node neighbor sets."""
    n = len(adj)
    degs = {len(s) for s in adj}
    if len(degs) != 1:
        raise ValueError(f"graph is not regular: degrees {sorted(degs)}")
    k = degs.pop()
    neighbors = np.array([sorted(s) for s in adj], dtype=np.int32)
    edge_ids = {}
    edges = []
    for i in range(n):
        for j in adj[i]:
            if i < j:
                edge_ids[(i, j)] = len(edges)
                edges.append((i, j))
    edge_of = np.empty((n, k), dtype=np.int32)
    for i in range(n):
        for s, j in enumerate(neighbors[i]):
            a, b = (i, int(j)) if i < j else (int(j), i)
            edge_of[i, s] = edge_ids[(a, b)]
    return RegularGraph(neighbors=neighbors,
                        edges=np.array(edges, dtype=np.int32),
                        edge_of=edge_of)


def lattice_von_neumann(side: int) -> RegularGraph:
    """Periodic square lattice, 4 orthogonal neighbors per node."""
    if side < 3:
        raise ValueError(f"side must be >= 3 to keep neighbors distinct, got {side}")
    n = side * side
    adj = [set() for _ in range(n)]
    for r in range(side):
        for c in range(side):
            i = r * side + c
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                j = ((r + dr) % side) * side + (c + dc) % side
                adj[i].add(j)
    return _from_adjacency(adj)


def lattice_moore(side: int) -> RegularGraph:
    """Periodic square lattice, 8 neighbors (orthogonal + diagonal)."""
    if side < 3:
        raise ValueError(f"side must be >= 3 to keep neighbors distinct, got {side}")
    n = side * side
    adj = [set() for _ in range(n)]
    for r in range(side):
        for c in range(side):
            i = r * side + c
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    j = ((r + dr) % side) * side + (c + dc) % side
                    adj[i].add(j)
    return _from_adjacency(adj)


def complete_graph(n: int) -> RegularGraph:
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    adj = [set(range(n)) - {i} for i in range(n)]
    return _from_adjacency(adj)


def random_regular(n: int, k: int, seed: int, max_tries: int = 500) -> RegularGraph:
    """Random simple k-regular graph via the pairing model.

    Stubs are matched uniformly at random; matchings containing self-loops
    or multi-edges are rejected and redrawn, up to ``max_tries`` attempts.
    """
    if k >= n:
        raise ValueError(f"degree {k} must be below n={n}")
    if (n * k) % 2 != 0:
        raise ValueError(f"n*k = {n * k} is odd: no {k}-regular graph on {n} nodes")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), k)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        canon = {(min(a, b), max(a, b)) for a, b in pairs.tolist()}
        if len(canon) != pairs.shape[0]:
            continue
        adj = [set() for _ in range(n)]
        for a, b in canon:
            adj[a].add(b)
            adj[b].add(a)
        return _from_adjacency(adj)
    raise RuntimeError(
        f"pairing model failed to produce a simple graph in {max_tries} tries")
