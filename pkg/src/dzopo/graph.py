"""Communication graphs, doubly stochastic mixing matrices, and consensus averaging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CommGraph:
    """Undirected graph over agent indices 0..n_agents-1.

    Edges are stored as a frozenset of sorted pairs; self-loops and
    duplicates are rejected at construction.
    """

    n_agents: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise ValueError(f"edge ({i},{j}) out of range for {self.n_agents} agents")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))

    def neighbors(self, i: int) -> list:
        return sorted({j for a, b in self.edges for j in ((b,) if a == i else (a,) if b == i else ())})

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i in (a, b))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def is_connected(self) -> bool:
        if self.n_agents == 1:
            return True
        adj = self.adjacency()
        seen = np.zeros(self.n_agents, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())


def build_chain(n: int, order=None) -> CommGraph:
    """Chain 0-1-...-(n-1), or along ``order`` (a permutation of range(n)).

    ``order`` selects which agents are chain neighbors: consecutive entries
    of the permutation are linked. The default is identity order.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if order is None:
        order = range(n)
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of range({n})")
    return CommGraph(n, frozenset((order[i], order[i + 1]) for i in range(n - 1)))


def build_grid(rows: int, cols: int) -> CommGraph:
    """4-neighbor lattice with row-major node indexing."""
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    edges = set()
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.add((i, i + 1))
            if r + 1 < rows:
                edges.add((i, i + cols))
    return CommGraph(rows * cols, frozenset(edges))


def build_complete(n: int) -> CommGraph:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return CommGraph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def from_edge_list(n: int, edges) -> CommGraph:
    return CommGraph(n, frozenset(tuple(e) for e in edges))


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic weight matrix W with contraction factor rho.

    rho is the spectral norm of W - (1/N) 11^T: the per-round decay rate of
    disagreement under repeated averaging. rho < 1 iff the graph is connected.
    """

    weights: np.ndarray
    rho: float

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]


def _contraction_factor(w: np.ndarray) -> float:
    n = w.shape[0]
    return float(np.linalg.norm(w - np.ones((n, n)) / n, ord=2))


def metropolis_weights(g: CommGraph) -> MixingMatrix:
    """Metropolis-Hastings weights: W_ij = 1/(1 + max(deg_i, deg_j)) on edges.

    Symmetric and doubly stochastic for any undirected graph, with a strictly
    positive diagonal. Disconnected graphs are rejected (rho would be 1).
    """
    if not g.is_connected():
        raise ValueError("mixing matrix requires a connected graph")
    n = g.n_agents
    w = np.zeros((n, n))
    deg = [g.degree(i) for i in range(n)]
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return MixingMatrix(w, _contraction_factor(w))


def uniform_weights(g: CommGraph) -> MixingMatrix:
    """W = (1/N) 11^T for the complete graph: exact averaging in one round."""
    n = g.n_agents
    if len(g.edges) != n * (n - 1) // 2:
        raise ValueError("uniform weights require the complete graph")
    w = np.full((n, n), 1.0 / n)
    return MixingMatrix(w, _contraction_factor(w))


def consensus_round(w: MixingMatrix, mu: np.ndarray) -> np.ndarray:
    """One round of local averaging: mu <- W mu. Preserves the mean."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (w.n_agents,):
        raise ValueError(f"expected vector of length {w.n_agents}, got shape {mu.shape}")
    return w.weights @ mu


def consensus_rounds(w: MixingMatrix, mu: np.ndarray, n_c: int) -> np.ndarray:
    """n_c rounds of averaging; disagreement shrinks by rho per round."""
    if n_c < 0:
        raise ValueError(f"n_c must be >= 0, got {n_c}")
    mu = np.asarray(mu, dtype=float)
    for _ in range(n_c):
        mu = consensus_round(w, mu)
    return mu


def disagreement(mu: np.ndarray) -> float:
    """Euclidean distance of mu from consensus on its own mean."""
    mu = np.asarray(mu, dtype=float)
    return float(np.linalg.norm(mu - mu.mean()))
