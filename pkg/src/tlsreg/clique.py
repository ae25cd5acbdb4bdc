"""Outlier pruning via maximum clique on the scale-consistent graph.

Edges whose scalar ratio disagrees with the estimated scale are removed;
inlier correspondences remain mutually consistent, so they form a clique
in what is left. Selecting the maximum clique (the largest maximal clique)
therefore isolates a near-outlier-free subset. The search is an exact
branch-and-bound over vertex bitsets with a greedy-coloring bound; when an
expansion budget is exhausted it falls back to a seeded greedy heuristic
and says so in the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numpy.typing import NDArray

from .errors import CliqueTooSmall, InputError
from .geometry import _freeze
from .tim_graph import TimGraph


@dataclass(frozen=True)
class PrunedGraph:
    """Scale-consistent subgraph: surviving edges plus bitset adjacency.

    edge_index maps each surviving edge back to its row in the source
    TimGraph arrays. adjacency[v] is an int bitmask of the neighbors of v.
    """

    n_points: int
    edges: NDArray[np.int64]
    edge_index: NDArray[np.int64]
    adjacency: tuple[int, ...]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True)
class CliqueResult:
    """vertices (sorted), the induced edge pairs, and how they were found.

    method is "exact" when the branch-and-bound finished within budget
    (result is a true maximum clique, lexicographically smallest among
    ties) and "greedy" when the heuristic fallback produced it.
    """

    vertices: NDArray[np.int64]
    clique_edges: NDArray[np.int64]
    method: str
    n_expansions: int

    def __len__(self) -> int:
        return self.vertices.shape[0]


def prune_by_scale(g: TimGraph, s_hat: float, c_bar_sq: float) -> PrunedGraph:
    """Keep exactly the edges with (trim - s_hat)^2 <= c_bar_sq * alpha^2."""
    if not np.isfinite(s_hat):
        raise InputError(f"s_hat must be finite, got {s_hat}")
    if not np.isfinite(c_bar_sq) or c_bar_sq <= 0.0:
        raise InputError(f"c_bar_sq must be finite and > 0, got {c_bar_sq}")
    keep = (g.trim - s_hat) ** 2 <= c_bar_sq * g.alpha**2
    edge_index = np.flatnonzero(keep).astype(np.int64)
    edges = g.edges[keep]
    adj = [0] * g.n_points
    for i, j in edges:
        adj[i] |= 1 << int(j)
        adj[j] |= 1 << int(i)
    return PrunedGraph(
        n_points=g.n_points,
        edges=_freeze(edges.copy()),
        edge_index=_freeze(edge_index),
        adjacency=tuple(adj),
    )


class _BudgetExceeded(Exception):
    pass


class _Search:
    """Bitset branch-and-bound with a greedy-coloring upper bound."""

    def __init__(self, adjacency: tuple[int, ...], budget: int):
        self.adj = adjacency
        self.n = len(adjacency)
        self.budget = budget
        self.expansions = 0
        self.best: list[int] = []

    def _charge(self) -> None:
        self.expansions += 1
        if self.expansions > self.budget:
            raise _BudgetExceeded

    def _color_order(self, cand: int) -> tuple[list[int], list[int]]:
        """Greedy coloring of the candidate set.

        Returns candidate vertices in color order plus their color numbers;
        a clique inside cand can use at most max(color) vertices, which is
        the pruning bound.
        """
        order: list[int] = []
        bounds: list[int] = []
        color = 0
        rest = cand
        while rest:
            color += 1
            avail = rest
            while avail:
                v = (avail & -avail).bit_length() - 1
                avail &= ~self.adj[v]  # neighbors of v cannot share its color
                avail &= ~(1 << v)
                rest &= ~(1 << v)
                order.append(v)
                bounds.append(color)
        return order, bounds

    def _expand(self, cand: int, current: list[int]) -> None:
        order, bounds = self._color_order(cand)
        for idx in range(len(order) - 1, -1, -1):
            if len(current) + bounds[idx] <= len(self.best):
                return
            self._charge()
            v = order[idx]
            current.append(v)
            nxt = cand & self.adj[v]
            if nxt:
                self._expand(nxt, current)
            elif len(current) > len(self.best):
                self.best = list(current)
            current.pop()
            cand &= ~(1 << v)

    def max_clique_size(self) -> int:
        self.best = []
        full = (1 << self.n) - 1
        self._expand(full, [])
        return len(self.best)

    def _exists(self, cand: int, need: int) -> bool:
        """True iff cand contains a clique of size >= need."""
        if need <= 0:
            return True
        if cand.bit_count() < need:
            return False
        order, bounds = self._color_order(cand)
        if bounds[-1] < need:
            return False
        for idx in range(len(order) - 1, -1, -1):
            if bounds[idx] < need:
                return False
            self._charge()
            v = order[idx]
            if self._exists(cand & self.adj[v], need - 1):
                return True
            cand &= ~(1 << v)
        return False

    def lexicographic_max_clique(self) -> list[int]:
        """Lexicographically smallest vertex set among all maximum cliques."""
        size = self.max_clique_size()
        out: list[int] = []
        cand = (1 << self.n) - 1
        need = size
        for v in range(self.n):
            if need == 0:
                break
            if not (cand >> v) & 1:
                continue
            rest = cand & self.adj[v]
            if self._exists(rest, need - 1):
                out.append(v)
                cand = rest
                need -= 1
        return out


def _greedy_clique(adjacency: tuple[int, ...], seed: int, restarts: int = 32) -> list[int]:
    """Seeded multi-start greedy heuristic used when the budget runs out."""
    n = len(adjacency)
    degrees = np.array([a.bit_count() for a in adjacency])
    rng = np.random.default_rng(seed)
    best: list[int] = []
    for trial in range(restarts):
        if trial == 0:
            order = np.lexsort((np.arange(n), -degrees))
        else:
            order = rng.permutation(n)
        mask = (1 << n) - 1
        clique: list[int] = []
        for v in order:
            v = int(v)
            if (mask >> v) & 1:
                clique.append(v)
                mask &= adjacency[v]
        clique.sort()
        if len(clique) > len(best) or (len(clique) == len(best) and clique < best):
            best = clique
    return best


def max_clique(g: PrunedGraph, budget: int = 10_000_000, seed: int = 0) -> CliqueResult:
    """Maximum clique of the pruned graph.

    Exact (with deterministic lexicographic tie-breaking) while the
    branch-and-bound stays within `budget` node expansions; otherwise the
    seeded greedy heuristic result is returned with method="greedy".
    """
    if g.n_points < 1:
        raise InputError("graph has no vertices")
    search = _Search(g.adjacency, budget)
    try:
        vertices = search.lexicographic_max_clique()
        method = "exact"
    except _BudgetExceeded:
        vertices = _greedy_clique(g.adjacency, seed)
        method = "greedy"
    vertices = sorted(vertices)
    pairs = [
        (i, j)
        for i, j in combinations(vertices, 2)
        if (g.adjacency[i] >> j) & 1
    ]
    clique_edges = (
        np.array(pairs, dtype=np.int64) if pairs else np.empty((0, 2), dtype=np.int64)
    )
    return CliqueResult(
        vertices=_freeze(np.array(vertices, dtype=np.int64)),
        clique_edges=_freeze(clique_edges),
        method=method,
        n_expansions=search.expansions,
    )


def restrict_graph(g: TimGraph, clique: CliqueResult) -> TimGraph:
    """Induced sub-graph on the clique vertices, indices remapped.

    Keeps exactly the clique's surviving edges; point_ids records the map
    from new local indices back to the original vertex indices.
    """
    if len(clique) < 2:
        raise CliqueTooSmall(
            f"clique has {len(clique)} vertex(es); need >= 2 to keep any edge"
        )
    row_of = {(int(i), int(j)): e for e, (i, j) in enumerate(g.edges)}
    rows = []
    for i, j in clique.clique_edges:
        key = (int(i), int(j))
        if key not in row_of:
            raise InputError(f"clique edge {key} is not an edge of the graph")
        rows.append(row_of[key])
    rows = np.array(sorted(rows), dtype=np.int64)
    new_id = {int(v): k for k, v in enumerate(clique.vertices)}
    edges = np.array(
        [[new_id[int(i)], new_id[int(j)]] for i, j in g.edges[rows]], dtype=np.int64
    )
    return TimGraph(
        n_points=len(clique),
        edges=edges,
        a_bar=g.a_bar[rows].copy(),
        b_bar=g.b_bar[rows].copy(),
        beta_edge=g.beta_edge[rows].copy(),
        trim=g.trim[rows].copy(),
        alpha=g.alpha[rows].copy(),
        n_dropped=g.n_dropped,
        point_ids=_freeze(clique.vertices.copy()),
    )
