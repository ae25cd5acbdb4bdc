"""Pairwise measurement graph over a correspondence set.

Differencing correspondences along graph edges cancels the translation:
for an edge (i, j) the pair a_bar = a_j - a_i, b_bar = b_j - b_i satisfies
b_bar = s * R @ a_bar + noise, with noise bounded by beta_i + beta_j.
Taking norms additionally cancels the rotation, leaving the scalar ratio
trim = ||b_bar|| / ||a_bar|| = s + bounded noise with per-edge bound
alpha = (beta_i + beta_j) / ||a_bar||. These per-edge quantities feed the
scale voting, pruning, and rotation stages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TypeAlias, Union

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateEdge, EmptyGraph, InputError
from .geometry import CorrespondenceSet, _freeze

# edges whose source segment is shorter than this are degenerate: the
# ratio and its noise bound would divide by (nearly) zero
DEGENERATE_NORM_TOL = 1e-12


@dataclass(frozen=True)
class Complete:
    """All N(N-1)/2 pairs."""

    def edge_list(self, n: int) -> NDArray[np.int64]:
        if n < 2:
            raise InputError(f"complete topology needs N >= 2, got {n}")
        i, j = np.triu_indices(n, k=1)
        return np.column_stack([i, j]).astype(np.int64)


@dataclass(frozen=True)
class Chain:
    """Consecutive pairs (0,1), (1,2), ..., (N-2, N-1)."""

    def edge_list(self, n: int) -> NDArray[np.int64]:
        if n < 2:
            raise InputError(f"chain topology needs N >= 2, got {n}")
        idx = np.arange(n - 1, dtype=np.int64)
        return np.column_stack([idx, idx + 1])


@dataclass(frozen=True)
class RandomK:
    """Seeded random graph with average degree ~ degree, kept connected.

    A chain is laid down first so the graph is always connected, then
    uniformly random extra pairs are added until ceil(N * degree / 2)
    distinct edges exist (clipped to the complete-graph count).
    """

    degree: int
    seed: int = 0

    def edge_list(self, n: int) -> NDArray[np.int64]:
        if not 1 <= self.degree < n:
            raise InputError(f"RandomK degree must be in [1, N), got {self.degree}")
        target = int(np.ceil(n * self.degree / 2.0))
        target = min(max(target, n - 1), n * (n - 1) // 2)
        edges = {(i, i + 1) for i in range(n - 1)}
        rng = np.random.default_rng(self.seed)
        while len(edges) < target:
            m = 2 * (target - len(edges)) + 8
            ii = rng.integers(0, n, size=m)
            jj = rng.integers(0, n, size=m)
            for i, j in zip(np.minimum(ii, jj), np.maximum(ii, jj)):
                if i != j:
                    edges.add((int(i), int(j)))
                    if len(edges) == target:
                        break
        return np.array(sorted(edges), dtype=np.int64)


GraphTopology: TypeAlias = Union[Complete, Chain, RandomK]


@dataclass(frozen=True)
class TimGraph:
    """Edge-indexed pairwise measurements.

    edges holds (i, j) with i < j; a_bar[e] = a_j - a_i and
    b_bar[e] = b_j - b_i; beta_edge[e] = beta_i + beta_j;
    trim[e] = ||b_bar|| / ||a_bar||; alpha[e] = beta_edge / ||a_bar||.
    n_dropped counts edges removed as degenerate during construction.
    point_ids maps local vertex indices back to the indices of an original
    graph when this graph is a restriction (None for a freshly built one).
    """

    n_points: int
    edges: NDArray[np.int64]
    a_bar: NDArray[np.float64]
    b_bar: NDArray[np.float64]
    beta_edge: NDArray[np.float64]
    trim: NDArray[np.float64]
    alpha: NDArray[np.float64]
    n_dropped: int = 0
    point_ids: NDArray[np.int64] | None = None

    def __post_init__(self) -> None:
        e = self.edges.shape[0]
        if self.edges.shape != (e, 2):
            raise InputError("edges must have shape (E, 2)")
        if e == 0:
            raise EmptyGraph("a measurement graph needs at least one edge")
        if np.any(self.edges[:, 0] >= self.edges[:, 1]):
            raise InputError("edges must satisfy i < j")
        if np.any(self.edges < 0) or np.any(self.edges >= self.n_points):
            raise InputError("edge endpoints out of range")
        for name in ("edges", "a_bar", "b_bar", "beta_edge", "trim", "alpha"):
            _freeze(getattr(self, name))

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


def build_tim_graph(
    c: CorrespondenceSet,
    topology: GraphTopology = Complete(),
    degenerate_edge_policy: str = "drop",
) -> TimGraph:
    """Build the pairwise measurement graph for a topology.

    degenerate_edge_policy controls edges with ||a_j - a_i|| below
    DEGENERATE_NORM_TOL: "drop" removes them (counted in n_dropped),
    "error" raises DegenerateEdge. EmptyGraph is raised when nothing
    survives.
    """
    if degenerate_edge_policy not in ("drop", "error"):
        raise InputError(
            f"degenerate_edge_policy must be 'drop' or 'error', "
            f"got {degenerate_edge_policy!r}"
        )
    n = len(c)
    edges = topology.edge_list(n)
    i, j = edges[:, 0], edges[:, 1]
    a_bar = c.source[j] - c.source[i]
    b_bar = c.target[j] - c.target[i]
    norm_a = np.linalg.norm(a_bar, axis=1)
    bad = norm_a < DEGENERATE_NORM_TOL
    if np.any(bad):
        if degenerate_edge_policy == "error":
            e = int(np.flatnonzero(bad)[0])
            raise DegenerateEdge(
                f"edge ({edges[e, 0]}, {edges[e, 1]}): coincident source points"
            )
        keep = ~bad
        edges, a_bar, b_bar, norm_a = edges[keep], a_bar[keep], b_bar[keep], norm_a[keep]
        i, j = edges[:, 0], edges[:, 1]
    n_dropped = int(bad.sum())
    if edges.shape[0] == 0:
        raise EmptyGraph("all edges dropped as degenerate")
    beta_edge = c.betas[i] + c.betas[j]
    norm_b = np.linalg.norm(b_bar, axis=1)
    return TimGraph(
        n_points=n,
        edges=edges,
        a_bar=a_bar,
        b_bar=b_bar,
        beta_edge=beta_edge,
        trim=norm_b / norm_a,
        alpha=beta_edge / norm_a,
        n_dropped=n_dropped,
    )


def incidence_matrix(g: TimGraph) -> NDArray[np.float64]:
    """Dense |E| x N matrix with -1 at column i and +1 at column j per edge.

    Every row sums to zero, which is exactly why edge differences cancel a
    global translation of the points.
    """
    a = np.zeros((g.n_edges, g.n_points))
    rows = np.arange(g.n_edges)
    a[rows, g.edges[:, 0]] = -1.0
    a[rows, g.edges[:, 1]] = 1.0
    return a
