"""Exact scalar truncated-least-squares estimation by adaptive voting.

Solves

    min_s  sum_k min((s - s_k)^2 / alpha_k^2, c_bar^2)

exactly. The intervals [s_k - alpha_k*c_bar, s_k + alpha_k*c_bar] cut the
real line into at most 2K - 1 cells on which the consensus set (the set of
measurements whose residual is un-truncated) is constant; the optimum is
attained at the inverse-variance weighted mean of one of these consensus
sets. Enumerating cell midpoints therefore yields the global optimum in
O(K^2) time. A consensus-maximization variant returns the cell with the
largest consensus set instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyInput, InputError

# midpoints are scanned in blocks so that the K x K membership tables stay
# small for graph-sized inputs
_BLOCK = 2048


@dataclass(frozen=True)
class ScalarMeasurementSet:
    """Measurements s_k with per-measurement bounds alpha_k and threshold c_bar.

    A measurement k is an inlier of a candidate s when
    (s - s_k)^2 / alpha_k^2 <= c_bar^2. Construction permits K = 0 so that
    callers can build sets generically; the solvers raise EmptyInput.
    """

    values: NDArray[np.float64]
    alphas: NDArray[np.float64]
    c_bar: float = 1.0

    def __post_init__(self) -> None:
        values = np.atleast_1d(np.array(self.values, dtype=np.float64, copy=True))
        alphas = np.atleast_1d(np.array(self.alphas, dtype=np.float64, copy=True))
        if values.ndim != 1 or alphas.shape != values.shape:
            raise InputError(
                f"values/alphas must be equal-length vectors, got "
                f"{values.shape} vs {alphas.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("values contain non-finite entries")
        if not np.all(np.isfinite(alphas)) or np.any(alphas <= 0.0):
            raise InputError("alphas must be finite and > 0")
        if not np.isfinite(self.c_bar) or self.c_bar <= 0.0:
            raise InputError(f"c_bar must be finite and > 0, got {self.c_bar}")
        values.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "c_bar", float(self.c_bar))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ScalarTlsSolution:
    """Solver output: estimate, consensus index set, objective value.

    consensus holds exactly {k : (estimate - s_k)^2 / alpha_k^2 <= c_bar^2}
    (closed intervals) and cost is the full truncated objective at the
    estimate. n_boundaries counts the interval endpoints examined (2K).
    """

    estimate: float
    cost: float
    consensus: NDArray[np.int64]
    n_boundaries: int


def tls_cost(m: ScalarMeasurementSet, s: float) -> float:
    """Exact objective sum_k min((s - s_k)^2 / alpha_k^2, c_bar^2)."""
    r = ((s - m.values) / m.alphas) ** 2
    return float(np.minimum(r, m.c_bar**2).sum())


def _consensus_at(m: ScalarMeasurementSet, s: float) -> NDArray[np.int64]:
    half = m.alphas * m.c_bar
    return np.flatnonzero(np.abs(s - m.values) <= half).astype(np.int64)


def _midpoints(m: ScalarMeasurementSet) -> NDArray[np.float64]:
    half = m.alphas * m.c_bar
    bounds = np.concatenate([m.values - half, m.values + half])
    bounds.sort(kind="stable")
    return 0.5 * (bounds[:-1] + bounds[1:])


def solve_scalar_tls(m: ScalarMeasurementSet) -> ScalarTlsSolution:
    """Globally optimal truncated-least-squares estimate by adaptive voting.

    Ties between candidates of equal cost are broken toward the larger
    consensus set, then toward the smaller estimate, so the result is
    deterministic.
    """
    k = len(m)
    if k == 0:
        raise EmptyInput("solve_scalar_tls needs at least one measurement")
    half = m.alphas * m.c_bar
    w = 1.0 / m.alphas**2
    cb2 = m.c_bar**2
    mids = _midpoints(m)

    # running best as (cost, -consensus size, estimate); tuple order encodes
    # the tie rule
    best: tuple[float, float, float] | None = None
    for lo in range(0, mids.shape[0], _BLOCK):
        mb = mids[lo : lo + _BLOCK]
        member = np.abs(mb[:, None] - m.values[None, :]) <= half[None, :]
        wsum = member @ w
        ok = wsum > 0.0
        if not np.any(ok):
            continue
        est = (member @ (w * m.values))[ok] / wsum[ok]
        res = ((est[:, None] - m.values[None, :]) / m.alphas[None, :]) ** 2
        costs = np.minimum(res, cb2).sum(axis=1)
        cards = (res <= cb2).sum(axis=1)
        order = np.lexsort((est, -cards.astype(np.float64), costs))
        i = order[0]
        cand = (float(costs[i]), -float(cards[i]), float(est[i]))
        if best is None or cand < best:
            best = cand
    assert best is not None  # every measurement's own interval is non-empty
    cost, _, estimate = best
    return ScalarTlsSolution(
        estimate=estimate,
        cost=cost,
        consensus=_consensus_at(m, estimate),
        n_boundaries=2 * k,
    )


def solve_max_consensus(m: ScalarMeasurementSet) -> ScalarTlsSolution:
    """Midpoint maximizing the consensus set size (ties: smallest midpoint).

    Unlike solve_scalar_tls this optimizes cardinality, not the truncated
    objective; the two can disagree. The returned cost is still the exact
    objective at the chosen midpoint.
    """
    k = len(m)
    if k == 0:
        raise EmptyInput("solve_max_consensus needs at least one measurement")
    half = m.alphas * m.c_bar
    mids = _midpoints(m)
    best_card = -1
    best_mid = 0.0
    for lo in range(0, mids.shape[0], _BLOCK):
        mb = mids[lo : lo + _BLOCK]
        cards = (np.abs(mb[:, None] - m.values[None, :]) <= half[None, :]).sum(axis=1)
        i = int(np.argmax(cards))  # first max; mids ascend, so smallest wins
        if int(cards[i]) > best_card:
            best_card = int(cards[i])
            best_mid = float(mb[i])
    return ScalarTlsSolution(
        estimate=best_mid,
        cost=tls_cost(m, best_mid),
        consensus=_consensus_at(m, best_mid),
        n_boundaries=2 * k,
    )
