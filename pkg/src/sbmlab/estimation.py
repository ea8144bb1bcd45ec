"""Parameter estimation for the two-community symmetric SBM from cycle counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .nonbacktracking import build_nb_operator

MIN_CYCLE, MAX_CYCLE = 3, 8


class EstimationFailure(ArithmeticError):
    """The moment equations have no real solution at this sample."""


def _check_m(m):
    if not MIN_CYCLE <= m <= MAX_CYCLE:
        raise ValueError(f"cycle length {m} outside [{MIN_CYCLE}, {MAX_CYCLE}]")


def count_cycles_exact(g: Graph, m: int) -> int:
    """Number of m-cycles (as subgraphs).

    Each cycle is found once: rooted at its smallest vertex, walked only
    through larger vertices, and kept in the direction whose second vertex
    is smaller than its last.
    """
    _check_m(m)
    adj = [g.neighbors(v).tolist() for v in range(g.n)]
    total = 0
    for root in range(g.n):
        nb_root = adj[root]
        if len(nb_root) < 2:
            continue
        closing = set(nb_root)
        path = [root]
        on_path = {root}

        def extend():
            nonlocal total
            last = path[-1]
            if len(path) == m:
                if last in closing and path[1] < last:
                    total += 1
                return
            for w in adj[last]:
                if w > root and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    extend()
                    path.pop()
                    on_path.discard(w)

        extend()
    return total


def closed_nb_walks(g: Graph, m: int) -> int:
    """Trace of B^m: closed nonbacktracking walks of length m."""
    if g.num_edges == 0:
        return 0
    b = build_nb_operator(g, 2).to_sparse().tocsr()
    power = b.copy()
    for _ in range(m - 1):
        power = power @ b
    return int(round(power.diagonal().sum()))


def count_cycles(g: Graph, m: int, method: str = "exact-dfs") -> int:
    """m-cycle count. ``method="nb-closed-walk"`` approximates it by
    tr(B^m) / 2m, which is exact for m <= 5 and whenever distinct short
    cycles do not share vertices."""
    _check_m(m)
    if method == "exact-dfs":
        return count_cycles_exact(g, m)
    if method == "nb-closed-walk":
        return closed_nb_walks(g, m) // (2 * m)
    raise ValueError(f"unknown method {method!r}")


def default_cycle_length(n: int) -> int:
    """floor(log(n)^(1/4)), raised to 3 (it is 2 at every practical n)."""
    return max(MIN_CYCLE, int(math.floor(math.log(n) ** 0.25)))


def trace_moment_estimates(g: Graph, m_list, method: str = "exact-dfs"):
    """``[(m, 2 m C_m)]``, each an estimate of tr((diag(p) Q)^m)."""
    return [(m, 2 * m * count_cycles(g, m, method)) for m in m_list]


@dataclass(frozen=True)
class SsbmEstimate:
    d_hat: float
    f_hat: float
    a_hat: float
    b_hat: float
    m: int
    cycles: int


def estimate_ssbm_2(g: Graph, m: int | None = None, method: str = "exact-dfs") -> SsbmEstimate:
    """Estimate (a, b) of SSBM(n, 2, a/n, b/n).

    d = 2|E|/n and f = (2 m C_m - d^m)^(1/m); a = d + f and b = d - f.
    Raises ``EstimationFailure`` when the radicand is negative.
    """
    if g.n < 2:
        raise ValueError("graph too small")
    m = m or default_cycle_length(g.n)
    d_hat = g.average_degree()
    cm = count_cycles(g, m, method)
    radicand = 2 * m * cm - d_hat ** m
    if radicand < 0:
        raise EstimationFailure(
            f"2*{m}*C_{m} - d^{m} = {radicand:.4g} < 0: no cycle excess over Erdos-Renyi")
    f_hat = radicand ** (1.0 / m)
    return SsbmEstimate(d_hat, f_hat, d_hat + f_hat, d_hat - f_hat, m, cm)
