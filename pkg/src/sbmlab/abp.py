"""ABP*: linearized belief propagation on directed edges with short-cycle
compensation and bias cancellation.

Messages live on directed edges, indexed as in ``Graph`` (CSR position of
``(v, v')``). One update sends

    y[v, v'] <- sum_{v'' ~ v', v'' != v} z[v', v'']

minus, for every cycle of length r' <= r through consecutive vertices
(v''', v, v'), the messages that left v r' steps earlier towards vertices
other than v' and v'''. Without short cycles this is one application of the
nonbacktracking matrix to z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.cluster.vq import kmeans2

from . import rng as rngmod
from .graph import Graph
from .metrics import partition_to_labels
from .nonbacktracking import build_nb_operator
from .spectral import DegenerateGraphError, default_power_steps

BIAS_MODES = ("center", "matrix")


@dataclass(frozen=True)
class CycleIndex:
    """One entry per (directed edge (v, v'), cycle of length <= r through it).

    ``closing`` is the edge (v, v''') to the other cycle neighbour of v and
    ``back`` its reverse (v''', v). An edge on several cycles has several
    entries, so summing over entries applies the adjustment once per cycle.
    """

    edge: np.ndarray
    closing: np.ndarray
    back: np.ndarray
    length: np.ndarray

    @property
    def size(self) -> int:
        return int(self.edge.size)


def _edge_ids(g: Graph, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """CSR ids of directed edges (u, v); -1 where absent."""
    keys = g.tails * g.n + g.indices          # ascending by construction
    want = u * g.n + v
    pos = np.searchsorted(keys, want)
    pos_c = np.minimum(pos, max(keys.size - 1, 0))
    found = (pos < keys.size) & (keys[pos_c] == want) if keys.size else np.zeros(want.size, bool)
    return np.where(found, pos_c, -1)


def cycle_index(g: Graph, r: int) -> CycleIndex:
    """All cycles of length 3..r, listed per directed edge.

    A cycle of length L through consecutive (v''', v, v') is the same thing
    as a simple path (v, v', ..., v''') on L vertices whose end is adjacent
    to v, and those paths are exactly the closed states of the order-L
    nonbacktracking operator.
    """
    empty = np.empty(0, dtype=np.int64)
    if r < 3 or g.num_edges == 0:
        return CycleIndex(empty, empty, empty, empty)
    levels = build_nb_operator(g, r).levels
    parts = []
    for length in range(3, r + 1):
        paths = levels[length - 1].paths
        first, second, last = paths[:, 0], paths[:, 1], paths[:, -1]
        closing = _edge_ids(g, first, last)
        ok = closing >= 0
        if not ok.any():
            continue
        edge = _edge_ids(g, first[ok], second[ok])
        back = g.reverse[closing[ok]]
        parts.append((edge, closing[ok], back, np.full(edge.size, length)))
    if not parts:
        return CycleIndex(empty, empty, empty, empty)
    cols = [np.concatenate(c).astype(np.int64) for c in zip(*parts)]
    return CycleIndex(*cols)


def _tail_sums(g: Graph, y: np.ndarray) -> np.ndarray:
    return np.bincount(g.tails, weights=y, minlength=g.n)


def abp_messages(g: Graph, m: int, r: int = 2, bias_mode: str = "center", seed=0,
                 init=None, cycles: CycleIndex | None = None):
    """Yield ``(t, y_t, z_{t-1}, scale_t)`` for t = 1..m.

    After every update the messages are divided by their norm ``scale_t``
    and the stored history with them, so each ``y_t`` equals the true
    iterate divided by the product of the scales so far. At t = 1,
    ``z`` is None and the scale is 1.
    """
    if bias_mode not in BIAS_MODES:
        raise ValueError(f"unknown bias mode {bias_mode!r}")
    cycles = cycle_index(g, r) if cycles is None else cycles
    heads, rev = g.indices, g.reverse
    if init is None:
        y = rngmod.stream(seed, "abp").standard_normal(g.num_directed)
    else:
        y = np.asarray(init, dtype=float).copy()
        if y.shape != (g.num_directed,):
            raise ValueError("initial vector must have one entry per directed edge")
    yield 1, y, None, 1.0
    hist: dict[int, np.ndarray] = {}
    z1 = None
    v_of = g.tails[cycles.edge]
    for t in range(2, m + 1):
        z = y - y.mean() if bias_mode == "center" else y
        hist[t - 1] = z
        if t == 2:
            z1 = z
        new = _tail_sums(g, z)[heads] - z[rev]
        if cycles.size:
            corr = np.zeros(cycles.size)
            at = cycles.length == t
            corr[at] = z1[cycles.back[at]]
            for length in np.unique(cycles.length[cycles.length < t]):
                sel = cycles.length == length
                zs = hist[t - int(length)]
                corr[sel] = (_tail_sums(g, zs)[v_of[sel]] - zs[cycles.edge[sel]]
                             - zs[cycles.closing[sel]])
            new -= np.bincount(cycles.edge, weights=corr, minlength=new.size)
        scale = float(np.linalg.norm(new))
        if scale == 0 or not math.isfinite(scale):
            scale = 1.0
        new = new / scale
        hist = {s: h / scale for s, h in hist.items() if s >= t + 1 - max(r, 2)}
        z1 = z1 / scale
        y = new
        yield t, y, z, scale


class AbpResult(NamedTuple):
    partition: np.ndarray
    scores: np.ndarray


def abp_star(g: Graph, m: int | None = None, r: int = 2, bias_mode: str = "center", seed=0,
             m_prime: int = 2, lambda1: float | None = None, init=None,
             snr: float | None = None) -> AbpResult:
    """Run ABP* for m iterations and split by the sign of y'_v = sum_v' y_{v,v'}.

    ``bias_mode="center"`` subtracts the mean message before every update.
    ``bias_mode="matrix"`` skips centering and returns
    y' = Y M^{m'} e_m = sum_j C(m', j) (-lambda_1)^j Y[:, m - j], where Y
    holds the per-vertex sums of every iterate and lambda_1 defaults to the
    average degree.
    """
    if g.num_edges == 0:
        raise DegenerateGraphError("graph has no edges")
    m = default_power_steps(g.n, snr, extra=3) if m is None else int(m)
    if m < 2 or r < 2:
        raise ValueError(f"need m >= 2 and r >= 2, got m={m}, r={r}")
    if bias_mode == "matrix" and not 1 <= m_prime < m:
        raise ValueError(f"need 1 <= m_prime < m, got m_prime={m_prime}")
    keep = m_prime + 1 if bias_mode == "matrix" else 1
    cols, log_scale = [], [0.0]
    for item in abp_messages(g, m, r, bias_mode, seed, init):
        t, y, _, scale = item
        if t > 1:
            log_scale.append(log_scale[-1] + math.log(scale))
        if t > m - keep:
            cols.append((t, _tail_sums(g, y)))
    if bias_mode == "center":
        scores = cols[-1][1]
    else:
        lam = g.average_degree() if lambda1 is None else float(lambda1)
        scores = np.zeros(g.n)
        for t, col in cols:
            j = m - t
            rel = math.exp(log_scale[t - 1] - log_scale[m - 1])
            scores += math.comb(m_prime, j) * (-lam) ** j * col * rel
    return AbpResult(scores > 0, scores)


def abp_multiclass_seed(g: Graph, m: int | None = None, r: int = 2, seed_count: int = 4, k: int = 2,
                        seed=0, snr: float | None = None, restarts: int = 10) -> np.ndarray:
    """k-way labeling from repeated ABP* runs.

    For k = 2 this is the ABP* split (S gets label 1). Otherwise the score
    vectors of ``seed_count`` independently initialized runs (each a random
    direction in the informative eigenspace) are standardized and clustered
    into k groups by k-means, keeping the best of ``restarts`` runs.
    """
    if seed_count < 1:
        raise ValueError("seed_count must be >= 1")
    if k < 2:
        return np.ones(g.n, dtype=np.int64)
    if k == 2:
        return partition_to_labels(abp_star(g, m, r, seed=seed, snr=snr).partition)
    feats = []
    for i in range(seed_count):
        scores = abp_star(g, m, r, seed=rngmod.child_seed(seed, "abp-multi", i), snr=snr).scores
        sd = scores.std()
        feats.append(scores / sd if sd > 0 else scores)
    x = np.column_stack(feats)
    gen = rngmod.stream(seed, "kmeans")
    best, best_cost = None, np.inf
    for _ in range(restarts):
        centers, labels = kmeans2(x, k, minit="++", seed=gen)
        cost = float(((x - centers[labels]) ** 2).sum())
        if cost < best_cost:
            best, best_cost = labels, cost
    return best.astype(np.int64) + 1
