"""Sphere comparison: deciding whether two vertices share a community from
the edges that cross between their neighbourhood spheres.

The graph is split into a sparse part E (``split.g1``) and the rest
(``split.g2``). Spheres are taken in ``g2``; ``N_{r,r'}(v . v')`` counts the
ordered pairs (v1, v2) with v1 at distance r from v, v2 at distance r' from
v', and (v1, v2) an edge of E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .graph import Graph
from .model import SbmParams, SplitResult, graph_split
from .nonbacktracking import ResourceError

SPLIT_PROB = 0.1
SPHERE_NNZ_CAP = 50_000_000


def bfs_levels(g: Graph, v: int, depth: int) -> list[np.ndarray]:
    """Spheres ``[S_0(v), ..., S_depth(v)]`` (sorted vertex arrays)."""
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range")
    seen = np.zeros(g.n, dtype=bool)
    seen[v] = True
    levels = [np.array([v], dtype=np.int64)]
    for _ in range(depth):
        front = levels[-1]
        if front.size == 0:
            levels.append(front)
            continue
        starts, ends = g.indptr[front], g.indptr[front + 1]
        cnt = ends - starts
        idx = np.repeat(starts - (np.cumsum(cnt) - cnt), cnt) + np.arange(cnt.sum())
        nxt = np.unique(g.indices[idx])
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        levels.append(nxt)
    return levels


def sphere(g: Graph, v: int, r: int) -> np.ndarray:
    """Vertices at shortest-path distance exactly r from v."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return bfs_levels(g, v, r)[r]


def sphere_matrix(g: Graph, r: int, cap: int = SPHERE_NNZ_CAP) -> sp.csr_matrix:
    """0/1 matrix with ``[v, u] = 1`` iff dist(v, u) = r, for all v at once
    (breadth-first search in matrix form)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    eye = sp.identity(g.n, dtype=np.int8, format="csr")
    if r == 0:
        return eye
    a = g.adjacency(dtype=np.int8)
    reach_prev, reach = eye, ((eye + a) > 0).astype(np.int8)
    for _ in range(r - 1):
        nxt = ((reach + reach @ a) > 0).astype(np.int8)
        if nxt.nnz > cap:
            raise ResourceError(f"distance-{r} sphere matrix exceeds {cap} entries")
        reach_prev, reach = reach, nxt
    out = (reach - reach_prev).tocsr()
    out.eliminate_zeros()
    return out


# -- crossing-edge statistics --------------------------------------------

def _indicator(n, members):
    x = np.zeros(n)
    x[members] = 1.0
    return x


def cross_count(split: SplitResult, v: int, v2: int, r: int, r2: int) -> int:
    """``N_{r,r'}(v . v')``: ordered pairs (x, y), x in S_r(v), y in S_r'(v')
    in ``g2``, with (x, y) an edge of ``g1``."""
    g1, g2 = split.g1, split.g2
    a = _indicator(g2.n, sphere(g2, v, r))
    b = _indicator(g2.n, sphere(g2, v2, r2))
    return int(round(a @ (g1.adjacency() @ b)))


def sign_combination(n_r, n_r1, n_r2):
    """N_{r+2} N_r - N_{r+1}^2."""
    return n_r2 * n_r - n_r1 * n_r1


def sign_invariant(split: SplitResult, v: int, v2: int, r: int, r2: int) -> float:
    """``I_{r,r'} = N_{r+2,r'} N_{r,r'} - N_{r+1,r'}^2``."""
    counts = [cross_count(split, v, v2, s, r2) for s in (r, r + 1, r + 2)]
    return sign_combination(counts[0], counts[1], counts[2])


class _AnchorStats:
    """All counts N_{s,r'}(anchor . u) for s in ``depths`` and every u."""

    def __init__(self, split: SplitResult, r2: int):
        self.split = split
        self.a1 = split.g1.adjacency()
        self.s_r2 = sphere_matrix(split.g2, r2).astype(float)
        self.deg1 = split.g1.degrees.astype(float)
        self.vol1 = float(self.deg1.sum())
        self.vol_r2 = self.s_r2 @ self.deg1

    def counts(self, anchor: int, depths) -> dict:
        levels = bfs_levels(self.split.g2, anchor, max(depths))
        n = self.split.g2.n
        out = {}
        for s in depths:
            y = self.a1 @ _indicator(n, levels[s])
            out[s] = self.s_r2 @ y
        return out

    def invariant(self, anchor: int, r: int) -> np.ndarray:
        c = self.counts(anchor, (r, r + 1, r + 2))
        return sign_combination(c[r], c[r + 1], c[r + 2])

    def relative_count(self, anchor: int, r: int) -> np.ndarray:
        """N_{r,r'}(anchor . u) over its value vol1(X) vol1(Y) / vol1(V)
        when E joins the two spheres X, Y blindly, minus 1."""
        levels = bfs_levels(self.split.g2, anchor, r)
        n = self.split.g2.n
        row = self.s_r2 @ (self.a1 @ _indicator(n, levels[r]))
        expected = self.deg1[levels[r]].sum() * self.vol_r2 / max(self.vol1, 1.0)
        out = np.zeros(n)
        ok = expected > 0
        out[ok] = row[ok] / expected[ok] - 1
        return out


# -- algorithms ------------------------------------------------------------

@dataclass
class SphereOutcome:
    """Labeling, or ``ok=False`` with a reason when the algorithm declines."""

    labels: np.ndarray | None
    ok: bool
    reason: str = ""
    anchors: list = field(default_factory=list)
    r: int = 0
    r_prime: int = 0


def base_depth(n: int, d: float) -> int:
    """round(3/4 ln n / ln d), at least 1."""
    return max(1, int(round(0.75 * math.log(n) / math.log(d))))


def count_depths(r0: int, max_r2: int = 2):
    """Depths (r, r') with r + r' = 2 r0 and r' <= max_r2."""
    r2 = min(r0, max_r2)
    return 2 * r0 - r2, r2


def depth_pair(r0: int, max_r2: int = 2):
    """Depths (r, r') with r + r' = 2 r0 - 1 (odd) and r' <= max_r2.

    The sign-invariant statistic has a community-independent sign only when
    r + r' is odd; keeping r' small makes the all-vertices side cheap.
    """
    total = 2 * r0 - 1
    r2 = min(max_r2, total // 2)
    return total - r2, r2


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def consistent_groups(positive: np.ndarray):
    """Group items so that ``positive[i, j]`` holds exactly within groups.

    Unions every positive pair (either order), then verifies that each pair
    inside a group is positive in both orders and that no positive pair
    crosses groups. Returns the list of groups or None on a contradiction.
    """
    k = positive.shape[0]
    uf = _UnionFind(k)
    for i in range(k):
        for j in range(k):
            if i != j and positive[i, j]:
                uf.union(i, j)
    root = [uf.find(i) for i in range(k)]
    for i in range(k):
        for j in range(k):
            if i != j and positive[i, j] != (root[i] == root[j]):
                return None
    groups: dict[int, list[int]] = {}
    for i, ri in enumerate(root):
        groups.setdefault(ri, []).append(i)
    return list(groups.values())


STATISTICS = ("invariant", "count")


def agnostic_sphere_compare(g: Graph, delta: float, seed=0, split_prob: float = SPLIT_PROB,
                            max_r2: int = 2, statistic: str = "invariant") -> SphereOutcome:
    """Agnostic sphere comparison; needs only a lower bound ``delta`` on the
    smallest community proportion.

    1. Split with probability 1/10; depths from d = 2|E|/n.
    2. Draw ceil(k_max ln(4 k_max)) anchors, k_max = 1/delta.
    3. Group anchors by the sign of the pairwise statistic I (averaged over
       the two orders of each pair when r != r'); decline when no grouping
       reproduces every sign; pick one anchor per group.
    4. Each vertex joins the group whose anchor gives the largest I.

    ``statistic="count"`` replaces I by the volume-normalized crossing count
    N vol1(V) / (vol1(S_r(v)) vol1(S_r'(v'))) - 1 at depths with
    r + r' = 2 r0 (r' capped at ``max_r2``). It needs no model parameters
    either, but its sign is only meaningful for assortative models, whereas
    I is sign-invariant when r + r' is odd.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}")
    n = g.n
    d = g.average_degree() if n else 0.0
    if d <= 1:
        return SphereOutcome(None, False, f"average degree {d:.3g} <= 1")
    r0 = base_depth(n, d)
    if statistic == "invariant":
        r, r2 = depth_pair(r0, max_r2)
    else:
        r, r2 = count_depths(r0, max_r2)
    split = graph_split(g, split_prob, rngmod.child_seed(seed, "sphere-split"))
    gen = rngmod.stream(seed, "sphere-anchors")
    k_max = 1.0 / delta
    count = min(n, math.ceil(k_max * math.log(4 * k_max)))
    anchors = [int(a) for a in gen.choice(n, size=count, replace=False)]
    stats = _AnchorStats(split, r2)
    score = stats.invariant if statistic == "invariant" else stats.relative_count
    inv = np.vstack([score(a, r) for a in anchors])
    pair = inv[:, anchors]
    if r != r2:
        # the two orders of an anchor pair use different depths; average them
        pair = (pair + pair.T) / 2
    positive = pair > 0
    groups = consistent_groups(positive)
    if groups is None:
        return SphereOutcome(None, False, "anchor signs admit no consistent assignment",
                             anchors, r, r2)
    reps = [group[int(gen.integers(len(group)))] for group in groups]
    labels = np.argmax(inv[reps], axis=0).astype(np.int64) + 1
    return SphereOutcome(labels, True, "", [anchors[i] for i in reps], r, r2)


def sphere_compare_known(g: Graph, params: SbmParams, seed=0, split_prob: float = SPLIT_PROB,
                         max_r2: int = 2, max_tries: int = 50) -> SphereOutcome:
    """Sphere comparison with known symmetric-model parameters.

    The crossing count N_{r,r'}(anchor . u) is divided by its value when E
    joins the two spheres blindly (vol1(X) vol1(Y) / vol1(V)); the model
    predicts a ratio of about 1 + (k-1) rho within a community and 1 - rho
    across, rho = ((a-b)/(k d))^{r+r'+1}. Anchors are accepted one at a
    time when their ratio to every earlier anchor is below the midpoint,
    up to k of them; vertices go to the anchor with the highest ratio.
    """
    if params.regime != "constant":
        raise ValueError("sphere comparison expects the constant-degree regime")
    k = params.k
    a = float(params.q[0, 0])
    b = float(params.q[0, 1]) if k > 1 else 0.0
    d = g.average_degree() if g.n else 0.0
    if d <= 1:
        return SphereOutcome(None, False, f"average degree {d:.3g} <= 1")
    r, r2 = count_depths(base_depth(g.n, d), max_r2)
    model_d = (a + (k - 1) * b) / k
    rho = ((a - b) / (k * model_d)) ** (r + r2 + 1) if model_d > 0 else 0.0
    threshold = (1 + (k - 1) * rho + 1 - rho) / 2 - 1
    split = graph_split(g, split_prob, rngmod.child_seed(seed, "sphere-split"))
    stats = _AnchorStats(split, r2)
    gen = rngmod.stream(seed, "sphere-anchors")
    anchors, rows = [], []
    for cand in gen.permutation(g.n)[:max_tries]:
        row = stats.relative_count(int(cand), r)
        if not row.any():
            continue
        if all(prev[cand] < threshold for prev in rows):
            anchors.append(int(cand))
            rows.append(row)
        if len(anchors) == k:
            break
    if not anchors:
        return SphereOutcome(None, False, "no anchor with crossing edges", [], r, r2)
    labels = np.argmax(np.vstack(rows), axis=0).astype(np.int64) + 1
    return SphereOutcome(labels, True, "", anchors, r, r2)
