"""Matrix-free r-nonbacktracking operators.

States of the order-r operator are directed paths on r distinct vertices
(directed edges when r = 2). Entry ``(e, f)`` is 1 when ``f`` drops the first
vertex of ``e`` and appends a new one that differs from ``e``'s first vertex.
Walks generated this way have every r+1 consecutive vertices distinct.

States are built level by level: level 1 holds vertices, level j+1 holds
pairs (level-j state, next vertex). Sorting each level by that pair makes
the successors of a state a contiguous block, so ``B @ y`` is a grouped sum
followed by one correction term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .graph import Graph

DEFAULT_STATE_CAP = 10_000_000


class ResourceError(RuntimeError):
    pass


@dataclass(eq=False)
class _Level:
    keys: np.ndarray      # prefix_id * n + last vertex, ascending
    prefix: np.ndarray    # id of the state in the previous level
    suffix: np.ndarray    # id (previous level) of the path minus its first vertex
    paths: np.ndarray     # (states, j) vertex sequences


def _next_level(g: Graph, prev: _Level, prev_prev_keys, cap: int) -> _Level:
    n = g.n
    last = prev.paths[:, -1]
    deg = g.degrees[last]
    if deg.sum() > 4 * cap:
        raise ResourceError(f"more than {cap} nonbacktracking states")
    src = np.repeat(np.arange(prev.paths.shape[0], dtype=np.int64), deg)
    starts = np.repeat(g.indptr[last] - (np.cumsum(deg) - deg), deg)
    w = g.indices[np.arange(src.size) + starts]
    ok = np.ones(src.size, dtype=bool)
    for col in range(prev.paths.shape[1]):
        ok &= prev.paths[src, col] != w
    src, w = src[ok], w[ok]
    if src.size > cap:
        raise ResourceError(f"{src.size} nonbacktracking states exceed the cap of {cap}")
    paths = np.column_stack([prev.paths[src], w])
    keys = src * n + w
    if prev_prev_keys is None:
        suffix = w.copy()
    else:
        # (suffix of the prefix) + w is itself a state of the previous level
        suffix = np.searchsorted(prev.keys, prev.suffix[src] * n + w)
    return _Level(keys, src, suffix, paths.astype(np.int64))


@dataclass(eq=False)
class NbOperator:
    """The order-r nonbacktracking matrix of ``graph`` as a linear operator."""

    graph: Graph
    r: int
    levels: list = field(repr=False)
    back: np.ndarray = field(repr=False)

    @property
    def top(self) -> _Level:
        return self.levels[-1]

    @property
    def num_states(self) -> int:
        return int(self.top.keys.size)

    @property
    def shape(self):
        return (self.num_states, self.num_states)

    @property
    def first(self) -> np.ndarray:
        return self.top.paths[:, 0]

    @property
    def last(self) -> np.ndarray:
        return self.top.paths[:, -1]

    def state_id(self, path) -> int:
        """Index of a vertex tuple; ``KeyError`` if it is not a state."""
        path = [int(v) for v in path]
        if len(path) != self.r:
            raise KeyError(tuple(path))
        n = self.graph.n
        sid = path[0]
        for lvl, v in zip(self.levels[1:], path[1:]):
            key = sid * n + v
            i = int(np.searchsorted(lvl.keys, key))
            if i >= lvl.keys.size or lvl.keys[i] != key:
                raise KeyError(tuple(path))
            sid = i
        return sid

    def apply(self, y: np.ndarray) -> np.ndarray:
        """``B @ y`` (works on a vector or on the columns of a matrix)."""
        y = np.asarray(y, dtype=float)
        top = self.top
        n_prev = self.levels[-2].keys.size
        if y.ndim == 1:
            grouped = np.bincount(top.prefix, weights=y, minlength=n_prev).astype(float)
        else:
            grouped = np.zeros((n_prev, y.shape[1]), dtype=y.dtype)
            np.add.at(grouped, top.prefix, y)
        out = grouped[top.suffix]
        has = self.back >= 0
        out[has] -= y[self.back[has]]
        return out

    __matmul__ = apply

    def successor_counts(self) -> np.ndarray:
        group = np.bincount(self.top.prefix, minlength=self.levels[-2].keys.size)
        return group[self.top.suffix] - (self.back >= 0)

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit CSR matrix (for small graphs and tests)."""
        top = self.top
        n_prev = self.levels[-2].keys.size
        starts = np.searchsorted(top.prefix, np.arange(n_prev))
        ends = np.searchsorted(top.prefix, np.arange(n_prev), side="right")
        lo, hi = starts[top.suffix], ends[top.suffix]
        cnt = hi - lo
        rows = np.repeat(np.arange(self.num_states), cnt)
        cols = np.arange(cnt.sum()) + np.repeat(lo - (np.cumsum(cnt) - cnt), cnt)
        keep = cols != np.repeat(self.back, cnt)
        data = np.ones(keep.sum())
        return sp.csr_matrix((data, (rows[keep], cols[keep])), shape=self.shape)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, dtype=float)

    def head_sums(self, y: np.ndarray) -> np.ndarray:
        """``s[v] = sum of y over states whose last vertex is v``."""
        return np.bincount(self.last, weights=y, minlength=self.graph.n)

    def tail_sums(self, y: np.ndarray) -> np.ndarray:
        return np.bincount(self.first, weights=y, minlength=self.graph.n)


def build_nb_operator(g: Graph, r: int = 2, cap: int = DEFAULT_STATE_CAP) -> NbOperator:
    if r < 2:
        raise ValueError("backtrack order r must be >= 2")
    n = g.n
    lvl1 = _Level(np.arange(n, dtype=np.int64), np.full(n, -1), np.full(n, -1),
                  np.arange(n, dtype=np.int64)[:, None])
    levels = [lvl1]
    prev_prev = None
    for _ in range(r - 1):
        nxt = _next_level(g, levels[-1], prev_prev, cap)
        prev_prev = levels[-1].keys
        levels.append(nxt)
    top = levels[-1]
    # back[s]: the state (suffix(s), first(s)), present iff it closes a cycle
    key = top.suffix * n + top.paths[:, 0]
    pos = np.searchsorted(top.keys, key)
    pos_c = np.minimum(pos, max(top.keys.size - 1, 0))
    found = (pos < top.keys.size) & (top.keys[pos_c] == key) if top.keys.size else pos.astype(bool)
    back = np.where(found, pos_c, -1)
    return NbOperator(g, r, levels, back)
