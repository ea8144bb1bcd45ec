"""Sparse undirected simple graphs with a canonical directed-edge index.

Vertices are ``0..n-1``. Adjacency is kept in compressed row form with each
row sorted ascending, so the position of an entry in ``indices`` doubles as
the id of the directed edge ``(row, indices[pos])``. Directed edges are thus
enumerated in lexicographic ``(tail, head)`` order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph input (self-loop, duplicate edge, bad vertex id)."""


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    _rev: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges, *, strict: bool = True) -> "Graph":
        """Build from an iterable / ``(m, 2)`` array of unordered pairs.

        With ``strict`` a self-loop or a repeated pair raises ``GraphError``;
        otherwise such pairs are silently dropped.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise GraphError("negative vertex count")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("vertex id out of range")
        loops = e[:, 0] == e[:, 1]
        if strict and loops.any():
            raise GraphError(f"self-loop at vertex {int(e[loops][0, 0])}")
        e = e[~loops]
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        key = lo * max(n, 1) + hi
        uniq = np.unique(key)
        if strict and uniq.size != key.size:
            raise GraphError("duplicate edge")
        lo, hi = uniq // max(n, 1), uniq % max(n, 1)
        tails = np.concatenate([lo, hi])
        heads = np.concatenate([hi, lo])
        return cls._from_directed(n, tails, heads)

    @classmethod
    def _from_directed(cls, n, tails, heads) -> "Graph":
        order = np.lexsort((heads, tails))
        tails, heads = tails[order], heads[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(tails, minlength=n), out=indptr[1:])
        # directed edge ids are sorted by (tail, head); the reverse edge of
        # (u, v) is found by searching the sorted keys for (v, u)
        keys = tails * max(n, 1) + heads
        rev = np.searchsorted(keys, heads * max(n, 1) + tails)
        g = cls(n, indptr, heads.astype(np.int64), rev.astype(np.int64))
        return g

    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        a = sp.coo_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        mask = a.row < a.col
        return cls.from_edges(a.shape[0], np.column_stack([a.row[mask], a.col[mask]]), strict=False)

    # -- basic queries -------------------------------------------------

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def num_directed(self) -> int:
        return int(self.indices.size)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def tails(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)

    @property
    def heads(self) -> np.ndarray:
        return self.indices

    @property
    def reverse(self) -> np.ndarray:
        """``reverse[e]`` is the id of the directed edge opposite to ``e``."""
        return self._rev

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.size and nb[i] == v)

    def edge_id(self, u: int, v: int) -> int:
        """Id of the directed edge ``u -> v``; ``KeyError`` if absent."""
        nb = self.neighbors(u)
        i = int(np.searchsorted(nb, v))
        if i >= nb.size or nb[i] != v:
            raise KeyError((u, v))
        return int(self.indptr[u]) + i

    def edge_array(self) -> np.ndarray:
        """Undirected edges as a ``(m, 2)`` array with ``u < v``, sorted."""
        t = self.tails
        mask = t < self.indices
        return np.column_stack([t[mask], self.indices[mask]])

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def average_degree(self) -> float:
        return 2.0 * self.num_edges / self.n if self.n else 0.0

    def subgraph_edges(self, keep: np.ndarray) -> "Graph":
        """Graph on the same vertex set keeping undirected edges where ``keep``."""
        e = self.edge_array()
        return Graph.from_edges(self.n, e[np.asarray(keep, dtype=bool)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.num_edges})"


# -- edge-list files ---------------------------------------------------

def read_edgelist(path, n: int | None = None) -> Graph:
    """Parse a whitespace edge list (0-indexed endpoints, one edge per line).

    Blank lines and ``#`` comments are skipped. Duplicates and self-loops are
    rejected with the offending line number.
    """
    pairs = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"line {lineno}: expected two integers, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"line {lineno}: non-integer vertex id in {line!r}") from None
            if u < 0 or v < 0:
                raise GraphError(f"line {lineno}: negative vertex id")
            if u == v:
                raise GraphError(f"line {lineno}: self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"line {lineno}: duplicate edge {key[0]} {key[1]}")
            seen.add(key)
            pairs.append(key)
    top = max((max(p) for p in pairs), default=-1) + 1
    if n is None:
        n = top
    elif n < top:
        raise GraphError(f"vertex id {top - 1} exceeds n={n}")
    return Graph.from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def write_edgelist(g: Graph, path) -> None:
    """Canonical serialization: edges ``u v`` with ``u < v``, sorted."""
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in g.edge_array()))


# -- small named graphs (fixtures and examples) ------------------------

def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def disjoint_cliques(sizes, bridges=()) -> Graph:
    """Disjoint cliques, optionally joined by extra ``bridges`` edges."""
    edges, start = [], 0
    for s in sizes:
        edges += [(start + i, start + j) for i in range(s) for j in range(i + 1, s)]
        start += s
    return Graph.from_edges(start, list(edges) + list(bridges))


def count_nb_walks_bruteforce(g: Graph, e, f, length: int, r: int = 2) -> int:
    """Count r-nonbacktracking walks of ``length`` states from ``e`` to ``f``.

    ``e`` and ``f`` are vertex tuples of r vertices (directed edges for
    r=2). A walk extends one vertex at a time and every window of r+1
    consecutive vertices must be distinct. Plain depth-first enumeration,
    meant for graphs with a dozen vertices.
    """
    if length < 1 or r < 2:
        raise ValueError("need length >= 1 and r >= 2")
    e, f = tuple(int(v) for v in e), tuple(int(v) for v in f)
    if len(e) != r or len(f) != r:
        raise ValueError(f"states must have {r} vertices")
    adj = [set(g.neighbors(v).tolist()) for v in range(g.n)]

    def valid(seq):
        return (len(set(seq)) == len(seq)
                and all(seq[i + 1] in adj[seq[i]] for i in range(len(seq) - 1)))

    if not (valid(e) and valid(f)):
        return 0

    def dfs(seq, steps_left):
        if steps_left == 0:
            return int(tuple(seq[-r:]) == f)
        total = 0
        window = seq[-r:]
        for w in adj[seq[-1]]:
            if w in window:
                continue
            seq.append(w)
            total += dfs(seq, steps_left - 1)
            seq.pop()
        return total

    return dfs(list(e), length - 1)
