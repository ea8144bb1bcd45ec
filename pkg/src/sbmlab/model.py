"""The general stochastic block model: parameters, sampling, graph splitting,
degree profiles and block-matrix fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .graph import Graph
from .metrics import as_labels, community_sizes

REGIMES = ("constant", "logarithmic", "explicit")


class ParameterError(ValueError):
    pass


class FitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SbmParams:
    """``k`` communities with prior ``p`` and connectivity ``q``.

    The edge probability between communities i and j is ``q[i, j] / n``
    (constant regime), ``q[i, j] * ln(n) / n`` (logarithmic) or ``q[i, j]``
    itself (explicit).
    """

    p: np.ndarray
    q: np.ndarray
    regime: str = "constant"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown regime {self.regime!r}")
        if q.shape != (p.size, p.size):
            raise ParameterError(f"q has shape {q.shape}, expected {(p.size, p.size)}")
        if abs(p.sum() - 1) > 1e-12 or (p <= 0).any():
            raise ParameterError("p must be a positive probability vector")
        if (q < 0).any() or not np.allclose(q, q.T, rtol=0, atol=1e-12):
            raise ParameterError("q must be symmetric and nonnegative")
        if self.regime == "explicit" and (q > 1).any():
            raise ParameterError("explicit-regime probabilities must lie in [0, 1]")

    @property
    def k(self) -> int:
        return int(self.p.size)

    @classmethod
    def symmetric(cls, k: int, a: float, b: float, regime: str = "constant") -> "SbmParams":
        q = np.full((k, k), float(b))
        np.fill_diagonal(q, float(a))
        return cls(np.full(k, 1.0 / k), q, regime)

    def scale(self, n: int) -> float:
        if self.regime == "constant":
            return 1.0 / n
        if self.regime == "logarithmic":
            return math.log(n) / n
        return 1.0

    def resolve(self, n: int) -> np.ndarray:
        """Edge-probability matrix ``W`` at size ``n``; errors outside [0, 1]."""
        w = self.q * self.scale(n)
        if (w > 1).any():
            raise ParameterError(f"resolved edge probability {w.max():.4g} > 1 at n={n}")
        return w

    def pq(self) -> np.ndarray:
        """``diag(p) Q``."""
        return self.p[:, None] * self.q

    def to_dict(self) -> dict:
        return {"k": self.k, "p": self.p.tolist(), "q": self.q.ravel().tolist(),
                "regime": self.regime}

    @classmethod
    def from_dict(cls, d: dict) -> "SbmParams":
        k = int(d["k"])
        q = np.asarray(d["q"], dtype=float).reshape(k, k)
        p = d.get("p")
        p = np.full(k, 1.0 / k) if p is None else np.asarray(p, dtype=float)
        return cls(p, q, d.get("regime", "constant"))


def load_params(path) -> SbmParams:
    """Read a JSON parameter file with keys ``k``, ``p``, ``q`` (row-major), ``regime``."""
    return SbmParams.from_dict(json.loads(Path(path).read_text()))


def save_params(params: SbmParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def parse_ssbm(text: str, regime: str = "constant") -> SbmParams:
    """``"k,a,b"`` -> symmetric parameters."""
    try:
        k, a, b = text.split(",")
        return SbmParams.symmetric(int(k), float(a), float(b), regime)
    except ValueError as exc:
        raise ParameterError(f"bad --ssbm value {text!r}: expected k,a,b") from exc


# -- sampling ----------------------------------------------------------

def sample_labels(params: SbmParams, n: int, seed, balanced: bool = False) -> np.ndarray:
    gen = rngmod.stream(seed, "labels")
    if not balanced:
        return gen.choice(params.k, size=n, p=params.p) + 1
    sizes = np.floor(params.p * n).astype(int)
    # distribute the rounding remainder to the largest fractional parts
    rest = n - sizes.sum()
    sizes[np.argsort(-(params.p * n - sizes), kind="stable")[:rest]] += 1
    return gen.permutation(np.repeat(np.arange(1, params.k + 1), sizes))


def _unrank_pairs(idx: np.ndarray):
    """Map ``idx`` in ``[0, C(s, 2))`` to pairs ``a < b``."""
    b = np.floor((1 + np.sqrt(1 + 8 * idx.astype(float))) / 2).astype(np.int64)
    b -= (b * (b - 1) // 2 > idx)
    b += ((b + 1) * b // 2 <= idx)
    return idx - b * (b - 1) // 2, b


def _sample_block(gen, members_i, members_j, w, same):
    si, sj = members_i.size, members_j.size
    total = si * (si - 1) // 2 if same else si * sj
    if total == 0 or w <= 0:
        return np.empty((0, 2), dtype=np.int64)
    count = int(gen.binomial(total, w))
    idx = gen.choice(total, size=count, replace=False)
    if same:
        a, b = _unrank_pairs(idx)
        return np.column_stack([members_i[a], members_i[b]])
    return np.column_stack([members_i[idx // sj], members_j[idx % sj]])


def sample_edges(params: SbmParams, labels: np.ndarray, seed) -> Graph:
    """Edges of an SBM graph given the vertex labels."""
    n = labels.size
    w = params.resolve(n)
    gen = rngmod.stream(seed, "edges")
    members = [np.flatnonzero(labels == i + 1) for i in range(params.k)]
    blocks = []
    # per-block binomial edge count + uniform placement; avoids scanning all pairs
    for i in range(params.k):
        for j in range(i, params.k):
            blocks.append(_sample_block(gen, members[i], members[j], w[i, j], i == j))
    return Graph.from_edges(n, np.concatenate(blocks) if blocks else np.empty((0, 2)))


def sample_sbm(params: SbmParams, n: int, seed, balanced: bool = False):
    """Draw ``(labels, graph)`` from the SBM; deterministic given ``seed``."""
    if n < 2:
        raise ParameterError("need n >= 2")
    params.resolve(n)
    labels = sample_labels(params, n, seed, balanced)
    return labels, sample_edges(params, labels, seed)


# -- graph splitting ---------------------------------------------------

@dataclass(frozen=True)
class SplitResult:
    g1: Graph
    g2: Graph
    gamma: float


def graph_split(g: Graph, gamma: float, seed) -> SplitResult:
    """Each edge goes to ``g1`` independently with probability ``gamma``; the
    rest form ``g2``."""
    if not 0 <= gamma <= 1:
        raise ParameterError(f"gamma={gamma} outside [0, 1]")
    keep = rngmod.stream(seed, "split").random(g.num_edges) < gamma
    return SplitResult(g.subgraph_edges(keep), g.subgraph_edges(~keep), gamma)


# -- degree profiles and fitting --------------------------------------

def degree_profiles(g: Graph, x, k: int | None = None) -> np.ndarray:
    """``(n, k)`` matrix of per-community neighbor counts."""
    x = as_labels(x, k)
    k = k or int(x.max())
    if x.size != g.n:
        raise ValueError("labeling does not cover the graph")
    rows = g.tails
    return np.bincount(rows * k + (x[g.indices] - 1), minlength=g.n * k).reshape(g.n, k)


def degree_profile(g: Graph, x, v: int, k: int | None = None) -> np.ndarray:
    x = as_labels(x, k)
    k = k or int(x.max())
    return np.bincount(x[g.neighbors(v)] - 1, minlength=k)


def fit_block_matrix(g: Graph, x, regime: str = "constant", k: int | None = None) -> SbmParams:
    """Maximum-likelihood block parameters given a labeling."""
    x = as_labels(x, k)
    k = k or int(x.max())
    sizes = community_sizes(x, k)
    if (sizes == 0).any():
        raise FitError(f"empty community in sizes {sizes.tolist()}")
    n = g.n
    e = g.edge_array()
    lu, lv = x[e[:, 0]] - 1, x[e[:, 1]] - 1
    counts = np.bincount(lu * k + lv, minlength=k * k).reshape(k, k)
    counts = counts + counts.T - np.diag(np.diag(counts))
    pairs = np.outer(sizes, sizes).astype(float)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        density = np.where(pairs > 0, counts / pairs, 0.0)
    scale = {"constant": n, "logarithmic": n / math.log(n), "explicit": 1.0}[regime]
    return SbmParams(sizes / n, density * scale, regime)
