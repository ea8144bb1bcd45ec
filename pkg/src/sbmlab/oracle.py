"""Brute-force references for tests: exhaustive MAP, single-vertex
posteriors, typicality sampling and dense eigensolvers.

Everything here works from a dense adjacency matrix and full enumeration,
sharing no numerical code with the main modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import rng as rngmod
from .graph import Graph
from .model import SbmParams
from .nonbacktracking import ResourceError

MAX_N = 16
MAX_LABELINGS = 2 ** 20
MAX_DENSE_DIM = 400
RESIDUAL_TOL = 1e-8
TIE_TOL = 1e-9


def _dense(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n), dtype=np.int8)
    for u, v in g.edge_array():
        a[u, v] = a[v, u] = 1
    return a


def all_labelings(n: int, k: int) -> np.ndarray:
    """Every vector in {1..k}^n, one per row, in lexicographic order."""
    if n > MAX_N or k ** n > MAX_LABELINGS:
        raise ResourceError(f"{k}^{n} labelings exceed the brute-force cap")
    digits = np.arange(k ** n)[:, None] // (k ** np.arange(n - 1, -1, -1)) % k
    return (digits + 1).astype(np.int8)


def canonical(x: np.ndarray) -> np.ndarray:
    """Relabel rows so labels appear in order of first occurrence."""
    x = np.atleast_2d(x)
    out = np.zeros_like(x)
    for i, row in enumerate(x):
        seen = {}
        for j, lab in enumerate(row):
            out[i, j] = seen.setdefault(int(lab), len(seen) + 1)
    return out


def log_joint(g: Graph, params: SbmParams, labelings: np.ndarray) -> np.ndarray:
    """ln P(G = g, X = x) for every row x of ``labelings``."""
    n, k = g.n, params.k
    w = params.resolve(n)
    with np.errstate(divide="ignore"):
        lw, l1w = np.log(w), np.log1p(-w)
        logp = np.log(params.p)
    a = _dense(g)
    x = labelings.astype(np.int64) - 1
    total = logp[x].sum(axis=1)
    for u in range(n):
        for v in range(u + 1, n):
            table = lw if a[u, v] else l1w
            total = total + table[x[:, u], x[:, v]]
    return total


@dataclass(frozen=True)
class MapResult:
    labels: np.ndarray
    log_posterior: float
    tied: bool


def map_exact_bruteforce(g: Graph, params: SbmParams) -> MapResult:
    """Partition maximizing sum over labelings inducing it of P(G, X = x).

    Partitions are represented by their first-occurrence labeling. Ties
    (within 1e-9 in log scale) go to the lexicographically smallest
    representative and are flagged.
    """
    if g.n > MAX_N:
        raise ResourceError(f"n={g.n} exceeds {MAX_N}")
    xs = all_labelings(g.n, params.k)
    lj = log_joint(g, params, xs)
    canon = canonical(xs)
    keys, inverse = np.unique(canon, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    scores = np.array([logsumexp(lj[inverse == i]) for i in range(keys.shape[0])])
    norm = logsumexp(lj)
    best = scores.max()
    near = np.flatnonzero(scores >= best - TIE_TOL)
    # np.unique sorts rows lexicographically, so the first index is smallest
    return MapResult(keys[near[0]].astype(np.int64), float(best - norm), near.size > 1)


def genie_posterior_bruteforce(g: Graph, params: SbmParams, x, u: int) -> np.ndarray:
    """P(X_u = i | G, X_{-u} = x_{-u}) for i = 1..k, from the full joint."""
    x = np.asarray(x, dtype=np.int64)
    rows = np.tile(x, (params.k, 1))
    rows[:, u] = np.arange(1, params.k + 1)
    lj = log_joint(g, params, rows)
    if not np.isfinite(lj).any():
        return np.full(params.k, np.nan)
    return np.exp(lj - logsumexp(lj))


@dataclass(frozen=True)
class TypicalityResult:
    labels: np.ndarray | None
    typical_count: int
    ok: bool


def balanced_labelings(n: int, k: int) -> np.ndarray:
    """Labelings with every community of size n/k (n divisible by k)."""
    if n % k:
        raise ValueError(f"n={n} is not divisible by k={k}")
    xs = all_labelings(n, k)
    counts = np.stack([(xs == i).sum(axis=1) for i in range(1, k + 1)], axis=1)
    return xs[(counts == n // k).all(axis=1)]


def typical_set(g: Graph, k: int, a: float, b: float, delta: float) -> np.ndarray:
    """Balanced labelings whose within-community edge count is at least
    a n (1 - delta) / 2k and crossing edge count at most
    b n (k - 1)(1 + delta) / 2k; both inequalities flip when a < b."""
    n = g.n
    xs = balanced_labelings(n, k)
    e = g.edge_array()
    within = (xs[:, e[:, 0]] == xs[:, e[:, 1]]).sum(axis=1) if e.size else np.zeros(len(xs), int)
    cross = e.shape[0] - within
    lo = a * n / (2 * k) * (1 - delta)
    hi = b * n * (k - 1) / (2 * k) * (1 + delta)
    if a >= b:
        keep = (within >= lo) & (cross <= hi)
    else:
        keep = (within <= a * n / (2 * k) * (1 + delta)) & (
            cross >= b * n * (k - 1) / (2 * k) * (1 - delta))
    return xs[keep]


def typicality_sample_bruteforce(g: Graph, params: SbmParams, delta: float, seed) -> TypicalityResult:
    """Uniform draw from the typical set of a symmetric model; an empty set
    gives ``ok=False``."""
    if g.n > MAX_N:
        raise ResourceError(f"n={g.n} exceeds {MAX_N}")
    k = params.k
    q = params.q
    a, b = float(q[0, 0]), float(q[0, 1]) if k > 1 else 0.0
    members = typical_set(g, k, a, b, delta)
    if members.shape[0] == 0:
        return TypicalityResult(None, 0, False)
    pick = int(rngmod.stream(seed, "typicality").integers(members.shape[0]))
    return TypicalityResult(members[pick].astype(np.int64), int(members.shape[0]), True)


@dataclass(frozen=True)
class DenseSpectrum:
    values: np.ndarray
    vectors: np.ndarray | None


def dense_eigs(matrix) -> DenseSpectrum:
    """Full spectrum by dense reduction; eigenvectors only for symmetric
    input. Raises ``ArithmeticError`` when a residual exceeds 1e-8."""
    m = np.asarray(matrix.toarray() if hasattr(matrix, "toarray") else matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if m.shape[0] > MAX_DENSE_DIM:
        raise ResourceError(f"dimension {m.shape[0]} exceeds {MAX_DENSE_DIM}")
    scale = max(1.0, float(np.abs(m).sum(axis=1).max())) if m.size else 1.0
    if np.array_equal(m, m.T):
        vals, vecs = np.linalg.eigh(m)
        resid = np.abs(m @ vecs - vecs * vals).max() if m.size else 0.0
        out = DenseSpectrum(vals, vecs)
    else:
        vals, vecs = np.linalg.eig(m)
        resid = np.abs(m @ vecs - vecs * vals).max() if m.size else 0.0
        order = np.lexsort((vals.imag, vals.real))
        out = DenseSpectrum(vals[order], None)
    if not math.isfinite(resid) or resid > RESIDUAL_TOL * scale:
        raise ArithmeticError(f"eigen-residual {resid:.3g} exceeds tolerance")
    return out
