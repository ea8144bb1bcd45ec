"""Labelings and the agreement / overlap / separation metrics.

A labeling is an integer array of community ids in ``1..k`` (one per vertex).
A bipartition is a boolean membership mask for the set ``S``.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

EXHAUSTIVE_K = 8


class DimensionError(ValueError):
    pass


class UndefinedCommunityError(ValueError):
    pass


def as_labels(x, k: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as an int64 array with ids in ``1..k``."""
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.size and x.min() < 1:
        raise ValueError("community ids start at 1")
    if k is not None and x.size and x.max() > k:
        raise ValueError(f"community id {int(x.max())} exceeds k={k}")
    return x


def num_communities(*labelings) -> int:
    return int(max((int(np.max(x)) if len(x) else 1) for x in labelings))


def confusion(x, y, k: int) -> np.ndarray:
    """``C[i, j]`` = number of vertices with ``x = i+1`` and ``y = j+1``."""
    return np.bincount((x - 1) * k + (y - 1), minlength=k * k).reshape(k, k)


def _best_assignment(score: np.ndarray):
    """Maximize ``sum_i score[i, perm[i]]`` over permutations.

    Exhaustive in identity-first order for small k (so ties prefer the
    identity), Hungarian algorithm otherwise.
    """
    k = score.shape[0]
    if k <= EXHAUSTIVE_K:
        rows = np.arange(k)
        best, best_perm = -np.inf, None
        for perm in permutations(range(k)):
            val = score[rows, perm].sum()
            if val > best + 1e-15:
                best, best_perm = val, perm
        return float(best), np.array(best_perm)
    r, c = linear_sum_assignment(score, maximize=True)
    return float(score[r, c].sum()), c


def _pair(x, y, k):
    x, y = as_labels(x), as_labels(y)
    if x.size != y.size:
        raise DimensionError(f"labelings have lengths {x.size} and {y.size}")
    if k is None:
        k = num_communities(x, y)
    return as_labels(x, k), as_labels(y, k), k


def agreement(x, y, k: int | None = None) -> float:
    """Fraction of vertices on which ``x`` and a relabeling of ``y`` agree,
    maximized over all relabelings."""
    x, y, k = _pair(x, y, k)
    if x.size == 0:
        return 1.0
    best, _ = _best_assignment(confusion(x, y, k).astype(float))
    return best / x.size


def align(reference, y, k: int | None = None) -> np.ndarray:
    """Relabel ``y`` so that it best agrees with ``reference``."""
    x, y, k = _pair(reference, y, k)
    _, perm = _best_assignment(confusion(x, y, k).T.astype(float))
    # perm[j] is the reference label matched to y-label j
    return perm[y - 1] + 1


def overlap_star(x, y, k: int | None = None) -> float:
    """Maximum over relabelings of sum_z P(x=z, y=z) - P(x=z) P(y=z),
    with empirical frequencies."""
    x, y, k = _pair(x, y, k)
    n = x.size
    c = confusion(x, y, k) / n
    px, py = c.sum(axis=1), c.sum(axis=0)
    best, _ = _best_assignment(c - np.outer(px, py))
    return best


def community_sizes(x, k: int) -> np.ndarray:
    return np.bincount(as_labels(x, k) - 1, minlength=k)


def separation(truth, part, k: int | None = None) -> float:
    """Largest gap between two communities' rates of membership in ``S``."""
    truth = as_labels(truth, k)
    s = np.asarray(part, dtype=bool).ravel()
    if s.size != truth.size:
        raise DimensionError("partition and labeling lengths differ")
    k = k or num_communities(truth)
    sizes = community_sizes(truth, k)
    if k < 2 or (sizes == 0).any():
        raise UndefinedCommunityError(f"community sizes {sizes.tolist()} include an empty community")
    rates = np.bincount(truth - 1, weights=s, minlength=k) / sizes
    return float(rates.max() - rates.min())


def partition_to_labels(part) -> np.ndarray:
    """Bipartition mask -> labeling (members of S get label 1)."""
    return np.where(np.asarray(part, dtype=bool), 1, 2)


def read_labels(path, n: int | None = None) -> np.ndarray:
    """One integer community id (>= 1) per line."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                v = int(line)
            except ValueError:
                raise ValueError(f"line {lineno}: not an integer: {line!r}") from None
            if v < 1:
                raise ValueError(f"line {lineno}: community ids start at 1")
            out.append(v)
    x = np.array(out, dtype=np.int64)
    if n is not None and x.size != n:
        raise DimensionError(f"labels file has {x.size} entries, graph has {n} vertices")
    return x
