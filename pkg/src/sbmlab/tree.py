"""Broadcasting a bit on Galton-Watson trees.

The root draws a uniform bit; every child copies its parent's bit, flipped
independently with probability ``eps``. Only the bits at the last level are
observed. Trees are stored level by level: ``parents[s][i]`` is the index
(within level s-1) of vertex i of level s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import rng as rngmod
from .nonbacktracking import ResourceError

MAX_POISSON_DEPTH = 25
MAX_VERTICES = 50_000_000


@dataclass(frozen=True)
class Offspring:
    kind: str  # "poisson" or "fixed"
    c: float

    def __post_init__(self):
        if self.kind not in ("poisson", "fixed"):
            raise ValueError(f"unknown offspring law {self.kind!r}")
        if self.c < 0 or (self.kind == "fixed" and int(self.c) != self.c):
            raise ValueError("fixed offspring needs a nonnegative integer c")

    @classmethod
    def parse(cls, text: str) -> "Offspring":
        kind, _, c = text.partition(":")
        return cls(kind, float(c))


@dataclass(frozen=True, eq=False)
class BroadcastTree:
    parents: list     # parents[0] is empty (root level)
    labels: list      # labels[s]: uint8 array of bits at level s
    eps: float
    offspring: Offspring

    @property
    def depth(self) -> int:
        return len(self.labels) - 1

    @property
    def leaves(self) -> np.ndarray:
        return self.labels[-1]

    @property
    def root(self) -> int:
        return int(self.labels[0][0])

    def children(self, level: int, i: int) -> np.ndarray:
        """Indices (in level+1) of the children of vertex i of ``level``."""
        return np.flatnonzero(self.parents[level + 1] == i)


def _check_eps(eps):
    if not 0 <= eps <= 1:
        raise ValueError(f"eps={eps} outside [0, 1]")


def sample_broadcast(offspring: Offspring, eps: float, depth: int, seed,
                     max_vertices: int = MAX_VERTICES) -> BroadcastTree:
    _check_eps(eps)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if offspring.kind == "poisson" and depth > MAX_POISSON_DEPTH:
        raise ResourceError(f"poisson trees are capped at depth {MAX_POISSON_DEPTH}")
    gen = rngmod.stream(seed, "broadcast")
    labels = [np.array([gen.integers(2)], dtype=np.uint8)]
    parents = [np.empty(0, dtype=np.int64)]
    total = 1
    for _ in range(depth):
        size = labels[-1].size
        if offspring.kind == "fixed":
            counts = np.full(size, int(offspring.c))
        else:
            counts = gen.poisson(offspring.c, size=size)
        total += int(counts.sum())
        if total > max_vertices:
            raise ResourceError(f"tree exceeds {max_vertices} vertices")
        par = np.repeat(np.arange(size, dtype=np.int64), counts)
        flips = gen.random(par.size) < eps
        parents.append(par)
        labels.append(labels[-1][par] ^ flips.astype(np.uint8))
    return BroadcastTree(parents, labels, float(eps), offspring)


def _channel(h: np.ndarray, theta: float) -> np.ndarray:
    """Log-likelihood ratio passed to the parent through a flip channel."""
    with np.errstate(divide="ignore"):
        return 2 * np.arctanh(theta * np.tanh(h / 2))


def tree_bp_root_posterior(tree: BroadcastTree) -> float:
    """Exact P(root = 1 | bits at the last level), by upward log-odds
    recursion. Vertices without observed descendants send zero messages."""
    theta = 1 - 2 * tree.eps
    d = tree.depth
    h = np.where(tree.leaves == 1, np.inf, -np.inf)
    if d == 0:
        return float(tree.root)
    for s in range(d, 0, -1):
        msg = _channel(h, theta)
        h = np.bincount(tree.parents[s], weights=msg, minlength=tree.labels[s - 1].size)
    return float(expit(h[0]))


def census_majority(tree: BroadcastTree):
    """Majority bit among last-level vertices; ``None`` on a tie."""
    leaves = tree.leaves
    if leaves.size == 0:
        raise ValueError("tree has no vertices at its last level")
    ones = int(leaves.sum())
    zeros = leaves.size - ones
    if ones == zeros:
        return None
    return int(ones > zeros)


@dataclass(frozen=True)
class DetectionEstimate:
    bp_advantage: float
    bp_advantage_se: float
    census_accuracy: float
    census_accuracy_se: float
    trials: int


def estimate_detection(offspring: Offspring, eps: float, depth: int, trials: int, seed) -> DetectionEstimate:
    """Monte-Carlo mean of |P(root=1 | leaves) - 1/2| and census accuracy.

    Census ties count as half a success. Trees with no vertex at the last
    level contribute advantage 0 and a census coin flip.
    """
    _check_eps(eps)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    adv = np.empty(trials)
    cen = np.empty(trials)
    for t in range(trials):
        tree = sample_broadcast(offspring, eps, depth, rngmod.child_seed(seed, "tree", t))
        adv[t] = abs(tree_bp_root_posterior(tree) - 0.5) if tree.leaves.size else 0.0
        guess = census_majority(tree) if tree.leaves.size else None
        cen[t] = 0.5 if guess is None else float(guess == tree.root)
    se = lambda x: float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return DetectionEstimate(float(adv.mean()), se(adv), float(cen.mean()), se(cen), trials)


def sbm_tree_parameters(a: float, b: float):
    """Offspring mean and flip probability of the tree seen locally in
    SSBM(n, 2, a/n, b/n): ``((a + b) / 2, b / (a + b))``."""
    return (a + b) / 2, b / (a + b)


def eps_for_ks_ratio(c: float, ratio: float) -> float:
    """Flip probability eps in [0, 1/2] with c (1 - 2 eps)^2 = ratio."""
    return (1 - math.sqrt(ratio / c)) / 2
