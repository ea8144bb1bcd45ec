"""Exact recovery by graph splitting: an almost-exact first round on a sparse
edge sample, then a per-vertex MAP cleanup on the remaining edges."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .abp import abp_multiclass_seed
from .graph import Graph
from .metrics import agreement, align, as_labels, community_sizes, partition_to_labels
from .model import SbmParams, degree_profiles, graph_split
from .spectral import nb_power_detect
from .sphere import sphere_compare_known
from .thresholds import snr as snr_of

TIE_TOL = 1e-12
FIRST_ROUNDS = ("abp", "nb-power", "sphere")


class TieError(ArithmeticError):
    """Two hypotheses have the same posterior (within ``TIE_TOL``)."""


class InconsistentProfileError(ValueError):
    """A degree profile exceeds the community sizes it is drawn from."""


class FirstRoundFailure(RuntimeError):
    """The first-round clustering declined to return a labeling."""


def _count_times_log(counts: np.ndarray, logs: np.ndarray) -> np.ndarray:
    """``counts @ logs`` with 0 * (-inf) read as 0.

    ``counts`` is ``(m, k)``, ``logs`` is ``(k, k)``; entry ``[u, x]`` is
    ``sum_i counts[u, i] * logs[i, x]``.
    """
    finite = np.where(np.isfinite(logs), logs, 0.0)
    out = counts @ finite
    impossible = (~np.isfinite(logs)).astype(float)
    vetoed = (counts > 0).astype(float) @ impossible > 0
    out[vetoed] = -np.inf
    return out


@dataclass(frozen=True, eq=False)
class GenieTest:
    """Posterior of one vertex's community given everyone else's.

    ``w`` holds resolved edge probabilities and ``omega`` the sizes of the
    communities the vertex's neighbours are drawn from. Entries of ``w``
    equal to 0 or 1 make the matching observations impossible, which vetoes
    a hypothesis outright.
    """

    p: np.ndarray
    w: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        omega = np.asarray(self.omega, dtype=np.int64).ravel()
        if w.shape != (p.size, p.size) or omega.size != p.size:
            raise ValueError("p, w and omega must agree on k")
        if ((w < 0) | (w > 1)).any():
            raise ValueError("edge probabilities must lie in [0, 1]")
        if (omega < 0).any():
            raise ValueError("community sizes must be nonnegative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "omega", omega)

    @property
    def k(self) -> int:
        return int(self.p.size)

    def log_tables(self):
        """``(ln p, ln W, ln(1 - W))`` with -inf for impossible events."""
        with np.errstate(divide="ignore"):
            return np.log(self.p), np.log(self.w), np.log1p(-self.w)

    def log_posteriors(self, d, omega=None) -> np.ndarray:
        """Unnormalized log posteriors, one row per profile in ``d``.

        ``omega`` may be given per row to override the test's sizes.
        """
        d = np.atleast_2d(np.asarray(d, dtype=np.int64))
        omega = self.omega if omega is None else np.asarray(omega, dtype=np.int64)
        omega = np.broadcast_to(omega, d.shape)
        if d.shape[1] != self.k:
            raise ValueError(f"degree profiles must have {self.k} entries")
        if (d < 0).any():
            raise InconsistentProfileError("negative neighbour count")
        if (d > omega).any():
            raise InconsistentProfileError("neighbour count exceeds community size")
        logp, lw, l1w = self.log_tables()
        return logp + _count_times_log(d.astype(float), lw) + _count_times_log(
            (omega - d).astype(float), l1w)


def _argmax_with_ties(scores: np.ndarray):
    """Row-wise argmax and a mask of rows whose top two agree within TIE_TOL
    (including rows where every hypothesis is impossible)."""
    best = np.argmax(scores, axis=1)
    top = scores[np.arange(scores.shape[0]), best]
    if scores.shape[1] < 2:
        return best, ~np.isfinite(top)
    others = scores.copy()
    others[np.arange(scores.shape[0]), best] = -np.inf
    second = others.max(axis=1)
    with np.errstate(invalid="ignore"):
        tied = ~np.isfinite(top) | (np.isfinite(second) & (top - second <= TIE_TOL))
    return best, tied


def component_map_classify(test: GenieTest, d) -> int:
    """MAP community (1-based) of a vertex with degree profile ``d``.

    Raises ``TieError`` when the two best hypotheses are within 1e-12 and
    ``InconsistentProfileError`` when some ``d_i > omega_i``.
    """
    scores = test.log_posteriors(d)
    best, tied = _argmax_with_ties(scores)
    if tied[0]:
        raise TieError(f"tied posterior for degree profile {np.asarray(d).tolist()}")
    return int(best[0]) + 1


def classify_all(test: GenieTest, profiles: np.ndarray, omega=None):
    """Vectorized ``component_map_classify``: ``(labels, tied)``. Tied rows
    carry the argmax label and are flagged instead of raising."""
    best, tied = _argmax_with_ties(test.log_posteriors(profiles, omega))
    return best.astype(np.int64) + 1, tied


def _edge_log_likelihood(g: Graph, x: np.ndarray, w: np.ndarray) -> float:
    """ln P(G = g | X = x) for independent edges with probabilities ``w``."""
    k = w.shape[0]
    sizes = community_sizes(x, k).astype(float)
    e = g.edge_array()
    counts = np.zeros((k, k))
    np.add.at(counts, (x[e[:, 0]] - 1, x[e[:, 1]] - 1), 1)
    counts = np.triu(counts + counts.T - np.diag(np.diag(counts)))
    pairs = np.outer(sizes, sizes)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2)
    pairs = np.triu(pairs)
    with np.errstate(divide="ignore", invalid="ignore"):
        lw, l1w = np.log(w), np.log1p(-w)
        terms = np.where(counts > 0, counts * lw, 0.0) + np.where(pairs - counts > 0,
                                                                  (pairs - counts) * l1w, 0.0)
    return float(np.triu(terms).sum())


def align_to_model(g: Graph, x, params: SbmParams, w: np.ndarray) -> np.ndarray:
    """Relabel ``x`` by the permutation that maximizes the model likelihood
    (edges under ``w`` plus the label prior). Ties keep the earliest
    permutation in lexicographic order."""
    k = params.k
    x = as_labels(x, k)
    logp = np.log(params.p)
    best, best_ll = x, -np.inf
    for perm in itertools.permutations(range(1, k + 1)):
        y = np.asarray(perm)[x - 1]
        ll = _edge_log_likelihood(g, y, w) + float(logp[y - 1].sum())
        if ll > best_ll:
            best, best_ll = y, ll
    return best


def _constant_equivalent(params: SbmParams, n: int, fraction: float) -> SbmParams:
    """Constant-regime parameters of a ``fraction`` edge sample at size n."""
    return SbmParams(params.p, params.resolve(n) * fraction * n, "constant")


def _first_round(g1: Graph, params1: SbmParams, method: str, seed) -> np.ndarray:
    k = params1.k
    strength = float(snr_of(params1)[0])
    strength = strength if strength > 1 else None
    if method == "abp":
        return abp_multiclass_seed(g1, k=k, seed=seed, snr=strength)
    if method == "nb-power":
        if k != 2:
            raise ValueError("nb-power first round separates two communities only")
        return partition_to_labels(nb_power_detect(g1, seed=seed, snr=strength).partition)
    if method == "sphere":
        out = sphere_compare_known(g1, params1, seed=seed)
        if not out.ok:
            raise FirstRoundFailure(out.reason)
        return out.labels
    raise ValueError(f"unknown first round {method!r}; expected one of {FIRST_ROUNDS}")


def local_map_pass(g: Graph, x: np.ndarray, params: SbmParams, w: np.ndarray):
    """Reclassify every vertex by the genie test on ``g`` against labels
    ``x`` (community sizes exclude the vertex itself). Returns
    ``(labels, tied)``; tied vertices keep their label in ``x``."""
    k = params.k
    x = as_labels(x, k)
    sizes = community_sizes(x, k)
    omega = np.tile(sizes, (g.n, 1))
    omega[np.arange(g.n), x - 1] -= 1
    test = GenieTest(params.p, w, sizes)
    labels, tied = classify_all(test, degree_profiles(g, x, k), omega)
    return np.where(tied, x, labels), tied


@dataclass(frozen=True)
class ExactResult:
    labels: np.ndarray
    first_round: np.ndarray
    ties: int
    gamma: float


def default_gamma(n: int) -> float:
    """ln ln n / ln n."""
    return math.log(math.log(n)) / math.log(n)


def two_round_exact(g: Graph, params: SbmParams, first_round: str = "abp", seed=0,
                    gamma: float | None = None, refine_passes: int = 3) -> ExactResult:
    """Two-round exact recovery.

    1. Split: each edge goes to g1 with probability gamma = ln ln n / ln n.
    2. Cluster g1 with ``first_round`` and relabel by model likelihood;
       then ``refine_passes`` genie-test sweeps on g1 (edge probabilities
       gamma W) sharpen the labeling, still using g1 only.
    3. Reclassify every vertex by the genie test on its g2 profile against
       the round-1 labels, with edge probabilities (1 - gamma) W and
       community sizes from the round-1 counts. Ties keep the round-1 label.
    """
    if params.k < 2:
        raise ValueError("exact recovery needs k >= 2")
    n = g.n
    gamma = default_gamma(n) if gamma is None else float(gamma)
    if not 0 < gamma < 1:
        raise ValueError(f"gamma={gamma} outside (0, 1)")
    w = params.resolve(n)
    split = graph_split(g, gamma, rngmod.child_seed(seed, "exact-split"))
    params1 = _constant_equivalent(params, n, gamma)
    x1 = _first_round(split.g1, params1, first_round, rngmod.child_seed(seed, "round1"))
    x1 = align_to_model(split.g1, x1, params, gamma * w)
    for _ in range(refine_passes):
        x1, _ = local_map_pass(split.g1, x1, params, gamma * w)
    x2, tied = local_map_pass(split.g2, x1, params, (1 - gamma) * w)
    return ExactResult(align(x1, x2, params.k), x1, int(tied.sum()), gamma)


def exact_success(truth, predicted) -> bool:
    """True when ``predicted`` equals ``truth`` up to a relabeling."""
    return agreement(truth, predicted) == 1.0
