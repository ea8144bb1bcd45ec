"""Closed-form threshold quantities for block models.

Chernoff-Hellinger divergence and the exact-recovery exponent, the finest
recoverable partition, the Kesten-Stigum signal-to-noise ratio, topology
margins, and the typicality-sampling detection bound for symmetric models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import ParameterError, SbmParams

GRID_STEP = 1e-3
GOLDEN_TOL = 1e-9
_INVPHI = (math.sqrt(5) - 1) / 2


class DegenerateModelError(ValueError):
    pass


def d_t(mu, nu, t: float) -> float:
    """sum_x nu(x) f_t(mu(x) / nu(x)) with f_t(y) = 1 - t + t y - y^t.

    Zero entries follow the continuity limits: a coordinate with nu = 0
    contributes t * mu, one with both zero contributes 0.
    """
    if not 0 <= t <= 1:
        raise ParameterError(f"t={t} outside [0, 1]")
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise ParameterError("mu and nu must have the same length")
    if (mu < 0).any() or (nu < 0).any():
        raise ParameterError("mu and nu must be nonnegative")
    cross = mu ** t * nu ** (1 - t)
    return float(np.sum((1 - t) * nu + t * mu - cross))


def _golden_max(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    t = (a + b) / 2
    return f(t), t


def d_plus(mu, nu):
    """Chernoff-Hellinger divergence ``max_t d_t(mu, nu)`` and its argmax.

    A 1e-3 grid over [0, 1] guards against multiple local maxima, then
    golden-section search refines the best grid cell to 1e-9 in t.
    """
    d_t(mu, nu, 0.5)  # validates the inputs
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    grid = np.linspace(0.0, 1.0, int(round(1 / GRID_STEP)) + 1)
    tt = grid[:, None]
    vals = ((1 - tt) * nu + tt * mu - mu ** tt * nu ** (1 - tt)).sum(axis=1)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    val, t = _golden_max(lambda s: d_t(mu, nu, s), lo, hi, GOLDEN_TOL)
    if vals[i] > val:
        return float(vals[i]), float(grid[i])
    return float(val), float(t)


def _pair_divergences(params: SbmParams) -> np.ndarray:
    cols = params.pq()
    k = params.k
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = d_plus(cols[:, i], cols[:, j])[0]
    return out


def i_plus(params: SbmParams) -> float:
    """Exact-recovery exponent: min over community pairs of the CH
    divergence between columns of diag(p) Q."""
    if params.k < 2:
        raise ParameterError("need at least two communities")
    div = _pair_divergences(params)
    return float(div[np.triu_indices(params.k, 1)].min())


def finest_partition(params: SbmParams) -> list[list[int]]:
    """Blocks of communities (1-based ids) that cannot be told apart: connected
    components of the graph joining i, j whenever their divergence is < 1."""
    k = params.k
    if k == 1:
        return [[1]]
    adj = _pair_divergences(params) < 1
    np.fill_diagonal(adj, False)
    _, comp = connected_components(adj.astype(int), directed=False)
    blocks: dict[int, list[int]] = {}
    for i, c in enumerate(comp):
        blocks.setdefault(int(c), []).append(i + 1)
    return sorted(blocks.values())


def eigenvalues(params: SbmParams, n: int | None = None) -> np.ndarray:
    """Eigenvalues of diag(p) Q sorted by decreasing magnitude.

    Computed from the symmetric matrix diag(sqrt p) Q diag(sqrt p), which is
    similar to diag(p) Q. In the explicit regime ``n`` rescales W to Q = nW.
    """
    q = params.q
    if params.regime == "explicit":
        if n is None:
            raise ParameterError("explicit regime needs n to rescale W")
        q = q * n
    s = np.sqrt(params.p)
    ev = np.linalg.eigvalsh(s[:, None] * q * s[None, :])
    return ev[np.argsort(-np.abs(ev), kind="stable")]


def snr(params: SbmParams, n: int | None = None):
    """``lambda_2^2 / lambda_1`` over the distinct eigenvalues of diag(p) Q.

    Returns ``(snr, eigenvalues)``.
    """
    ev = eigenvalues(params, n)
    lam1 = ev[0]
    if lam1 <= 0:
        raise DegenerateModelError("leading eigenvalue of diag(p)Q is not positive")
    tol = 1e-12 * abs(lam1)
    distinct = [lam1]
    for v in ev[1:]:
        if all(abs(v - u) > tol for u in distinct):
            distinct.append(v)
    lam2 = distinct[1] if len(distinct) > 1 else 0.0
    return float(lam2 ** 2 / lam1), ev


def connectivity_and_giant(params: SbmParams, n: int | None = None):
    """``(min_i ||(diag(p)Q)_i||_1 - 1, lambda_1 - 1)``."""
    col = params.pq().sum(axis=0)
    lam1 = eigenvalues(params, n)[0]
    return float(col.min() - 1), float(lam1 - 1)


def tau_fixed_point(d: float) -> float:
    """The root in (0, 1) of tau e^{-tau} = d e^{-d}, for d > 1."""
    if not d > 1:
        raise ParameterError(f"need d > 1, got {d}")
    target = d * math.exp(-d)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if mid * math.exp(-mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return (lo + hi) / 2


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def it_bound_terms(k: int, a: float, b: float):
    """Left side and the two right-side branches of the typicality-sampling
    detection bound for SSBM(n, k, a/n, b/n)."""
    d = (a + (k - 1) * b) / k
    if not d > 1:
        raise ParameterError(f"average degree d={d} <= 1: no giant component")
    tau = tau_fixed_point(d)
    lhs = (_xlogx(a) + (k - 1) * _xlogx(b)) / k - _xlogx(d)
    branch_tau = (1 - tau) / (1 - tau * k / (a + (k - 1) * b)) * 2 * math.log(k)
    branch_sat = 2 * math.log(k) - 2 * math.log(2) * math.exp(-a / k) * (
        1 - (1 - math.exp(-b / k)) ** (k - 1))
    return lhs, branch_tau, branch_sat, tau


def it_bound_holds(k: int, a: float, b: float) -> bool:
    lhs, b1, b2, _ = it_bound_terms(k, a, b)
    return lhs > min(b1, b2)


@dataclass
class ThresholdReport:
    i_plus: float
    snr: float
    lambda1: float
    lambda2: float
    connectivity_margin: float
    giant_margin: float
    finest_partition: list = field(default_factory=list)
    it_bound_holds: bool | None = None
    tau: float | None = None

    def as_dict(self) -> dict:
        return {
            "i_plus": self.i_plus,
            "snr": self.snr,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "connectivity_margin": self.connectivity_margin,
            "giant_margin": self.giant_margin,
            "finest_partition": "|".join(",".join(map(str, b)) for b in self.finest_partition),
            "it_bound_holds": self.it_bound_holds,
            "tau": self.tau,
        }

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _symmetric_ab(params: SbmParams):
    """``(a, b)`` if the parameters are symmetric, else ``None``."""
    k, q = params.k, params.q
    if k < 2 or not np.allclose(params.p, 1.0 / k, atol=1e-12):
        return None
    a, b = q[0, 0], q[0, 1]
    off = q[~np.eye(k, dtype=bool)]
    if np.allclose(np.diag(q), a, atol=1e-12) and np.allclose(off, b, atol=1e-12):
        return float(a), float(b)
    return None


def threshold_report(params: SbmParams, n: int | None = None) -> ThresholdReport:
    ratio, ev = snr(params, n)
    lam2 = float(ev[1]) if ev.size > 1 else 0.0
    conn, giant = connectivity_and_giant(params, n)
    holds = tau = None
    ab = _symmetric_ab(params)
    if ab is not None and params.regime == "constant":
        a, b = ab
        if (a + (params.k - 1) * b) / params.k > 1:
            lhs, b1, b2, tau = it_bound_terms(params.k, a, b)
            holds = lhs > min(b1, b2)
    return ThresholdReport(
        i_plus=i_plus(params) if params.k >= 2 else float("nan"),
        snr=ratio,
        lambda1=float(ev[0]),
        lambda2=lam2,
        connectivity_margin=conn,
        giant_margin=giant,
        finest_partition=finest_partition(params),
        it_bound_holds=holds,
        tau=tau,
    )
