"""Scalar Gaussian channel Y = sqrt(gamma) X + Z with X uniform on {-1, +1}.

Its MMSE and mutual information give the limiting per-vertex MMSE and
mutual information of the two-community SBM at finite SNR lambda through the
fixed point gamma = lambda (1 - mmse(gamma)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

QUAD_NODES = 101
MAX_ITER = 100_000
# positive fixed points below this scale (lambda - 1 < ~2e-6) are reported as 0
ZERO_RESOLUTION = 1e-6

_z, _w = np.polynomial.hermite_e.hermegauss(QUAD_NODES)
_w = _w / _w.sum()


class NumericalError(RuntimeError):
    pass


def _expect(fn, gamma: float) -> float:
    return float(_w @ fn(gamma + math.sqrt(gamma) * _z))


def _check(gamma):
    if gamma < 0:
        raise ValueError(f"gamma={gamma} must be >= 0")


def scalar_mmse(gamma: float) -> float:
    """1 - E tanh(gamma + sqrt(gamma) Z)^2."""
    _check(gamma)
    return 1.0 - _expect(lambda x: np.tanh(x) ** 2, gamma)


def _logcosh(x):
    return np.logaddexp(x, -x) - math.log(2)


def scalar_mi(gamma: float) -> float:
    """gamma - E log cosh(gamma + sqrt(gamma) Z), in nats."""
    _check(gamma)
    return gamma - _expect(_logcosh, gamma)


def psi(gamma: float, lam: float) -> float:
    """lambda/4 + gamma^2/(4 lambda) - gamma/2 + I(gamma)."""
    if lam == 0:
        return 0.0
    return lam / 4 + gamma ** 2 / (4 * lam) - gamma / 2 + scalar_mi(gamma)


@dataclass(frozen=True)
class ScalarChannelState:
    lam: float
    gamma_star: float
    mmse_limit: float
    mi_limit: float
    residual: float
    iterations: int


def _residual(gamma, lam):
    return lam * (1 - scalar_mmse(gamma)) - gamma


def gamma_star(lam: float, damping: float = 0.5, tol: float = 1e-8) -> ScalarChannelState:
    """Largest nonnegative solution of gamma = lam (1 - mmse(gamma)).

    Damped iteration from gamma = lam decreases monotonically onto the
    largest fixed point. Near lam = 1 that convergence is sublinear, so the
    stopping point is then certified: the sign of the residual on (0, gamma]
    decides whether a positive root exists (polished with Brent) or the
    largest fixed point is 0.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return ScalarChannelState(0.0, 0.0, 1.0, 0.0, 0.0, 0)
    g = float(lam)
    for it in range(1, MAX_ITER + 1):
        target = lam * (1 - scalar_mmse(g))
        if abs(target - g) < tol:
            break
        g = (1 - damping) * g + damping * target
    else:
        raise NumericalError(f"fixed point for lambda={lam} did not converge in {MAX_ITER} iterations")

    root = 0.0
    if g > ZERO_RESOLUTION:
        grid = np.geomspace(ZERO_RESOLUTION, g, 200)
        res = np.array([_residual(x, lam) for x in grid])
        pos = np.flatnonzero(res > 0)
        if pos.size:
            j = pos[-1]
            if j + 1 < grid.size:
                root = brentq(_residual, grid[j], grid[j + 1], args=(lam,), xtol=1e-14)
            else:
                root = g
    residual = abs(_residual(root, lam))
    if residual >= tol:
        raise NumericalError(f"fixed-point residual {residual:.3g} for lambda={lam}")
    return ScalarChannelState(
        lam=float(lam),
        gamma_star=float(root),
        mmse_limit=1.0 - (root / lam) ** 2,
        mi_limit=psi(root, lam),
        residual=residual,
        iterations=it,
    )
