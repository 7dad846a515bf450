"""Proximal kernel of the energetic channel.

For each quadrature node the solver needs the maximiser of

    phi(lam) = -lam^2/2 - weight * ell(y, a*lam + t),

with ell the logistic loss and a = sqrt(delta * delta_q).  phi is strictly
concave, so a safeguarded Newton iteration converges unconditionally.

Two interchangeable backends are provided: a numba-compiled scalar loop
(default) and a vectorised pure-numpy path.  Set TMIX_NO_NUMBA=1 before
import to force the numpy path; both agree to the stationarity tolerance.
"""

from __future__ import annotations

import math
import os

import numpy as np

USE_NUMBA = os.environ.get("TMIX_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# scalar implementation (numba path)
# ---------------------------------------------------------------------------

def _prox_scalar(y, a, t, weight, tol, max_iter):
    if weight == 0.0 or a == 0.0:
        val = 0.0
        if weight != 0.0:
            x = -y * t
            val = -weight * (max(x, 0.0) + math.log1p(math.exp(-abs(x))))
        return 0.0, val

    # stationarity: lam = weight * y * a * sigmoid(-y*(a*lam + t)),
    # so |lam*| < weight * |a|
    lim = weight * abs(a) + 1.0
    lo, hi = -lim, lim
    lam = 0.0
    g = 0.0
    dx_prev = hi - lo
    for _ in range(max_iter):
        u = y * (a * lam + t)
        if u >= 0.0:
            s = 1.0 / (1.0 + math.exp(-u))
        else:
            e = math.exp(u)
            s = e / (1.0 + e)
        sm = 1.0 - s  # sigmoid(-u)
        g = -lam + weight * y * a * sm
        if abs(g) <= tol:
            break
        if g > 0.0:
            lo = lam
        else:
            hi = lam
        gp = -1.0 - weight * a * a * s * sm
        step = lam - g / gp
        # bisect when the proposal leaves the bracket or is not shrinking
        # fast enough (Newton can two-cycle across the logistic's knee)
        if step <= lo or step >= hi or abs(2.0 * g) > abs(dx_prev * gp):
            step = 0.5 * (lo + hi)
        dx_prev = abs(step - lam)
        lam = step
    x = -y * (a * lam + t)
    loss = max(x, 0.0) + math.log1p(math.exp(-abs(x)))
    return lam, -0.5 * lam * lam - weight * loss


def _prox_batch_py(y, a, t, weight, tol, max_iter):
    lam = np.empty_like(t)
    val = np.empty_like(t)
    for i in range(t.shape[0]):
        lam[i], val[i] = _prox_scalar(y, a, t[i], weight, tol, max_iter)
    return lam, val


# ---------------------------------------------------------------------------
# vectorised implementation (numpy path)
# ---------------------------------------------------------------------------

def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus_np(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _prox_batch_np(y, a, t, weight, tol, max_iter):
    t = np.asarray(t, dtype=float)
    if weight == 0.0 or a == 0.0:
        lam = np.zeros_like(t)
        val = np.zeros_like(t) if weight == 0.0 else -weight * _softplus_np(-y * t)
        return lam, val

    lim = weight * abs(a) + 1.0
    lo = np.full_like(t, -lim)
    hi = np.full_like(t, lim)
    lam = np.zeros_like(t)
    dx_prev = np.full_like(t, hi[0] - lo[0])
    for _ in range(max_iter):
        s = _sigmoid_np(y * (a * lam + t))
        sm = 1.0 - s
        g = -lam + weight * y * a * sm
        if np.max(np.abs(g)) <= tol:
            break
        np.copyto(lo, lam, where=g > 0)
        np.copyto(hi, lam, where=g <= 0)
        gp = -1.0 - weight * a * a * s * sm
        step = lam - g / gp
        bad = (step <= lo) | (step >= hi) | (np.abs(2.0 * g) > np.abs(dx_prev * gp))
        step[bad] = 0.5 * (lo[bad] + hi[bad])
        dx_prev = np.abs(step - lam)
        lam = step
    val = -0.5 * lam * lam - weight * _softplus_np(-y * (a * lam + t))
    return lam, val


if USE_NUMBA:
    _prox_scalar_jit = numba.njit(cache=True)(_prox_scalar)

    @numba.njit(cache=True)
    def _prox_batch_impl(y, a, t, weight, tol, max_iter):
        lam = np.empty_like(t)
        val = np.empty_like(t)
        for i in range(t.shape[0]):
            lam[i], val[i] = _prox_scalar_jit(y, a, t[i], weight, tol, max_iter)
        return lam, val


def prox_batch(
    y: float,
    a: float,
    t: np.ndarray,
    weight: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximiser and value of phi(lam) for every base activation in ``t``.

    y is the label in {-1,+1}, a = sqrt(delta * delta_q), weight the loss
    reweighing factor.  Returns (lam_star, value) arrays.
    """
    t = np.ascontiguousarray(t, dtype=float)
    if USE_NUMBA:
        return _prox_batch_impl(float(y), float(a), t, float(weight), tol, max_iter)
    return _prox_batch_np(float(y), float(a), t, float(weight), tol, max_iter)
