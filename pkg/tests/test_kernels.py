"""Proximal kernel against brute-force oracles and the fallback backend."""

import math

import numpy as np
import pytest

from tmix.replica.kernels import _prox_batch_np, prox_batch


def _logistic(y, x):
    return math.log1p(math.exp(-y * x)) if y * x > -30 else -y * x


def _phi(lam, y, a, t, weight):
    return -0.5 * lam * lam - weight * _logistic(y, a * lam + t)


def _grid_oracle(y, a, t, weight):
    """Three-stage grid refinement of argmax phi, accurate to ~1e-8."""
    lim = weight * abs(a) + 1.0
    lo, hi = -lim, lim
    for _ in range(3):
        grid = np.linspace(lo, hi, 2001)
        vals = [_phi(g, y, a, t, weight) for g in grid]
        k = int(np.argmax(vals))
        step = grid[1] - grid[0]
        lo, hi = grid[k] - step, grid[k] + step
    return 0.5 * (lo + hi)


def test_matches_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(60):
        y = rng.choice([-1.0, 1.0])
        a = float(rng.uniform(0.05, 6.0))
        t = float(rng.normal(scale=4.0))
        w = float(rng.uniform(0.05, 3.0))
        lam, val = prox_batch(y, a, np.array([t]), w)
        ref = _grid_oracle(y, a, t, w)
        assert lam[0] == pytest.approx(ref, abs=1e-6)
        assert val[0] == pytest.approx(_phi(ref, y, a, t, w), abs=1e-10)


def test_stationarity():
    # lam* satisfies lam = w * y * a * sigmoid(-y (a lam + t))
    rng = np.random.default_rng(3)
    t = rng.normal(scale=5.0, size=500)
    for y in (1.0, -1.0):
        lam, _ = prox_batch(y, 1.7, t, 0.8)
        u = y * (1.7 * lam + t)
        resid = lam - 0.8 * y * 1.7 / (1.0 + np.exp(u))
        assert np.max(np.abs(resid)) < 1e-10


def test_backends_agree():
    rng = np.random.default_rng(11)
    t = rng.normal(scale=4.0, size=300)
    for y in (1.0, -1.0):
        for a, w in ((0.3, 1.0), (2.5, 0.1), (5.0, 2.0)):
            l1, v1 = prox_batch(y, a, t, w)
            l2, v2 = _prox_batch_np(y, a, t, w, 1e-12, 200)
            np.testing.assert_allclose(l1, l2, atol=1e-10)
            np.testing.assert_allclose(v1, v2, atol=1e-10)


def test_zero_weight_and_zero_slope():
    t = np.array([-2.0, 0.0, 3.0])
    lam, val = prox_batch(1.0, 1.0, t, 0.0)
    assert np.all(lam == 0.0) and np.all(val == 0.0)
    # a = 0: no lever on the loss, value is just the (weighted) loss at t
    lam, val = prox_batch(1.0, 0.0, t, 2.0)
    assert np.all(lam == 0.0)
    expected = -2.0 * np.log1p(np.exp(-t))
    np.testing.assert_allclose(val, expected, atol=1e-12)


def test_large_inputs_stay_finite():
    t = np.array([-500.0, 500.0])
    lam, val = prox_batch(1.0, 3.0, t, 1.0)
    assert np.all(np.isfinite(lam)) and np.all(np.isfinite(val))
    # easy side: loss ~ 0, so lam ~ 0
    assert abs(lam[1]) < 1e-8
