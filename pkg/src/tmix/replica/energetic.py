"""Data-dependent channel of the saddle-point system.

Everything here is expressed per *channel*: one (exposure, group, loss-weight
row) triple.  A plain single classifier has two channels (one per group); the
coupled pair and the corrupted-membership variants are just different channel
lists, so the same code serves all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from ..params import (
    ConjugateParams,
    GenerativeParams,
    NoBracketError,
    OrderParams,
    ReweighWeights,
    SolverConfig,
)
from .kernels import prox_batch

_SQRT_PI = math.sqrt(math.pi)
DEGENERATE_VAR = 1e-14


@dataclass(frozen=True)
class Channel:
    """One slice of data exposure: alpha_share * d samples of group ``group``,
    loss-weighted with (w_pos, w_neg) for labels (+1, -1)."""

    alpha_share: float
    group: int
    w_pos: float
    w_neg: float

    def weight(self, y: int) -> float:
        return self.w_pos if y > 0 else self.w_neg


def single_student_channels(
    gen: GenerativeParams, rw: ReweighWeights
) -> list[list[Channel]]:
    """One student exposed to the full dataset."""
    return [[
        Channel(gen.alpha * gen.rho, +1, *rw.row(+1)),
        Channel(gen.alpha * (1.0 - gen.rho), -1, *rw.row(-1)),
    ]]


def coupled_channels(
    gen: GenerativeParams,
    rw: ReweighWeights,
    eta: float = 1.0,
    corrupt_weights: bool = True,
) -> list[list[Channel]]:
    """Two students fed complementary slices; a sample's true group is matched
    to its specialist student with probability ``eta``.  Loss weights follow the
    assessed (routing) group when ``corrupt_weights`` is set, the true group
    otherwise."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    out = []
    for assessed in (+1, -1):
        chans = []
        for c in (+1, -1):
            p_routed = eta if c == assessed else 1.0 - eta
            share = gen.alpha * gen.group_prob(c) * p_routed
            row = rw.row(assessed) if corrupt_weights else rw.row(c)
            chans.append(Channel(share, c, *row))
        out.append(chans)
    return out


def reweigh_corrupted_channels(
    gen: GenerativeParams, rw: ReweighWeights, eta: float
) -> list[list[Channel]]:
    """Single student, but the reweighing uses the assessed group, which matches
    the true one only with probability ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    chans = []
    for c in (+1, -1):
        for assessed in (+1, -1):
            p = eta if assessed == c else 1.0 - eta
            chans.append(Channel(gen.alpha * gen.group_prob(c) * p, c, *rw.row(assessed)))
    return [chans]


@lru_cache(maxsize=8)
def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes z and weights for E_{z~N(0,1)}[f(z)] ~ sum_i w_i f(z_i)."""
    x, w = np.polynomial.hermite.hermgauss(order)
    return np.sqrt(2.0) * x, w / _SQRT_PI


def _h_tail(arg: np.ndarray) -> np.ndarray:
    from scipy.special import erfc

    return 0.5 * erfc(arg / math.sqrt(2.0))


def _label_prob(y, z, q, r, cmb, delta):
    """P(teacher label = y | student noise field z) at the quadrature nodes."""
    var = q - r * r
    num = -y * (math.sqrt(max(q, 0.0)) * cmb + math.sqrt(delta) * r * z)
    if var <= DEGENERATE_VAR:
        # perfectly aligned limit: H collapses to a step
        out = np.where(num < 0, 1.0, 0.0)
        return np.where(num == 0.0, 0.5, out)
    return _h_tail(num / math.sqrt(delta * var))


def channel_energy(
    q: float,
    m: float,
    r: float,
    dq: float,
    b: float,
    chan: Channel,
    gen: GenerativeParams,
    order: int,
    prox_tol: float = 1e-12,
) -> float:
    """Per-sample energetic value e for one channel at the given descriptors."""
    c = chan.group
    delta = gen.delta(c)
    cmb = c * gen.m_tilde(c) + gen.b_tilde(c)
    z, w = gauss_hermite(order)
    t = math.sqrt(delta * max(q, 0.0)) * z + c * m + b
    a = math.sqrt(delta * dq)
    total = 0.0
    for y in (+1, -1):
        h = _label_prob(y, z, q, r, cmb, delta)
        _, val = prox_batch(y, a, t, chan.weight(y), tol=prox_tol)
        total += float(np.dot(w, h * val))
    return total


def channel_bias_derivative(
    q, m, r, dq, b, chan: Channel, gen: GenerativeParams, order: int, prox_tol=1e-12
) -> float:
    """d e / d b for one channel, via the envelope theorem: at the proximal
    optimum, d M_E / d b = lam* / sqrt(delta * dq)."""
    c = chan.group
    delta = gen.delta(c)
    cmb = c * gen.m_tilde(c) + gen.b_tilde(c)
    z, w = gauss_hermite(order)
    t = math.sqrt(delta * max(q, 0.0)) * z + c * m + b
    a = math.sqrt(delta * dq)
    if a == 0.0:
        raise ValueError("delta_q must be positive for the bias derivative")
    total = 0.0
    for y in (+1, -1):
        h = _label_prob(y, z, q, r, cmb, delta)
        lam, _ = prox_batch(y, a, t, chan.weight(y), tol=prox_tol)
        total += float(np.dot(w, h * lam)) / a
    return total


def energetic_term(
    theta: OrderParams,
    gen: GenerativeParams,
    rw: ReweighWeights,
    c: int,
    order: int = 120,
    prox_tol: float = 1e-12,
) -> float:
    """Energetic value e(Theta; Delta_c) of one group for a single student."""
    chan = Channel(1.0, c, *rw.row(c))
    return channel_energy(
        theta.q_self, theta.m, theta.r(c), theta.delta_q, theta.b,
        chan, gen, order, prox_tol,
    )


def conjugate_updates_channels(
    theta: OrderParams,
    channels: list[Channel],
    gen: GenerativeParams,
    cfg: SolverConfig,
) -> ConjugateParams:
    """Conjugate parameters of one student from central finite differences of
    the summed channel energies.

    Sign conventions follow the extremisation of the free entropy:
    q_hat = 2 sum_ch a_ch de/d(delta_q), delta_q_hat = -2 sum_ch a_ch de/dQ,
    m_hat = sum_ch a_ch de/dm, r_hat_c = sum_ch a_ch de/dR_c.
    """
    order, tol, h0 = cfg.quad_order, cfg.prox_tol, cfg.fd_step
    q, m, dq, b = theta.q_self, theta.m, theta.delta_q, theta.b

    def d_e(chan, which):
        base = {"q": q, "m": m, "r": theta.r(chan.group), "dq": dq}
        h = h0 * max(1.0, abs(base[which]))
        vals = []
        for sgn in (+1.0, -1.0):
            p = dict(base)
            p[which] += sgn * h
            vals.append(
                channel_energy(p["q"], p["m"], p["r"], p["dq"], b, chan, gen, order, tol)
            )
        return (vals[0] - vals[1]) / (2.0 * h)

    q_hat = m_hat = dq_hat = 0.0
    r_hat = {+1: 0.0, -1: 0.0}
    for chan in channels:
        a = chan.alpha_share
        if a == 0.0:
            continue
        q_hat += 2.0 * a * d_e(chan, "dq")
        m_hat += a * d_e(chan, "m")
        dq_hat += -2.0 * a * d_e(chan, "q")
        r_hat[chan.group] += a * d_e(chan, "r")
    return ConjugateParams(
        q_hat=q_hat,
        m_hat=m_hat,
        r_hat_plus=r_hat[+1],
        r_hat_minus=r_hat[-1],
        delta_q_hat=dq_hat,
    )


def conjugate_updates_envelope(
    theta: OrderParams,
    channels: list[Channel],
    gen: GenerativeParams,
    cfg: SolverConfig,
) -> tuple[float, float]:
    """Analytic fast path for (q_hat, m_hat) via the envelope theorem:
    d M_E/d(delta_q) = lam*^2 / (2 delta_q), d M_E/dm = c lam* / sqrt(delta dq).
    The label-probability factor does not depend on delta_q or m."""
    order, tol = cfg.quad_order, cfg.prox_tol
    z, w = gauss_hermite(order)
    q, m, dq, b = theta.q_self, theta.m, theta.delta_q, theta.b
    q_hat = m_hat = 0.0
    for chan in channels:
        if chan.alpha_share == 0.0:
            continue
        c = chan.group
        delta = gen.delta(c)
        cmb = c * gen.m_tilde(c) + gen.b_tilde(c)
        t = math.sqrt(delta * max(q, 0.0)) * z + c * m + b
        a = math.sqrt(delta * dq)
        for y in (+1, -1):
            h = _label_prob(y, z, q, theta.r(c), cmb, delta)
            lam, _ = prox_batch(y, a, t, chan.weight(y), tol=tol)
            q_hat += 2.0 * chan.alpha_share * float(np.dot(w, h * lam**2)) / (2.0 * dq)
            m_hat += chan.alpha_share * c * float(np.dot(w, h * lam)) / a
    return q_hat, m_hat


def bias_solve_channels(
    theta: OrderParams,
    channels: list[Channel],
    gen: GenerativeParams,
    cfg: SolverConfig,
    bracket_start: float = 5.0,
    bracket_cap: float = 80.0,
) -> float:
    """Bias with vanishing derivative of the total energetic term.

    The bracket is grown geometrically from +-bracket_start; if no sign change
    appears up to the cap the classifier is in the trivial always-one-label
    regime and NoBracketError is raised.
    """

    def df(b):
        return sum(
            ch.alpha_share
            * channel_bias_derivative(
                theta.q_self, theta.m, theta.r(ch.group), theta.delta_q, b,
                ch, gen, cfg.quad_order, cfg.prox_tol,
            )
            for ch in channels
            if ch.alpha_share > 0.0
        )

    span = bracket_start
    f_lo, f_hi = df(-span), df(span)
    # a strict sign change is required: the derivative underflows to 0.0 far
    # into the trivial regime, which is not a root
    while not f_lo * f_hi < 0.0:
        span *= 2.0
        if span > bracket_cap:
            raise NoBracketError(
                "no sign change of the bias stationarity condition up to "
                f"|b| = {bracket_cap}; trivial-classifier regime"
            )
        f_lo, f_hi = df(-span), df(span)
    return float(brentq(df, -span, span, xtol=1e-12, rtol=8.9e-16))
