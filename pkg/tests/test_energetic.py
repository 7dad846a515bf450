"""Energetic channel against Monte Carlo and finite-difference oracles."""

import math

import numpy as np
import pytest

from tmix.params import (
    GenerativeParams,
    NoBracketError,
    OrderParams,
    ReweighWeights,
    SolverConfig,
)
from tmix.replica.energetic import (
    Channel,
    bias_solve_channels,
    channel_bias_derivative,
    channel_energy,
    conjugate_updates_channels,
    conjugate_updates_envelope,
    coupled_channels,
    energetic_term,
    reweigh_corrupted_channels,
    single_student_channels,
)
from tmix.replica.kernels import prox_batch


def _random_point(rng):
    q = rng.uniform(0.3, 3.0)
    r = rng.uniform(-0.8, 0.8) * math.sqrt(q)
    return dict(
        q=q, r=r,
        m=rng.uniform(-0.5, 0.5),
        dq=rng.uniform(0.5, 10.0),
        b=rng.uniform(-0.8, 0.8),
        delta=rng.uniform(0.2, 2.5),
        mt=rng.uniform(-0.5, 0.5),
        bt=rng.uniform(-0.5, 0.5),
        w_pos=rng.uniform(0.2, 1.8),
        w_neg=rng.uniform(0.2, 1.8),
        c=int(rng.choice([-1, 1])),
    )


def _mc_energy(p, n=10**6, seed=0):
    """Monte Carlo oracle for the channel energy, with its standard error.

    Samples the student noise field z, weighs each label branch by the exact
    conditional label probability, and evaluates the inner maximisation with
    the same proximal kernel (which test_kernels checks independently).
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    c, delta = p["c"], p["delta"]
    cmb = c * p["mt"] + p["bt"]
    var = p["q"] - p["r"] ** 2
    a = math.sqrt(delta * p["dq"])
    t = math.sqrt(delta * p["q"]) * z + c * p["m"] + p["b"]
    total = np.zeros(n)
    from scipy.special import erfc

    for y, w in ((+1, p["w_pos"]), (-1, p["w_neg"])):
        num = -y * (math.sqrt(p["q"]) * cmb + math.sqrt(delta) * p["r"] * z)
        h = 0.5 * erfc(num / math.sqrt(2.0 * delta * var))
        _, val = prox_batch(y, a, t, w)
        total += h * val
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(n))


@pytest.mark.parametrize("k", range(20))
def test_quadrature_matches_monte_carlo(k):
    rng = np.random.default_rng(1000 + k)
    p = _random_point(rng)
    gen = GenerativeParams(
        delta_plus=p["delta"], delta_minus=p["delta"],
        m_tilde_plus=p["mt"], m_tilde_minus=p["mt"],
        b_tilde_plus=p["bt"], b_tilde_minus=p["bt"], q_teacher=1.0,
    )
    chan = Channel(1.0, p["c"], p["w_pos"], p["w_neg"])
    quad = channel_energy(p["q"], p["m"], p["r"], p["dq"], p["b"], chan, gen, 120)
    mc, se = _mc_energy(p, seed=2000 + k)
    assert abs(quad - mc) < 3.0 * se + 1e-9


def test_envelope_matches_finite_differences():
    rng = np.random.default_rng(5)
    gen = GenerativeParams(m_tilde_plus=0.3, m_tilde_minus=0.1, q_teacher=0.7,
                           b_tilde_plus=0.2, b_tilde_minus=-0.1)
    cfg = SolverConfig()
    for _ in range(5):
        theta = OrderParams(
            q_self=rng.uniform(0.5, 2.0), m=rng.uniform(-0.3, 0.3),
            r_plus=rng.uniform(-0.3, 0.3), r_minus=rng.uniform(-0.3, 0.3),
            delta_q=rng.uniform(1.0, 8.0), b=rng.uniform(-0.5, 0.5),
        )
        chans = single_student_channels(gen, ReweighWeights(0.7, 0.4))[0]
        conj = conjugate_updates_channels(theta, chans, gen, cfg)
        q_hat, m_hat = conjugate_updates_envelope(theta, chans, gen, cfg)
        assert conj.q_hat == pytest.approx(q_hat, rel=1e-4, abs=1e-7)
        assert conj.m_hat == pytest.approx(m_hat, rel=1e-4, abs=1e-7)


def test_bias_derivative_is_energy_gradient():
    rng = np.random.default_rng(9)
    gen = GenerativeParams(m_tilde_plus=0.2, m_tilde_minus=0.2, q_teacher=0.9)
    chan = Channel(1.0, -1, 0.8, 1.2)
    for _ in range(5):
        p = dict(q=rng.uniform(0.5, 2.0), m=rng.uniform(-0.3, 0.3),
                 r=rng.uniform(-0.5, 0.5), dq=rng.uniform(1.0, 6.0),
                 b=rng.uniform(-0.5, 0.5))
        h = 1e-6
        up = channel_energy(p["q"], p["m"], p["r"], p["dq"], p["b"] + h, chan, gen, 120)
        dn = channel_energy(p["q"], p["m"], p["r"], p["dq"], p["b"] - h, chan, gen, 120)
        grad = channel_bias_derivative(p["q"], p["m"], p["r"], p["dq"], p["b"],
                                       chan, gen, 120)
        assert grad == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-7)


def test_bias_solve_zeroes_the_derivative():
    gen = GenerativeParams(rho=0.3, m_tilde_plus=0.2, m_tilde_minus=0.2,
                           q_teacher=0.8, b_tilde_plus=0.3, b_tilde_minus=0.3)
    chans = single_student_channels(gen, ReweighWeights())[0]
    theta = OrderParams(q_self=1.0, m=0.1, r_plus=0.4, r_minus=0.4, delta_q=3.0, b=0.0)
    cfg = SolverConfig()
    b = bias_solve_channels(theta, chans, gen, cfg)
    total = sum(
        ch.alpha_share * channel_bias_derivative(
            theta.q_self, theta.m, theta.r(ch.group), theta.delta_q, b, ch, gen, 120
        )
        for ch in chans
    )
    assert abs(total) < 1e-10


def test_bias_solve_no_bracket():
    # all the loss weight on one label drives the always-one-label regime
    gen = GenerativeParams(rho=0.3, m_tilde_plus=0.2, m_tilde_minus=0.2,
                           q_teacher=0.8)
    chans = single_student_channels(gen, ReweighWeights(0.5, 1.0))[0]
    theta = OrderParams(q_self=1.0, m=0.0, r_plus=0.2, r_minus=0.2, delta_q=2.0, b=0.0)
    with pytest.raises(NoBracketError):
        bias_solve_channels(theta, chans, gen, SolverConfig())


def test_channel_layouts():
    gen = GenerativeParams(rho=0.3, alpha=2.0)
    rw = ReweighWeights(0.6, 0.5)
    single = single_student_channels(gen, rw)
    assert len(single) == 1 and len(single[0]) == 2
    assert sum(c.alpha_share for c in single[0]) == pytest.approx(2.0)

    pair = coupled_channels(gen, rw, eta=0.8)
    assert len(pair) == 2
    for chans in pair:
        assert {c.group for c in chans} == {+1, -1}
    # student 0 (assessed +) sees 0.8 of group + and 0.2 of group -
    share = {c.group: c.alpha_share for c in pair[0]}
    assert share[+1] == pytest.approx(2.0 * 0.3 * 0.8)
    assert share[-1] == pytest.approx(2.0 * 0.7 * 0.2)
    # exposure totals preserve the whole dataset
    total = sum(c.alpha_share for chans in pair for c in chans)
    assert total == pytest.approx(2.0)

    corr = reweigh_corrupted_channels(gen, rw, eta=0.75)
    assert len(corr) == 1 and len(corr[0]) == 4
    assert sum(c.alpha_share for c in corr[0]) == pytest.approx(2.0)
    # eta = 1 collapses to the plain single-student layout
    clean = reweigh_corrupted_channels(gen, rw, eta=1.0)
    active = [c for c in clean[0] if c.alpha_share > 0]
    for c in active:
        ref = [s for s in single[0] if s.group == c.group][0]
        assert (c.w_pos, c.w_neg) == (ref.w_pos, ref.w_neg)
        assert c.alpha_share == pytest.approx(ref.alpha_share)


def test_energetic_term_degenerate_alignment():
    # r^2 = q collapses the label probability to a step; stays finite
    gen = GenerativeParams(m_tilde_plus=0.0, m_tilde_minus=0.0, q_teacher=1.0)
    theta = OrderParams(q_self=1.0, m=0.0, r_plus=1.0, r_minus=1.0, delta_q=2.0, b=0.0)
    val = energetic_term(theta, gen, ReweighWeights(), +1)
    assert np.isfinite(val)
