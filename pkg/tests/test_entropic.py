"""Closed-form entropic updates against finite differences of the potential."""

import numpy as np
import pytest

from tmix.params import ConjugateParams, GenerativeParams, PoleError
from tmix.replica.entropic import (
    entropic_potential_coupled,
    entropic_potential_single,
    entropic_updates,
)


def _random_conj(rng, scale=0.5):
    return ConjugateParams(
        q_hat=float(rng.uniform(0.0, scale)),
        m_hat=float(rng.normal(scale=scale)),
        r_hat_plus=float(rng.normal(scale=scale)),
        r_hat_minus=float(rng.normal(scale=scale)),
        delta_q_hat=float(rng.uniform(0.1, 2.0)),
    )


def _fd(fun, conj, name, h=1e-6):
    import dataclasses

    up = dataclasses.replace(conj, **{name: getattr(conj, name) + h})
    dn = dataclasses.replace(conj, **{name: getattr(conj, name) - h})
    return (fun(up) - fun(dn)) / (2.0 * h)


GEN = GenerativeParams(m_tilde_plus=0.3, m_tilde_minus=-0.1, q_teacher=0.5)


def test_single_updates_are_potential_gradients():
    """The closed-form order parameters must equal the derivatives of the
    single-student potential: m = dg/dm_hat, R_c = dg/dr_hat_c,
    Q = -2 dg/d(delta_q_hat), delta_q = 2 dg/dq_hat."""
    rng = np.random.default_rng(21)
    lam = 0.3
    for _ in range(8):
        conj = _random_conj(rng)
        fun = lambda cj: entropic_potential_single(cj, lam, GEN)
        th = entropic_updates([conj], lam, 0.0, GEN)[0]
        assert th.m == pytest.approx(_fd(fun, conj, "m_hat"), rel=1e-6, abs=1e-8)
        assert th.r_plus == pytest.approx(_fd(fun, conj, "r_hat_plus"), rel=1e-6, abs=1e-8)
        assert th.r_minus == pytest.approx(_fd(fun, conj, "r_hat_minus"), rel=1e-6, abs=1e-8)
        assert th.q_self == pytest.approx(-2.0 * _fd(fun, conj, "delta_q_hat"),
                                          rel=1e-5, abs=1e-7)
        assert th.delta_q == pytest.approx(2.0 * _fd(fun, conj, "q_hat"),
                                           rel=1e-6, abs=1e-8)


def test_coupled_updates_are_potential_gradients():
    rng = np.random.default_rng(22)
    lam, gam = 0.2, 0.7
    for _ in range(5):
        conjs = [_random_conj(rng), _random_conj(rng)]
        th = entropic_updates(conjs, lam, gam, GEN)
        for s in range(2):
            def fun(cj, s=s):
                rep = [cj if i == s else conjs[i] for i in range(2)]
                return entropic_potential_coupled(rep, lam, gam, GEN)

            c = conjs[s]
            assert th[s].m == pytest.approx(_fd(fun, c, "m_hat"), rel=1e-6, abs=1e-8)
            assert th[s].r_plus == pytest.approx(_fd(fun, c, "r_hat_plus"),
                                                 rel=1e-6, abs=1e-8)
            assert th[s].r_minus == pytest.approx(_fd(fun, c, "r_hat_minus"),
                                                  rel=1e-6, abs=1e-8)
            assert th[s].q_self == pytest.approx(-2.0 * _fd(fun, c, "delta_q_hat"),
                                                 rel=1e-5, abs=1e-7)
            assert th[s].delta_q == pytest.approx(2.0 * _fd(fun, c, "q_hat"),
                                                  rel=1e-6, abs=1e-8)


def test_gamma_zero_reduces_to_single():
    rng = np.random.default_rng(23)
    for _ in range(10):
        conjs = [_random_conj(rng), _random_conj(rng)]
        lam = float(rng.uniform(0.05, 1.0))
        pair = entropic_updates(conjs, lam, 0.0, GEN)
        for s in range(2):
            solo = entropic_updates([conjs[s]], lam, 0.0, GEN)[0]
            np.testing.assert_allclose(pair[s].as_array(), solo.as_array(),
                                       atol=1e-12)
        g_pair = entropic_potential_coupled(conjs, lam, 0.0, GEN)
        g_solo = sum(entropic_potential_single(c, lam, GEN) for c in conjs)
        assert g_pair == pytest.approx(g_solo, abs=1e-12)


def test_zero_conjugates_give_ridge_solution():
    # with no data signal the student is pure ridge: delta_q = 1/lambda,
    # everything else 0 except Q = q_hat / lambda^2 scaling
    conj = ConjugateParams(q_hat=0.0, m_hat=0.0, r_hat_plus=0.0,
                           r_hat_minus=0.0, delta_q_hat=0.0)
    th = entropic_updates([conj], 0.5, 0.0, GEN)[0]
    assert th.delta_q == pytest.approx(2.0)
    assert th.m == 0.0 and th.r_plus == 0.0 and th.q_self == 0.0


def test_pole_raises():
    conj = ConjugateParams(delta_q_hat=-1.0)
    with pytest.raises(PoleError):
        entropic_updates([conj], 0.5, 0.0, GEN)
    with pytest.raises(PoleError):
        entropic_potential_single(conj, 0.5, GEN)
    # coupled: determinant closes when gamma^2 >= E1 E2
    ok = ConjugateParams(delta_q_hat=0.1)
    with pytest.raises(PoleError):
        entropic_potential_coupled([ok, ok], 0.0, -0.2, GEN)
