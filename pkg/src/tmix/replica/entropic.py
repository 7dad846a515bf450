"""Closed-form prior/regulariser channel of the saddle-point system.

The coupled two-student expression comes from solving the local quadratic
problem max_{w1,w2} sum_s [-(lambda+dqh_s)/2 w_s^2 + h_s w_s] - gamma/2 (w1-w2)^2
with Gaussian local fields h_s of mean A_s and the teacher-induced covariance.
At gamma = 0 it reduces exactly to two copies of the single-student form.
"""

from __future__ import annotations

import numpy as np

from ..params import ConjugateParams, GenerativeParams, OrderParams, PoleError


def _field_stats(conj: ConjugateParams, gen: GenerativeParams):
    """Mean A and teacher-coupling coefficients of one student's local field."""
    mp, mm, qt = gen.m_tilde_plus, gen.m_tilde_minus, gen.q_teacher
    a = conj.m_hat + mp * conj.r_hat_plus + mm * conj.r_hat_minus
    return a, mp, mm, qt


def _cross_moment(c1: ConjugateParams, c2: ConjugateParams, gen: GenerativeParams,
                  with_qhat: bool) -> float:
    """E[h_s h_s'] of the local fields (q_hat term only on the diagonal)."""
    a1 = c1.m_hat + gen.m_tilde_plus * c1.r_hat_plus + gen.m_tilde_minus * c1.r_hat_minus
    a2 = c2.m_hat + gen.m_tilde_plus * c2.r_hat_plus + gen.m_tilde_minus * c2.r_hat_minus
    qc = gen.q_teacher - gen.m_tilde_plus * gen.m_tilde_minus
    out = a1 * a2
    out += (1.0 - gen.m_tilde_plus**2) * c1.r_hat_plus * c2.r_hat_plus
    out += (1.0 - gen.m_tilde_minus**2) * c1.r_hat_minus * c2.r_hat_minus
    if c1 is c2:
        out += c1.q_hat + 2.0 * qc * c1.r_hat_plus * c1.r_hat_minus
    else:
        out += qc * (c1.r_hat_plus * c2.r_hat_minus + c1.r_hat_minus * c2.r_hat_plus)
        if with_qhat:
            raise AssertionError("q_hat has no cross-student component")
    return out


def _teacher_moment(conj: ConjugateParams, c: int, gen: GenerativeParams) -> float:
    """E[h_s T_c] for one student."""
    a, mp, mm, qt = _field_stats(conj, gen)
    mt = gen.m_tilde(c)
    r_same = conj.r_hat(c)
    r_other = conj.r_hat(-c)
    return a * mt + (1.0 - mt * mt) * r_same + (qt - mp * mm) * r_other


def entropic_updates(
    conjugates: list[ConjugateParams],
    lambda_l2: float,
    gamma: float,
    gen: GenerativeParams,
) -> list[OrderParams]:
    """Order parameters (bias left at 0) from the conjugates.

    Raises PoleError when an entropic denominator closes.
    """
    n = len(conjugates)
    if n == 1:
        conjugates = [conjugates[0], ConjugateParams()]
        gamma = 0.0
    e = [lambda_l2 + gamma + cj.delta_q_hat for cj in conjugates]
    if min(e) <= 0.0:
        raise PoleError(f"lambda + gamma + delta_q_hat must be positive, got {e}")
    det = e[0] * e[1] - gamma * gamma
    if det <= 0.0:
        raise PoleError(f"entropic denominator {det:.3e} <= 0")

    a = [_field_stats(cj, gen)[0] for cj in conjugates]
    out = []
    for s in range(2 if n == 2 else 1):
        o = 1 - s
        m = (e[o] * a[s] + gamma * a[o]) / det
        r = {}
        for c in (+1, -1):
            b_s = _teacher_moment(conjugates[s], c, gen)
            b_o = _teacher_moment(conjugates[o], c, gen)
            r[c] = (e[o] * b_s + gamma * b_o) / det
        c_ss = _cross_moment(conjugates[s], conjugates[s], gen, with_qhat=True)
        c_oo = _cross_moment(conjugates[o], conjugates[o], gen, with_qhat=True)
        c_so = _cross_moment(conjugates[s], conjugates[o], gen, with_qhat=False)
        q = (e[o] ** 2 * c_ss + 2.0 * gamma * e[o] * c_so + gamma**2 * c_oo) / det**2
        dq = e[o] / det
        out.append(OrderParams(q_self=q, m=m, r_plus=r[+1], r_minus=r[-1], delta_q=dq, b=0.0))
    return out


def entropic_potential_single(
    conj: ConjugateParams, lambda_l2: float, gen: GenerativeParams
) -> float:
    """Closed-form single-student entropic potential s(conjugates; lambda)."""
    e = lambda_l2 + conj.delta_q_hat
    if e <= 0.0:
        raise PoleError("lambda + delta_q_hat must be positive")
    return _cross_moment(conj, conj, gen, with_qhat=True) / (2.0 * e)


def entropic_potential_coupled(
    conjugates: list[ConjugateParams],
    lambda_l2: float,
    gamma: float,
    gen: GenerativeParams,
) -> float:
    """Closed-form two-student entropic potential with elastic coupling."""
    e = [lambda_l2 + gamma + cj.delta_q_hat for cj in conjugates]
    det = e[0] * e[1] - gamma * gamma
    if min(e) <= 0.0 or det <= 0.0:
        raise PoleError("entropic denominator closed")
    c11 = _cross_moment(conjugates[0], conjugates[0], gen, with_qhat=True)
    c22 = _cross_moment(conjugates[1], conjugates[1], gen, with_qhat=True)
    c12 = _cross_moment(conjugates[0], conjugates[1], gen, with_qhat=False)
    return (e[1] * c11 + e[0] * c22 + 2.0 * gamma * c12) / (2.0 * det)
