"""Confusion matrices, accuracy ratios and mutual-information fairness scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .params import GenerativeParams, OrderParams, SaddleSolution

MI_CRITERIA = (
    "statistical_parity",
    "equal_opportunity",
    "equal_accuracy",
    "equal_odds",
    "predicted_parity_1",
    "predicted_parity_10",
)

_DEGENERATE_VAR = 1e-14
_TAIL = 10.0  # integration window in teacher-noise standard deviations


def _h(x):
    return 0.5 * erfc(x / math.sqrt(2.0))


@dataclass
class JointConfusion:
    """Joint probabilities p(y, yhat) conditional on one group.

    ``table[i, j]`` with index 0 for +1 and 1 for -1, rows true label,
    columns prediction.  Entries sum to one.
    """

    table: np.ndarray

    @staticmethod
    def _idx(v: int) -> int:
        return 0 if v > 0 else 1

    def p(self, y: int, yhat: int) -> float:
        return float(self.table[self._idx(y), self._idx(yhat)])

    @property
    def accuracy(self) -> float:
        return float(self.table[0, 0] + self.table[1, 1])

    def label_marginal(self, y: int) -> float:
        return float(self.table[self._idx(y)].sum())

    def pred_marginal(self, yhat: int) -> float:
        return float(self.table[:, self._idx(yhat)].sum())


@dataclass
class FairnessReport:
    """Per-group accuracies, their ratio, and the MI score of each criterion (nats)."""

    acc_plus: float
    acc_minus: float
    disparate_impact: float
    mi: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "acc_plus": self.acc_plus,
            "acc_minus": self.acc_minus,
            "disparate_impact": self.disparate_impact,
            "mi": dict(self.mi),
        }


def _gauss_legendre(lo: float, hi: float, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def confusion_from_theta(
    theta: OrderParams, gen: GenerativeParams, c: int, order: int = 120
) -> JointConfusion:
    """Analytic joint confusion of one classifier on group c.

    The teacher-noise integral is split exactly at the labelling threshold, so
    the step function never enters the quadrature; each smooth piece is handled
    with Gauss-Legendre of the given order.
    """
    delta = gen.delta(c)
    q, r, m, b = theta.q_self, theta.r(c), theta.m, theta.b
    var = q - r * r
    u0 = -(c * gen.m_tilde(c) + gen.b_tilde(c)) / math.sqrt(delta)

    table = np.zeros((2, 2))
    for i, y in enumerate((+1, -1)):
        lo, hi = (max(u0, -_TAIL), _TAIL) if y > 0 else (-_TAIL, min(u0, _TAIL))
        if lo >= hi:
            continue
        u, w = _gauss_legendre(lo, hi, order)
        phi = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        mean = math.sqrt(delta) * r * u + c * m + b
        for j, yhat in enumerate((+1, -1)):
            if var <= _DEGENERATE_VAR:
                h = np.where(-yhat * mean < 0, 1.0, 0.0)
                h = np.where(mean == 0.0, 0.5, h)
            else:
                h = _h(-yhat * mean / math.sqrt(delta * var))
            table[i, j] = float(np.dot(w, phi * h))
    return JointConfusion(table=table)


def confusion_theory(
    sol: SaddleSolution, gen: GenerativeParams, s: int, c: int, order: int = 120
) -> JointConfusion:
    return confusion_from_theta(sol.students[s], gen, c, order)


def generalisation_error(
    conf_plus: JointConfusion, conf_minus: JointConfusion, gen: GenerativeParams
) -> float:
    """Misclassification probability under the group mixture."""
    err_p = conf_plus.p(+1, -1) + conf_plus.p(-1, +1)
    err_m = conf_minus.p(+1, -1) + conf_minus.p(-1, +1)
    return gen.rho * err_p + (1.0 - gen.rho) * err_m


def label_frequency(gen: GenerativeParams) -> float:
    """P(Y = 1) under the generative model (unit teacher norm)."""
    fp = _h(-(gen.m_tilde_plus + gen.b_tilde_plus) / math.sqrt(gen.delta_plus))
    fm = _h((gen.m_tilde_minus - gen.b_tilde_minus) / math.sqrt(gen.delta_minus))
    return gen.rho * fp + (1.0 - gen.rho) * fm


def disparate_impact(conf_plus: JointConfusion, conf_minus: JointConfusion) -> float:
    acc_m = conf_minus.accuracy
    if acc_m == 0.0:
        return math.inf
    return conf_plus.accuracy / acc_m


def _mi_joint(p: np.ndarray) -> float:
    """Mutual information of a joint probability table, 0*log(0) := 0."""
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if total <= 0.0:
        return 0.0
    p = p / total
    pr = p.sum(axis=1, keepdims=True)
    pc = p.sum(axis=0, keepdims=True)
    mask = p > 0.0
    prod = (pr * pc)[mask]
    return float(np.sum(p[mask] * np.log(p[mask] / prod)))


def _group_joint(conf_plus, conf_minus, rho):
    """p(y, yhat, c) as a pair of weighted 2x2 tables keyed by group."""
    return {+1: rho * conf_plus.table, -1: (1.0 - rho) * conf_minus.table}


def mutual_information(
    criterion: str,
    conf_plus: JointConfusion,
    conf_minus: JointConfusion,
    rho: float,
) -> float:
    """MI (nats) between the criterion's classification event and the group.

    Conditional criteria use the conditional MI; the value is zero exactly when
    the corresponding fairness condition holds.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    joint = _group_joint(conf_plus, conf_minus, rho)

    if criterion == "statistical_parity":
        # rows yhat, columns group
        p = np.array([[joint[c][:, i].sum() for c in (+1, -1)] for i in range(2)])
        return _mi_joint(p)
    if criterion == "equal_opportunity":
        p = np.array([[joint[c][0, i] for c in (+1, -1)] for i in range(2)])
        return _mi_joint(p)
    if criterion == "equal_accuracy":
        p = np.array(
            [
                [joint[c][0, 0] + joint[c][1, 1] for c in (+1, -1)],
                [joint[c][0, 1] + joint[c][1, 0] for c in (+1, -1)],
            ]
        )
        return _mi_joint(p)
    if criterion == "equal_odds":
        out = 0.0
        for row in range(2):  # condition on Y
            p = np.array([[joint[c][row, i] for c in (+1, -1)] for i in range(2)])
            out += p.sum() * _mi_joint(p)
        return out
    if criterion == "predicted_parity_1":
        p = np.array([[joint[c][i, 0] for c in (+1, -1)] for i in range(2)])
        return _mi_joint(p)
    if criterion == "predicted_parity_10":
        out = 0.0
        for col in range(2):  # condition on Yhat
            p = np.array([[joint[c][i, col] for c in (+1, -1)] for i in range(2)])
            out += p.sum() * _mi_joint(p)
        return out
    raise ValueError(f"unknown fairness criterion {criterion!r}")


def report_from_confusions(
    conf_plus: JointConfusion, conf_minus: JointConfusion, rho: float
) -> FairnessReport:
    return FairnessReport(
        acc_plus=conf_plus.accuracy,
        acc_minus=conf_minus.accuracy,
        disparate_impact=disparate_impact(conf_plus, conf_minus),
        mi={
            crit: mutual_information(crit, conf_plus, conf_minus, rho)
            for crit in MI_CRITERIA
        },
    )


def fairness_report(
    sol: SaddleSolution, gen: GenerativeParams, s: int = 0, order: int = 120
) -> FairnessReport:
    conf_p = confusion_theory(sol, gen, s, +1, order)
    conf_m = confusion_theory(sol, gen, s, -1, order)
    return report_from_confusions(conf_p, conf_m, gen.rho)
