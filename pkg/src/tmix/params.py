"""Parameter containers shared across the data model, the trainer and the solver."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np


class InfeasibleGeometryError(ValueError):
    """The requested teacher overlaps do not admit a valid geometry."""


class PoleError(ArithmeticError):
    """Entropic denominator hit a pole (lambda + gamma + delta_q_hat <= 0)."""


class NoBracketError(RuntimeError):
    """Bias stationarity has no sign change: trivial-classifier regime."""


@dataclass
class GenerativeParams:
    """All parameters of the two-group generative distribution.

    Group + occurs with probability ``rho``; inputs of group c are Gaussian
    with variance ``delta_c`` around ``c * v / sqrt(d)``.  Labels come from a
    per-group linear rule with unit norm, overlap ``m_tilde_c`` with the shift
    direction, mutual overlap ``q_teacher`` and threshold ``b_tilde_c``.
    ``alpha`` is the samples-per-dimension ratio.
    """

    rho: float = 0.5
    delta_plus: float = 0.5
    delta_minus: float = 0.5
    m_tilde_plus: float = 0.0
    m_tilde_minus: float = 0.0
    q_teacher: float = 1.0
    b_tilde_plus: float = 0.0
    b_tilde_minus: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if self.delta_plus <= 0 or self.delta_minus <= 0:
            raise ValueError("group variances must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def delta(self, c: int) -> float:
        return self.delta_plus if c > 0 else self.delta_minus

    def m_tilde(self, c: int) -> float:
        return self.m_tilde_plus if c > 0 else self.m_tilde_minus

    def b_tilde(self, c: int) -> float:
        return self.b_tilde_plus if c > 0 else self.b_tilde_minus

    def group_prob(self, c: int) -> float:
        return self.rho if c > 0 else 1.0 - self.rho

    def gram(self) -> np.ndarray:
        """Gram matrix of (v, W_T^+, W_T^-) with unit per-coordinate norms."""
        return np.array(
            [
                [1.0, self.m_tilde_plus, self.m_tilde_minus],
                [self.m_tilde_plus, 1.0, self.q_teacher],
                [self.m_tilde_minus, self.q_teacher, 1.0],
            ]
        )

    def check_feasible(self, tol: float = 1e-12) -> None:
        """Raise InfeasibleGeometryError unless the teacher Gram matrix is PSD."""
        eigs = np.linalg.eigvalsh(self.gram())
        if eigs.min() < -tol:
            raise InfeasibleGeometryError(
                f"teacher overlaps infeasible: min Gram eigenvalue {eigs.min():.3e}"
            )

    def swapped(self) -> "GenerativeParams":
        """The group-relabelled problem (+ <-> -).

        Relabelling also flips the shift direction (the new + group sits at
        +v' = -v), so the teacher-shift overlaps change sign.
        """
        return GenerativeParams(
            rho=1.0 - self.rho,
            delta_plus=self.delta_minus,
            delta_minus=self.delta_plus,
            m_tilde_plus=-self.m_tilde_minus,
            m_tilde_minus=-self.m_tilde_plus,
            q_teacher=self.q_teacher,
            b_tilde_plus=self.b_tilde_minus,
            b_tilde_minus=self.b_tilde_plus,
            alpha=self.alpha,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ReweighWeights:
    """Two-parameter loss reweighing: up-weigh group + and label 1.

    The effective per-sample weight is W[(c, y)] with
    W = 2 * [[w+ w1, w+ (1-w1)], [(1-w+) w1, (1-w+) (1-w1)]],
    so (0.5, 0.5) reproduces the unweighted loss exactly.
    """

    w_group_plus: float = 0.5
    w_label_one: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.w_group_plus <= 1.0 or not 0.0 <= self.w_label_one <= 1.0:
            raise ValueError("reweigh parameters must lie in [0, 1]")

    def weight(self, c: int, y: int) -> float:
        """Loss weight for a sample of group c in {-1,+1} with label y in {-1,+1}."""
        wc = self.w_group_plus if c > 0 else 1.0 - self.w_group_plus
        wy = self.w_label_one if y > 0 else 1.0 - self.w_label_one
        return 2.0 * wc * wy

    def row(self, c: int) -> tuple[float, float]:
        """(weight for y=+1, weight for y=-1) of group c."""
        return self.weight(c, +1), self.weight(c, -1)

    def matrix(self) -> np.ndarray:
        """2x2 weight matrix, rows (+,-) groups, columns (y=1, y=0)."""
        return np.array([[self.weight(+1, +1), self.weight(+1, -1)],
                         [self.weight(-1, +1), self.weight(-1, -1)]])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHyper:
    """Hyperparameters of the finite-dimensional trainer."""

    lambda_l2: float = 1e-2
    gamma_couple: float = 0.0
    tol_grad: Optional[float] = None  # default 1e-8 * n, resolved at train time
    max_iter: int = 100_000

    def __post_init__(self):
        if self.lambda_l2 < 0 or self.gamma_couple < 0:
            raise ValueError("lambda_l2 and gamma_couple must be >= 0")
        if self.tol_grad is not None and self.tol_grad <= 0:
            raise ValueError("tol_grad must be positive")

    def resolve_tol(self, n: int) -> float:
        # the gradient is a sum of n O(1) terms, so its rounding noise grows
        # with n; anything much tighter is unreachable in double precision
        return self.tol_grad if self.tol_grad is not None else 1e-8 * n


@dataclass
class OrderParams:
    """Scalar descriptors of one trained (or typical) classifier.

    q_self is the self-overlap W.W/d, m the magnetisation along the shift
    direction, r_plus / r_minus the overlaps with the two labelling rules,
    delta_q the rescaled zero-temperature fluctuation (asymptotic only,
    None when measured from a finite-d vector) and b the classifier bias.
    """

    q_self: float = 1.0
    m: float = 0.0
    r_plus: float = 0.1
    r_minus: float = 0.1
    delta_q: Optional[float] = 1.0
    b: float = 0.0

    def r(self, c: int) -> float:
        return self.r_plus if c > 0 else self.r_minus

    def as_array(self) -> np.ndarray:
        dq = np.nan if self.delta_q is None else self.delta_q
        return np.array([self.q_self, self.m, self.r_plus, self.r_minus, dq, self.b])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConjugateParams:
    """Lagrange multipliers paired with the order parameters of one student."""

    q_hat: float = 0.0
    m_hat: float = 0.0
    r_hat_plus: float = 0.0
    r_hat_minus: float = 0.0
    delta_q_hat: float = 0.0

    def r_hat(self, c: int) -> float:
        return self.r_hat_plus if c > 0 else self.r_hat_minus

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.q_hat, self.m_hat, self.r_hat_plus, self.r_hat_minus, self.delta_q_hat]
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverConfig:
    """Knobs of the damped saddle-point iteration."""

    damping: float = 0.5
    tol_residual: float = 1e-9
    max_sweeps: int = 5000
    quad_order: int = 120
    prox_tol: float = 1e-12
    fd_step: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
        if self.quad_order < 40:
            raise ValueError("quadrature order must be >= 40")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SaddleSolution:
    """Converged (or best-effort) fixed point of the saddle-point system."""

    students: list  # list[OrderParams], length 1 or 2
    conjugates: list  # list[ConjugateParams]
    residual: float
    sweeps: int
    converged: bool
    residual_history_len: int = 0
    config: Optional[SolverConfig] = None

    @property
    def theta(self) -> OrderParams:
        return self.students[0]

    def to_dict(self) -> dict:
        return {
            "students": [s.to_dict() for s in self.students],
            "conjugates": [c.to_dict() for c in self.conjugates],
            "residual": self.residual,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "residual_history_len": self.residual_history_len,
            "config": self.config.to_dict() if self.config is not None else None,
        }
