"""Damped fixed-point iteration over the saddle-point system."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..params import (
    ConjugateParams,
    GenerativeParams,
    OrderParams,
    ReweighWeights,
    SaddleSolution,
    SolverConfig,
)
from .energetic import (
    Channel,
    bias_solve_channels,
    conjugate_updates_channels,
    single_student_channels,
)
from .entropic import entropic_updates

_MIN_DAMPING = 1.0 / 64.0


def _default_init(n_students: int) -> list[OrderParams]:
    return [
        OrderParams(q_self=1.0, m=0.0, r_plus=0.1, r_minus=0.1, delta_q=1.0, b=0.0)
        for _ in range(n_students)
    ]


def fixed_point_solve(
    gen: GenerativeParams,
    lambda_l2: float,
    gamma: float = 0.0,
    rw: Optional[ReweighWeights] = None,
    cfg: Optional[SolverConfig] = None,
    init: Optional[Sequence[OrderParams]] = None,
    channels: Optional[list[list[Channel]]] = None,
) -> SaddleSolution:
    """Solve the saddle-point system by damped recursion.

    Without an explicit channel layout this is the single-classifier problem on
    the full dataset.  Residual is the max-norm change of all order parameters
    over one undamped sweep; damping is halved (down to 1/64) after ten
    consecutive residual increases.
    """
    gen.check_feasible()
    rw = rw if rw is not None else ReweighWeights()
    cfg = cfg if cfg is not None else SolverConfig()
    if channels is None:
        channels = single_student_channels(gen, rw)
    n_students = len(channels)
    if n_students == 1 and gamma != 0.0:
        raise ValueError("gamma > 0 requires two students")

    thetas = list(init) if init is not None else _default_init(n_students)
    damping = cfg.damping
    residual = np.inf
    history: list[float] = []
    rising = 0
    converged = False
    sweeps = 0

    for sweeps in range(1, cfg.max_sweeps + 1):
        conjs = [
            conjugate_updates_channels(thetas[s], channels[s], gen, cfg)
            for s in range(n_students)
        ]
        new = entropic_updates(conjs, lambda_l2, gamma, gen)
        for s in range(n_students):
            new[s].b = bias_solve_channels(new[s], channels[s], gen, cfg)

        residual = max(
            float(np.nanmax(np.abs(new[s].as_array() - thetas[s].as_array())))
            for s in range(n_students)
        )
        history.append(residual)
        if len(history) >= 2 and history[-1] > history[-2]:
            rising += 1
            if rising >= 10 and damping > _MIN_DAMPING:
                damping = max(damping / 2.0, _MIN_DAMPING)
                rising = 0
        else:
            rising = 0

        for s in range(n_students):
            old_a, new_a = thetas[s].as_array(), new[s].as_array()
            mixed = (1.0 - damping) * old_a + damping * new_a
            thetas[s] = OrderParams(
                q_self=mixed[0], m=mixed[1], r_plus=mixed[2], r_minus=mixed[3],
                delta_q=mixed[4], b=mixed[5],
            )
        if residual <= cfg.tol_residual:
            converged = True
            break

    final_conjs = [
        conjugate_updates_channels(thetas[s], channels[s], gen, cfg)
        for s in range(n_students)
    ]
    return SaddleSolution(
        students=thetas,
        conjugates=final_conjs,
        residual=residual,
        sweeps=sweeps,
        converged=converged,
        residual_history_len=len(history),
        config=cfg,
    )
