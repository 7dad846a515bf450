"""Parameter sweeps over mitigation knobs and MI-minima location.

A sweep walks a 1D or 2D grid of named parameters, solves the saddle point
(and/or runs finite-d training) at every cell, and records fairness reports
plus convergence diagnostics.  Failures stay in their cell; the sweep never
aborts.
"""

from __future__ import annotations

import dataclasses
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import erm
from .generative import build_teacher_geometry, sample_dataset
from .observables import (
    MI_CRITERIA,
    FairnessReport,
    JointConfusion,
    confusion_theory,
    report_from_confusions,
)
from .params import (
    GenerativeParams,
    OrderParams,
    ReweighWeights,
    SolverConfig,
    TrainHyper,
)
from .replica import (
    coupled_channels,
    fixed_point_solve,
    reweigh_corrupted_channels,
    single_student_channels,
)

AXIS_NAMES = (
    "rho", "q_teacher", "m_tilde", "delta_plus", "delta_minus", "b_tilde",
    "alpha", "w_group_plus", "w_label_one", "gamma", "eta", "lambda_l2",
)

# short metric keys used in CSV columns and metric_grid()
MI_SHORT = {
    "mi_sp": "statistical_parity",
    "mi_eo": "equal_opportunity",
    "mi_ea": "equal_accuracy",
    "mi_eodds": "equal_odds",
    "mi_pp1": "predicted_parity_1",
    "mi_pp10": "predicted_parity_10",
}


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}, pick from {AXIS_NAMES}")
        if self.count < 2:
            raise ValueError("axis count must be >= 2")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SimulationConfig:
    d: int = 500
    n_seeds: int = 5
    n_test: int = 100000
    base_seed: int = 0


@dataclass
class SweepSpec:
    """Base point plus 1 or 2 axes to vary, and how to evaluate each cell.

    strategy: "auto" picks the coupled architecture iff gamma != 0 and handles
    eta < 1 through corrupted reweighing; "reweigh" and "coupled" force the
    respective mechanism regardless of the base values.
    """

    gen: GenerativeParams
    lambda_l2: float
    axes: list = field(default_factory=list)
    gamma: float = 0.0
    rw: ReweighWeights = field(default_factory=ReweighWeights)
    eta: float = 1.0
    mode: str = "theory"
    strategy: str = "auto"
    sim: Optional[SimulationConfig] = None
    solver: Optional[SolverConfig] = None

    def __post_init__(self):
        # zero axes = a single direct solve through the same cell machinery
        if len(self.axes) > 2:
            raise ValueError("at most 2 sweep axes")
        names = [ax.name for ax in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("axes must name distinct parameters")
        if self.mode not in ("theory", "simulation", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.strategy not in ("auto", "reweigh", "coupled"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.mode in ("simulation", "both") and self.sim is None:
            self.sim = SimulationConfig()


@dataclass
class CellResult:
    index: tuple
    params: dict
    converged: bool = False
    sweeps: int = 0
    residual: float = float("nan")
    error: Optional[str] = None
    report: Optional[FairnessReport] = None
    theta: Optional[OrderParams] = None
    students: Optional[list] = None
    sim_report: Optional[FairnessReport] = None
    sim_theta: Optional[OrderParams] = None

    def metric(self, key: str) -> float:
        rep = self.report if self.report is not None else self.sim_report
        if rep is None:
            return float("nan")
        if key == "acc_plus":
            return rep.acc_plus
        if key == "acc_minus":
            return rep.acc_minus
        if key == "di":
            return rep.disparate_impact
        if key in MI_SHORT:
            return rep.mi[MI_SHORT[key]]
        raise KeyError(key)


@dataclass
class SweepResult:
    spec: SweepSpec
    axis_values: list
    cells: list
    minima: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return tuple(len(v) for v in self.axis_values)

    def cell(self, index) -> CellResult:
        flat = 0
        for i, n in zip(index, self.shape):
            flat = flat * n + i
        return self.cells[flat]

    def metric_grid(self, key: str) -> np.ndarray:
        out = np.array([c.metric(key) for c in self.cells])
        return out.reshape(self.shape)


def _apply_params(spec: SweepSpec, params: dict):
    """Resolve one cell's (gen, lambda, gamma, rw, eta) from the base point."""
    gen_kw, rw_kw = {}, {}
    lam, gam, eta = spec.lambda_l2, spec.gamma, spec.eta
    for name, v in params.items():
        v = float(v)
        if name == "m_tilde":
            gen_kw["m_tilde_plus"] = gen_kw["m_tilde_minus"] = v
        elif name == "b_tilde":
            gen_kw["b_tilde_plus"] = gen_kw["b_tilde_minus"] = v
        elif name in ("rho", "q_teacher", "delta_plus", "delta_minus", "alpha"):
            gen_kw[name] = v
        elif name in ("w_group_plus", "w_label_one"):
            rw_kw[name] = v
        elif name == "gamma":
            gam = v
        elif name == "eta":
            eta = v
        elif name == "lambda_l2":
            lam = v
    gen = replace(spec.gen, **gen_kw) if gen_kw else spec.gen
    rw = replace(spec.rw, **rw_kw) if rw_kw else spec.rw
    return gen, lam, gam, rw, eta


def _is_coupled(spec: SweepSpec, gam: float) -> bool:
    if spec.strategy == "coupled":
        return True
    if spec.strategy == "reweigh":
        return False
    return gam != 0.0


def _deployment_confusions(sol, gen, eta, order=120):
    """Per-group confusion of the coupled pair in deployment.

    A group-c sample is routed to its specialist student with probability eta
    and to the other student otherwise, mirroring the corrupted assessment
    used at training time.
    """
    conf = {}
    for c, matched in ((+1, 0), (-1, 1)):
        own = confusion_theory(sol, gen, matched, c, order).table
        other = confusion_theory(sol, gen, 1 - matched, c, order).table
        conf[c] = JointConfusion(table=eta * own + (1.0 - eta) * other)
    return conf[+1], conf[-1]


def _theory_cell(spec, cell, gen, lam, gam, rw, eta, init):
    coupled = _is_coupled(spec, gam)
    if coupled:
        channels = coupled_channels(gen, rw, eta)
    elif eta < 1.0 or spec.strategy == "reweigh":
        channels = reweigh_corrupted_channels(gen, rw, eta)
    else:
        channels = single_student_channels(gen, rw)
    if init is not None and len(init) != len(channels):
        init = None
    sol = fixed_point_solve(
        gen, lam, gamma=gam if coupled else 0.0, rw=rw,
        cfg=spec.solver, init=init, channels=channels,
    )
    cell.converged = sol.converged
    cell.sweeps = sol.sweeps
    cell.residual = sol.residual
    cell.theta = sol.students[0]
    cell.students = list(sol.students)
    if coupled:
        conf_p, conf_m = _deployment_confusions(sol, gen, eta)
        cell.report = report_from_confusions(conf_p, conf_m, gen.rho)
    else:
        conf_p = confusion_theory(sol, gen, 0, +1)
        conf_m = confusion_theory(sol, gen, 0, -1)
        cell.report = report_from_confusions(conf_p, conf_m, gen.rho)
    return sol


def _sim_cell(spec, cell, gen, lam, gam, rw, eta):
    sim = spec.sim if spec.sim is not None else SimulationConfig()
    coupled = _is_coupled(spec, gam)
    hyper = TrainHyper(lambda_l2=lam, gamma_couple=gam if coupled else 0.0)
    n = max(int(round(gen.alpha * sim.d)), 2)
    tab_p = np.zeros((2, 2))
    tab_m = np.zeros((2, 2))
    overlaps = []
    all_ok = True
    for k in range(sim.n_seeds):
        seed = sim.base_seed + 7919 * k
        rng = np.random.default_rng(seed + 3)
        teachers = build_teacher_geometry(gen, sim.d, seed)
        data = sample_dataset(teachers, gen, n, seed + 1)
        test = sample_dataset(teachers, gen, sim.n_test, seed + 2)
        if coupled:
            m1, m2 = erm.train_coupled(data, eta, rw, hyper, seed + 4, teachers)
            all_ok &= m1.converged
            # deployment: route each test point by its (corrupted) assessment
            assessed = np.where(rng.random(test.n) < eta, test.groups, -test.groups)
            act1 = test.inputs @ m1.weights / np.sqrt(test.d) + m1.bias
            act2 = test.inputs @ m2.weights / np.sqrt(test.d) + m2.bias
            act = np.where(assessed > 0, act1, act2)
            preds = np.where(act >= 0.0, 1, -1)
            overlaps.append(m1.measured.as_array())
        else:
            assessed = None
            if eta < 1.0:
                assessed = np.where(
                    rng.random(data.n) < eta, data.groups, -data.groups
                ).astype(np.int8)
            model = erm.train_single(data, rw, hyper, seed + 4, teachers,
                                     assessed=assessed)
            all_ok &= model.converged
            preds = np.where(
                test.inputs @ model.weights / np.sqrt(test.d) + model.bias >= 0.0,
                1, -1,
            )
            overlaps.append(model.measured.as_array())
        for c, tab in ((+1, tab_p), (-1, tab_m)):
            mask = test.groups == c
            tot = max(int(mask.sum()), 1)
            for i, y in enumerate((+1, -1)):
                for j, yh in enumerate((+1, -1)):
                    tab[i, j] += np.sum(mask & (test.labels == y) & (preds == yh)) / tot
    tab_p /= sim.n_seeds
    tab_m /= sim.n_seeds
    cell.sim_report = report_from_confusions(
        JointConfusion(table=tab_p), JointConfusion(table=tab_m), gen.rho
    )
    mo = np.mean(overlaps, axis=0)
    cell.sim_theta = OrderParams(q_self=mo[0], m=mo[1], r_plus=mo[2],
                                 r_minus=mo[3], delta_q=float("nan"), b=mo[5])
    if spec.mode == "simulation":
        cell.converged = all_ok


def _eval_cell(spec: SweepSpec, index: tuple, params: dict, init=None):
    """Evaluate one grid cell; any exception is recorded, not raised.

    Returns (cell, warm_start_thetas or None).
    """
    cell = CellResult(index=index, params=dict(params))
    gen, lam, gam, rw, eta = _apply_params(spec, params)
    warm = None
    try:
        gen.check_feasible()
        if spec.mode in ("theory", "both"):
            sol = _theory_cell(spec, cell, gen, lam, gam, rw, eta, init)
            warm = list(sol.students)
        if spec.mode in ("simulation", "both"):
            _sim_cell(spec, cell, gen, lam, gam, rw, eta)
    except Exception as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
        cell.converged = False
    return cell, warm


def _eval_cell_nowarm(args):
    spec, index, params = args
    return _eval_cell(spec, index, params)[0]


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate the full grid.

    With workers == 1 the cells are walked line by line along the first axis
    and each theory solve warm-starts from its left neighbour; parallel runs
    solve every cell from the default initialisation.  Either way, results are
    merged in grid order.
    """
    axis_values = [ax.values() for ax in spec.axes]
    shape = tuple(len(v) for v in axis_values)
    names = [ax.name for ax in spec.axes]
    indices = list(itertools.product(*[range(n) for n in shape]))
    cells: dict = {}

    if workers > 1:
        jobs = [
            (spec, idx, {nm: axis_values[k][i] for k, (nm, i) in
                         enumerate(zip(names, idx))})
            for idx in indices
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_eval_cell_nowarm, jobs):
                cells[cell.index] = cell
    else:
        # iterate with the first axis fastest so warm starts run along it
        order = sorted(indices, key=lambda idx: (idx[1:], idx[:1]))
        warm = None
        for idx in order:
            if not idx or idx[0] == 0:
                warm = None
            params = {nm: axis_values[k][i]
                      for k, (nm, i) in enumerate(zip(names, idx))}
            cell, warm = _eval_cell(spec, idx, params, init=warm)
            cells[idx] = cell

    result = SweepResult(
        spec=spec,
        axis_values=axis_values,
        cells=[cells[idx] for idx in indices],
    )
    if spec.axes:
        for crit in MI_CRITERIA:
            try:
                result.minima[crit] = find_minima(result, crit)
            except ValueError:
                pass
    return result


def find_minima(result: SweepResult, criterion: str):
    """Grid index of the minimum MI for one criterion.

    Ties (exact float equality) break toward the cell closest to the grid
    center, then lexicographically.  Raises ValueError if no cell produced a
    finite value.
    """
    key = None
    for short, full in MI_SHORT.items():
        if full == criterion or short == criterion:
            key = short
            break
    if key is None:
        raise ValueError(f"unknown criterion {criterion!r}")
    grid = result.metric_grid(key)
    finite = np.isfinite(grid)
    if not finite.any():
        raise ValueError("all grid cells failed")
    best = np.nanmin(np.where(finite, grid, np.inf))
    ties = [tuple(t) for t in np.argwhere(finite & (grid == best))]
    center = [(n - 1) / 2.0 for n in grid.shape]
    ties.sort(key=lambda idx: (sum((i - c) ** 2 for i, c in zip(idx, center)), idx))
    return ties[0]


def reweigh_sweep(
    gen: GenerativeParams,
    lambda_l2: float,
    w_group_axis: Axis,
    w_label_axis: Axis,
    eta: float = 1.0,
    mode: str = "theory",
    sim: Optional[SimulationConfig] = None,
    workers: int = 1,
) -> SweepResult:
    """2D sweep over the loss reweighing matrix."""
    spec = SweepSpec(
        gen=gen, lambda_l2=lambda_l2,
        axes=[dataclasses.replace(w_group_axis, name="w_group_plus"),
              dataclasses.replace(w_label_axis, name="w_label_one")],
        eta=eta, strategy="reweigh" if eta < 1.0 else "auto",
        mode=mode, sim=sim,
    )
    return run_sweep(spec, workers=workers)


def coupling_sweep(
    gen: GenerativeParams,
    lambda_l2: float,
    gamma_axis: Axis,
    eta: float = 1.0,
    rw: Optional[ReweighWeights] = None,
    mode: str = "theory",
    sim: Optional[SimulationConfig] = None,
    workers: int = 1,
) -> SweepResult:
    """1D sweep over the elastic coupling strength of the two-student pair."""
    spec = SweepSpec(
        gen=gen, lambda_l2=lambda_l2,
        axes=[dataclasses.replace(gamma_axis, name="gamma")],
        rw=rw if rw is not None else ReweighWeights(),
        eta=eta, strategy="coupled", mode=mode, sim=sim,
    )
    return run_sweep(spec, workers=workers)


def eta_robustness(
    gen: GenerativeParams,
    lambda_l2: float,
    eta_axis: Axis,
    strategy: str,
    gamma: float = 0.0,
    rw: Optional[ReweighWeights] = None,
    mode: str = "theory",
    sim: Optional[SimulationConfig] = None,
    workers: int = 1,
) -> SweepResult:
    """1D sweep over the membership-assessment fidelity eta.

    strategy "reweigh": the weights follow the corrupted assessment.
    strategy "coupled": the data split follows the corrupted assessment.
    """
    if strategy not in ("reweigh", "coupled"):
        raise ValueError("strategy must be 'reweigh' or 'coupled'")
    spec = SweepSpec(
        gen=gen, lambda_l2=lambda_l2,
        axes=[dataclasses.replace(eta_axis, name="eta")],
        gamma=gamma,
        rw=rw if rw is not None else ReweighWeights(),
        strategy=strategy, mode=mode, sim=sim,
    )
    return run_sweep(spec, workers=workers)
