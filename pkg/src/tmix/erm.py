"""Finite-dimensional trainer: (reweighed) logistic loss + L2, single or coupled."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .generative import Dataset, TeacherPair, empirical_overlaps, sample_dataset
from .observables import JointConfusion
from .params import GenerativeParams, OrderParams, ReweighWeights, TrainHyper


@dataclass
class TrainedModel:
    """ERM minimiser with its convergence record and measured overlaps."""

    weights: np.ndarray
    bias: float
    converged: bool
    final_grad_norm: float
    measured: Optional[OrderParams] = None


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sample_weights(
    data: Dataset, rw: ReweighWeights, assessed: Optional[np.ndarray] = None
) -> np.ndarray:
    """Per-sample loss weights; ``assessed`` overrides the group column (used
    when the weighting relies on an imperfect membership assessment)."""
    groups = data.groups if assessed is None else assessed
    wc = np.where(groups > 0, rw.w_group_plus, 1.0 - rw.w_group_plus)
    wy = np.where(data.labels > 0, rw.w_label_one, 1.0 - rw.w_label_one)
    return 2.0 * wc * wy


def _single_terms(w, b, data: Dataset, sw):
    """Data part of loss/grad/diag-hessian-weights for one student's slice."""
    d = data.d
    act = data.inputs @ w / np.sqrt(d) + b
    u = data.labels * act
    loss = float(np.dot(sw, _softplus(-u)))
    s = _sigmoid(-u)  # = -d softplus(-u)/du
    coef = -sw * data.labels * s
    grad_w = data.inputs.T @ coef / np.sqrt(d)
    grad_b = float(coef.sum())
    hess_diag = sw * s * (1.0 - s)  # per-sample curvature in the activation
    return loss, grad_w, grad_b, hess_diag


def loss_and_gradient(
    w1: np.ndarray,
    b1: float,
    w2: Optional[np.ndarray],
    b2: Optional[float],
    data_split: tuple,
    rw: ReweighWeights,
    hyper: TrainHyper,
):
    """Objective and exact gradients of the (optionally coupled) reweighed loss.

    data_split is a tuple of one or two Dataset slices, one per student.  A
    missing second student requires gamma_couple = 0.
    """
    slices = tuple(data_split)
    coupled = w2 is not None
    if not coupled and hyper.gamma_couple != 0.0:
        raise ValueError("gamma_couple > 0 requires a second student")
    if coupled and len(slices) != 2:
        raise ValueError("coupled training needs two dataset slices")

    students = [(np.asarray(w1, float), float(b1))]
    if coupled:
        students.append((np.asarray(w2, float), float(b2)))

    loss = 0.0
    grads = []
    for (w, b), sl in zip(students, slices):
        if w.shape != (sl.d,):
            raise ValueError(f"weight length {w.shape} does not match d={sl.d}")
        sw = sample_weights(sl, rw)
        if np.any(sw < 0):
            raise ValueError("negative sample weights")
        l, gw, gb, _ = _single_terms(w, b, sl, sw)
        loss += l + 0.5 * hyper.lambda_l2 * float(w @ w)
        grads.append([gw + hyper.lambda_l2 * w, gb])
    if coupled:
        diff = students[0][0] - students[1][0]
        loss += 0.5 * hyper.gamma_couple * float(diff @ diff)
        grads[0][0] += hyper.gamma_couple * diff
        grads[1][0] -= hyper.gamma_couple * diff
    if coupled:
        return loss, (grads[0][0], grads[0][1], grads[1][0], grads[1][1])
    return loss, (grads[0][0], grads[0][1])


def _newton_minimize(objective, theta0, tol_grad, max_iter):
    """Damped Newton with Armijo backtracking on a smooth convex objective.

    objective(theta) -> (loss, grad, hess); stops at ||grad||_2 <= tol_grad.
    """
    theta = theta0.copy()
    loss, grad, hess = objective(theta)
    gnorm = float(np.linalg.norm(grad))
    stalls = 0
    for _ in range(max_iter):
        if gnorm <= tol_grad:
            return theta, gnorm, True
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        descent = float(grad @ step)
        for _ in range(60):
            cand = theta - t * step
            cl, cg, ch = objective(cand)
            if cl <= loss - 1e-4 * t * descent:
                theta, grad, hess = cand, cg, ch
                # at the rounding floor the loss stops moving while the
                # gradient noise keeps gnorm above tol; bail out then
                if cl >= loss - 1e-14 * (1.0 + abs(loss)):
                    stalls += 1
                else:
                    stalls = 0
                loss = cl
                break
            t *= 0.5
        else:
            return theta, gnorm, False
        gnorm = float(np.linalg.norm(grad))
        if stalls >= 3:
            return theta, gnorm, gnorm <= tol_grad
    return theta, gnorm, gnorm <= tol_grad


def _single_objective(data: Dataset, sw, lam):
    d = data.d
    feats = data.inputs / np.sqrt(d)

    def objective(theta):
        w, b = theta[:-1], theta[-1]
        l, gw, gb, hd = _single_terms(w, b, data, sw)
        l += 0.5 * lam * float(w @ w)
        grad = np.concatenate([gw + lam * w, [gb]])
        fw = feats * hd[:, None]
        h_ww = feats.T @ fw
        h_ww[np.diag_indices_from(h_ww)] += lam
        h_wb = fw.sum(axis=0)
        hess = np.empty((d + 1, d + 1))
        hess[:d, :d] = h_ww
        hess[:d, d] = h_wb
        hess[d, :d] = h_wb
        hess[d, d] = hd.sum()
        return l, grad, hess

    return objective


def train_single(
    data: Dataset,
    rw: ReweighWeights,
    hyper: TrainHyper,
    seed: int,
    teachers: Optional[TeacherPair] = None,
    assessed: Optional[np.ndarray] = None,
) -> TrainedModel:
    """Minimise the reweighed objective on the full dataset."""
    rng = np.random.default_rng(seed)
    theta0 = np.concatenate([rng.standard_normal(data.d) * 0.01, [0.0]])
    sw = sample_weights(data, rw, assessed)
    tol = hyper.resolve_tol(data.n)
    theta, gnorm, ok = _newton_minimize(
        _single_objective(data, sw, hyper.lambda_l2), theta0, tol, hyper.max_iter
    )
    w, b = theta[:-1], float(theta[-1])
    measured = empirical_overlaps(w, b, teachers) if teachers is not None else None
    return TrainedModel(weights=w, bias=b, converged=ok, final_grad_norm=gnorm,
                        measured=measured)


def split_dataset(data: Dataset, eta: float, seed: int) -> tuple[Dataset, Dataset]:
    """Route each sample to its group's slice with probability eta, else to the
    other slice (slice 1 collects assessed-+ samples)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    rng = np.random.default_rng(seed)
    matched = rng.random(data.n) < eta
    assessed_plus = np.where(matched, data.groups > 0, data.groups < 0)
    return data.subset(assessed_plus), data.subset(~assessed_plus)


def train_coupled(
    data: Dataset,
    eta: float,
    rw: ReweighWeights,
    hyper: TrainHyper,
    seed: int,
    teachers: Optional[TeacherPair] = None,
    corrupt_weights: bool = True,
) -> tuple[TrainedModel, TrainedModel]:
    """Jointly minimise two elastically coupled students on complementary slices.

    Loss weights follow the assessed group of each slice when corrupt_weights
    is set (mirroring a deployment that only sees the routing labels).
    """
    sl1, sl2 = split_dataset(data, eta, seed)
    d = data.d
    lam, gam = hyper.lambda_l2, hyper.gamma_couple

    sws = []
    for sl, assessed in ((sl1, +1), (sl2, -1)):
        if corrupt_weights:
            wc = rw.w_group_plus if assessed > 0 else 1.0 - rw.w_group_plus
            wy = np.where(sl.labels > 0, rw.w_label_one, 1.0 - rw.w_label_one)
            sws.append(2.0 * wc * wy)
        else:
            sws.append(sample_weights(sl, rw))

    feats = [sl.inputs / np.sqrt(d) for sl in (sl1, sl2)]
    k = d + 1

    def objective(theta):
        loss = 0.0
        grad = np.zeros(2 * k)
        hess = np.zeros((2 * k, 2 * k))
        ws = [theta[:d], theta[k : k + d]]
        bs = [theta[d], theta[k + d]]
        for s, (sl, sw) in enumerate(zip((sl1, sl2), sws)):
            l, gw, gb, hd = _single_terms(ws[s], bs[s], sl, sw)
            loss += l + 0.5 * lam * float(ws[s] @ ws[s])
            o = s * k
            grad[o : o + d] = gw + lam * ws[s]
            grad[o + d] = gb
            fw = feats[s] * hd[:, None]
            blk = feats[s].T @ fw
            blk[np.diag_indices_from(blk)] += lam
            hess[o : o + d, o : o + d] = blk
            hess[o : o + d, o + d] = fw.sum(axis=0)
            hess[o + d, o : o + d] = hess[o : o + d, o + d]
            hess[o + d, o + d] = hd.sum()
        diff = ws[0] - ws[1]
        loss += 0.5 * gam * float(diff @ diff)
        grad[:d] += gam * diff
        grad[k : k + d] -= gam * diff
        idx = np.arange(d)
        hess[idx, idx] += gam
        hess[k + idx, k + idx] += gam
        hess[idx, k + idx] -= gam
        hess[k + idx, idx] -= gam
        return loss, grad, hess

    rng = np.random.default_rng(seed)
    theta0 = np.zeros(2 * k)
    theta0[:d] = rng.standard_normal(d) * 0.01
    theta0[k : k + d] = rng.standard_normal(d) * 0.01
    tol = hyper.resolve_tol(data.n)
    theta, gnorm, ok = _newton_minimize(objective, theta0, tol, hyper.max_iter)

    models = []
    for s in range(2):
        w = theta[s * k : s * k + d]
        b = float(theta[s * k + d])
        measured = empirical_overlaps(w, b, teachers) if teachers is not None else None
        models.append(
            TrainedModel(weights=w, bias=b, converged=ok, final_grad_norm=gnorm,
                         measured=measured)
        )
    return models[0], models[1]


def evaluate(
    model: TrainedModel,
    teachers: TeacherPair,
    gen: GenerativeParams,
    n_test: int,
    seed: int,
) -> dict[int, JointConfusion]:
    """Empirical joint (label, prediction) frequencies per group on a fresh test set."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    test = sample_dataset(teachers, gen, n_test, seed)
    preds = np.where(
        test.inputs @ model.weights / np.sqrt(test.d) + model.bias >= 0.0, 1, -1
    )
    out = {}
    for c in (+1, -1):
        mask = test.groups == c
        table = np.zeros((2, 2))
        for i, y in enumerate((+1, -1)):
            for j, yhat in enumerate((+1, -1)):
                table[i, j] = np.sum(mask & (test.labels == y) & (preds == yhat))
        total = table.sum()
        out[c] = JointConfusion(table=table / total if total > 0 else table)
    return out
