"""Teacher geometry construction and finite-dimensional dataset sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .params import GenerativeParams, InfeasibleGeometryError, OrderParams

MAGIC = b"TMIX0001"


@dataclass
class TeacherPair:
    """Two unit-norm labelling vectors plus the shift direction, all length d.

    Per-coordinate normalisation: W.W/d = 1, v.v/d = 1, with the mutual
    overlaps imposed exactly by construction.
    """

    w_teacher_plus: np.ndarray
    w_teacher_minus: np.ndarray
    shift_v: np.ndarray
    d: int

    def w_teacher(self, c: int) -> np.ndarray:
        return self.w_teacher_plus if c > 0 else self.w_teacher_minus


@dataclass
class Dataset:
    """A sampled batch: n inputs of dimension d, labels in {-1,+1}, groups in {-1,+1}."""

    inputs: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    meta: GenerativeParams

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[mask], self.labels[mask], self.groups[mask], self.meta)


def build_teacher_geometry(gen: GenerativeParams, d: int, seed: int) -> TeacherPair:
    """Construct (v, W_T^+, W_T^-) with the overlaps of ``gen`` imposed exactly.

    Three seeded Gaussian directions are orthonormalised (QR) and recombined
    through a factor of the target Gram matrix, so the overlaps hold to
    machine precision rather than up to O(1/sqrt(d)) sampling noise.
    """
    if d < 3:
        raise ValueError("d must be >= 3 to embed three directions")
    gram = gen.gram()
    eigvals, eigvecs = np.linalg.eigh(gram)
    if eigvals.min() < -1e-12:
        raise InfeasibleGeometryError(
            f"teacher overlaps infeasible: min Gram eigenvalue {eigvals.min():.3e}"
        )
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))  # gram = factor @ factor.T

    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, 3)))
    # columns: v, W+, W- with per-coordinate norm 1 (vectors on the sqrt(d) sphere)
    vecs = np.sqrt(d) * basis @ factor.T
    return TeacherPair(
        w_teacher_plus=vecs[:, 1].copy(),
        w_teacher_minus=vecs[:, 2].copy(),
        shift_v=vecs[:, 0].copy(),
        d=d,
    )


def sample_dataset(
    teachers: TeacherPair, gen: GenerativeParams, n: int, seed: int
) -> Dataset:
    """Draw n samples of the two-group mixture and label them with the teachers."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = teachers.d
    rng = np.random.default_rng(seed)
    groups = np.where(rng.random(n) < gen.rho, 1, -1).astype(np.int8)
    sigma = np.where(groups > 0, np.sqrt(gen.delta_plus), np.sqrt(gen.delta_minus))
    x = rng.standard_normal((n, d)) * sigma[:, None]
    x += groups[:, None] * (teachers.shift_v / np.sqrt(d))[None, :]

    labels = np.empty(n, dtype=np.int8)
    for c in (+1, -1):
        mask = groups == c
        act = x[mask] @ teachers.w_teacher(c) / np.sqrt(d) + gen.b_tilde(c)
        labels[mask] = np.where(act >= 0.0, 1, -1)
    return Dataset(inputs=x, labels=labels, groups=groups, meta=gen)


def empirical_overlaps(w: np.ndarray, b: float, teachers: TeacherPair) -> OrderParams:
    """Measure the scalar descriptors of a finite-d weight vector."""
    w = np.asarray(w, dtype=float)
    if w.shape != (teachers.d,):
        raise ValueError(f"expected weight vector of length {teachers.d}, got {w.shape}")
    d = teachers.d
    return OrderParams(
        q_self=float(w @ w / d),
        m=float(w @ teachers.shift_v / d),
        r_plus=float(w @ teachers.w_teacher_plus / d),
        r_minus=float(w @ teachers.w_teacher_minus / d),
        delta_q=None,
        b=float(b),
    )


def save_dataset(data: Dataset, path: str, seed: int | None = None) -> None:
    """Persist a dataset: 32-byte header, row-major float64 inputs, label and
    group byte arrays, plus a JSON sidecar with the generative parameters."""
    n, d = data.inputs.shape
    header = MAGIC + np.array([d, n, 0], dtype="<i8").tobytes()
    assert len(header) == 32
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data.inputs, dtype="<f8").tobytes())
        fh.write(data.labels.astype(np.int8).tobytes())
        fh.write(data.groups.astype(np.int8).tobytes())
    sidecar = {"generative": data.meta.to_dict(), "seed": seed}
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_dataset(path: str) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if header[:8] != MAGIC:
            raise ValueError(f"bad magic in {path!r}")
        d, n, _flags = np.frombuffer(header[8:], dtype="<i8")
        inputs = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        labels = np.frombuffer(fh.read(n), dtype=np.int8).copy()
        groups = np.frombuffer(fh.read(n), dtype=np.int8).copy()
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    meta = GenerativeParams(**sidecar["generative"])
    return Dataset(inputs=inputs, labels=labels, groups=groups, meta=meta)
