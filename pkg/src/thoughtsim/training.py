"""Iterative training toward exact reconstruction.

The objective is the reconstruction-ICA form

    sum_v ||W.T W v - v||^2  +  lam * ||W v||_1

minimized by plain gradient descent with backtracking halving.  Three
weight layouts are supported: the transpose form above, a two-weight
form where the generative matrix is trained separately from the forward
one, and a residue-expanded form where the forward weight is widened to
``W|U`` and reconstruction goes through ``W'W + U'U``.

``orthonormality_cost`` evaluates the same reconstruction term through
the eigendecomposition of the uncentered sample second-moment matrix,
which is an exact identity and doubles as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .consistency import DimensionMismatch, as_matrix

MAX_HALVINGS = 30
DIVERGENCE_LIMIT = 1e12


class Diverged(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    sparsity: float = 0.0
    learning_rate: float = 1.0
    epochs: int = 100
    seed: int = 0
    mode: str = "transpose"  # transpose | non_transpose | with_residue

    def __post_init__(self):
        if self.sparsity < 0:
            raise ValueError("sparsity must be nonnegative")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in ("transpose", "non_transpose", "with_residue"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class DataSet:
    """Visible-state samples stored row-wise (count x dim)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] == 0:
            raise ValueError("samples must form a nonempty 2-d array")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def columns(self) -> np.ndarray:
        """Samples as a dim x count matrix, the shape the math wants."""
        return self.samples.T


def save_dataset(path, data: DataSet) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{data.count} {data.dim}\n")
        for row in data.samples:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")


def load_dataset(path) -> DataSet:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad dataset header")
        count, dim = int(header[0]), int(header[1])
        body = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if body.shape != (count, dim):
        raise ValueError(f"{path}: header {count}x{dim} does not match body {body.shape}")
    return DataSet(body)


def _check_w(w, data: DataSet) -> np.ndarray:
    w = as_matrix(w)
    if w.shape[1] != data.dim:
        raise DimensionMismatch(f"weight columns {w.shape[1]} vs data dim {data.dim}")
    return w


def rica_objective(w, data: DataSet, lam: float) -> float:
    w = _check_w(w, data)
    v = data.columns()
    p = w.T @ (w @ v) - v
    return float(np.sum(p * p)) + lam * float(np.sum(np.abs(w @ v)))


def rica_objective_terms(w, data: DataSet, lam: float) -> tuple[float, float]:
    """(reconstruction term, weighted sparsity term) of the objective."""
    w = _check_w(w, data)
    v = data.columns()
    p = w.T @ (w @ v) - v
    return float(np.sum(p * p)), lam * float(np.sum(np.abs(w @ v)))


def rica_gradient(w, data: DataSet, lam: float) -> np.ndarray:
    """Analytic gradient; the L1 subgradient takes sign(0) = 0."""
    w = _check_w(w, data)
    v = data.columns()
    h = w @ v
    p = w.T @ h - v
    g = 2.0 * (h @ p.T + w @ (p @ v.T))
    if lam:
        g = g + lam * (np.sign(h) @ v.T)
    return g


def orthonormality_cost(w, data: DataSet) -> float:
    """Reconstruction term evaluated as ``||(W.T W - I) E L^(1/2)||_F^2``.

    ``E`` and ``L`` diagonalize the uncentered second-moment matrix
    ``sum_v v v.T`` (no 1/n), which makes the identity with the direct
    per-sample sum exact.
    """
    w = _check_w(w, data)
    v = data.columns()
    moment = v @ v.T
    evals, evecs = np.linalg.eigh(moment)
    evals = np.clip(evals, 0.0, None)
    m = (w.T @ w - np.eye(data.dim)) @ evecs @ np.diag(np.sqrt(evals))
    return float(np.sum(m * m))


def init_weights(rows: int, cols: int, seed: int) -> np.ndarray:
    """Uniform entries in [-0.5, 0.5] / sqrt(cols), reproducible per seed."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5, 0.5, (rows, cols)) / np.sqrt(cols)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    objective: float
    reconstruction: float
    sparsity: float


@dataclass(frozen=True)
class TrainResult:
    forward: np.ndarray
    generative: np.ndarray | None
    residue_forward: np.ndarray | None
    residue_generative: np.ndarray | None
    objective: float
    reconstruction: float
    history: tuple[EpochRecord, ...] = field(repr=False)


def _descend(params: dict, value_fn, grad_fn, config: TrainConfig) -> tuple[dict, list]:
    """Gradient descent with per-epoch backtracking halving.

    Each epoch restarts from the configured learning rate and halves it
    until the objective does not increase; after MAX_HALVINGS failed
    halvings the epoch leaves the parameters untouched.
    """
    f, recon, spars = value_fn(params)
    history = []
    for epoch in range(1, config.epochs + 1):
        grads = grad_fn(params)
        step = config.learning_rate
        for _ in range(MAX_HALVINGS + 1):
            cand = {k: params[k] - step * grads[k] for k in params}
            fc, rc, sc = value_fn(cand)
            if fc <= f:
                params, f, recon, spars = cand, fc, rc, sc
                break
            step /= 2.0
        if not np.isfinite(f) or f > DIVERGENCE_LIMIT:
            raise Diverged(f"objective {f:.3e} at epoch {epoch}")
        history.append(EpochRecord(epoch, f, recon, spars))
    return params, history


def train(config: TrainConfig, data: DataSet, w_init) -> TrainResult:
    """Train weights toward reconstruction; see the module docstring.

    ``w_init`` must have full column rank.  In ``with_residue`` mode the
    residue weight gets ``dim - rows(w_init)`` rows so the stacked
    forward map is square.
    """
    w0 = _check_w(w_init, data)
    svals = np.linalg.svd(w0, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], 1.0):
        raise ValueError("w_init must have full column rank")
    lam = config.sparsity
    v = data.columns()

    if config.mode == "transpose":
        def value(p):
            pr = p["w"].T @ (p["w"] @ v) - v
            recon = float(np.sum(pr * pr))
            spars = lam * float(np.sum(np.abs(p["w"] @ v)))
            return recon + spars, recon, spars

        def grads(p):
            return {"w": rica_gradient(p["w"], data, lam)}

        params, history = _descend({"w": w0}, value, grads, config)
        recon, spars = rica_objective_terms(params["w"], data, lam)
        return TrainResult(params["w"], None, None, None, recon + spars, recon, tuple(history))

    if config.mode == "non_transpose":
        g0 = init_weights(w0.shape[1], w0.shape[0], config.seed + 1)

        def value(p):
            pr = p["g"] @ (p["w"] @ v) - v
            recon = float(np.sum(pr * pr))
            spars = lam * float(np.sum(np.abs(p["w"] @ v)))
            return recon + spars, recon, spars

        def grads(p):
            h = p["w"] @ v
            pr = p["g"] @ h - v
            gw = 2.0 * p["g"].T @ (pr @ v.T)
            if lam:
                gw = gw + lam * (np.sign(h) @ v.T)
            return {"w": gw, "g": 2.0 * pr @ h.T}

        params, history = _descend({"w": w0, "g": g0}, value, grads, config)
        last = history[-1]
        return TrainResult(params["w"], params["g"], None, None,
                           last.objective, last.reconstruction, tuple(history))

    # with_residue: widen the forward map to W|U and invert through W'W + U'U
    k, d = w0.shape
    if k > d:
        raise DimensionMismatch("with_residue expects rows(w_init) <= data dim")
    u0 = init_weights(d - k, d, config.seed + 2)
    g0 = init_weights(d, k, config.seed + 3)
    q0 = init_weights(d, d - k, config.seed + 4)

    def value(p):
        pr = p["g"] @ (p["w"] @ v) + p["q"] @ (p["u"] @ v) - v
        recon = float(np.sum(pr * pr))
        spars = lam * (float(np.sum(np.abs(p["w"] @ v))) + float(np.sum(np.abs(p["u"] @ v))))
        return recon + spars, recon, spars

    def grads(p):
        hw, hu = p["w"] @ v, p["u"] @ v
        pr = p["g"] @ hw + p["q"] @ hu - v
        gw = 2.0 * p["g"].T @ (pr @ v.T)
        gu = 2.0 * p["q"].T @ (pr @ v.T)
        if lam:
            gw = gw + lam * (np.sign(hw) @ v.T)
            gu = gu + lam * (np.sign(hu) @ v.T)
        return {"w": gw, "u": gu, "g": 2.0 * pr @ hw.T, "q": 2.0 * pr @ hu.T}

    params, history = _descend({"w": w0, "u": u0, "g": g0, "q": q0}, value, grads, config)
    last = history[-1]
    return TrainResult(params["w"], params["g"], params["u"], params["q"],
                       last.objective, last.reconstruction, tuple(history))


def write_epoch_csv(path, history) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,objective,reconstruction_term,sparsity_term\n")
        for rec in history:
            fh.write(f"{rec.epoch},{rec.objective:.15g},{rec.reconstruction:.15g},"
                     f"{rec.sparsity:.15g}\n")
