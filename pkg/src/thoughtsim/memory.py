"""Missing-variance fillers.

Two memories with very different guarantees:

* MostRecentHash: an exact associative store where a read returns the
  latest value written under a key.  No training, no generalization.
* A single binary restricted Boltzmann machine trained with one-step
  contrastive divergence over concatenated hidden|residue vectors, so
  residue bits can be resampled conditioned on a clamped hidden part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .consistency import DimensionMismatch, as_matrix


class NotTrainable(Exception):
    """Degenerate machine configuration (no hidden units)."""


class Diverged(Exception):
    pass


@dataclass
class MostRecentHash:
    """Latest-write-wins key/value store with a monotone write clock."""

    entries: dict = field(default_factory=dict)
    clock: int = 0

    def write(self, key, value):
        self.clock += 1
        self.entries[key] = (value, self.clock)
        return self

    def read(self, key):
        """The most recent value for ``key``, or None if never written."""
        hit = self.entries.get(key)
        return None if hit is None else hit[0]

    def snapshot(self) -> dict:
        return {k: v for k, (v, _) in self.entries.items()}


def mrh_write(store: MostRecentHash, key, value) -> MostRecentHash:
    return store.write(key, value)


def mrh_read(store: MostRecentHash, key):
    return store.read(key)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class RBM:
    """Binary RBM over visible vectors of the form hidden-part | residue-part."""

    weights: np.ndarray        # visible x hidden
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    h_part: int
    r_part: int

    def __post_init__(self):
        w = as_matrix(self.weights)
        if self.h_part + self.r_part != w.shape[0]:
            raise DimensionMismatch("h_part + r_part must equal the visible size")
        self.weights = w
        self.visible_bias = np.asarray(self.visible_bias, dtype=np.float64)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)

    @property
    def n_visible(self):
        return self.weights.shape[0]

    @property
    def n_hidden(self):
        return self.weights.shape[1]

    def hidden_probs(self, v):
        return _sigmoid(v @ self.weights + self.hidden_bias)

    def visible_probs(self, h):
        return _sigmoid(h @ self.weights.T + self.visible_bias)

    def reconstruction_error(self, data) -> float:
        """Mean per-bit error of a deterministic mean-field round trip."""
        probs = self.visible_probs(self.hidden_probs(data))
        return float(np.mean((probs > 0.5) != data))


@dataclass(frozen=True)
class RBMConfig:
    hidden_units: int
    learning_rate: float = 0.5
    epochs: int = 1500
    seed: int = 0


def rbm_train_cd(data, config: RBMConfig, h_part: int | None = None) -> tuple[RBM, list]:
    """One-step contrastive divergence on binary rows.

    The positive statistics use hidden activation probabilities, the
    negative ones a single sampled reconstruction.  Returns the machine
    and the per-epoch reconstruction-error curve.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("data must be a nonempty 2-d binary array")
    if not np.all((data == 0) | (data == 1)):
        raise ValueError("data must be binary")
    if config.hidden_units < 1:
        raise NotTrainable("at least one hidden unit is required")
    n, d = data.shape
    if h_part is None:
        h_part = d // 2
    rng = np.random.default_rng(config.seed)
    rbm = RBM(0.01 * rng.standard_normal((d, config.hidden_units)),
              np.zeros(d), np.zeros(config.hidden_units), h_part, d - h_part)
    lr = config.learning_rate
    errors = []
    for _ in range(config.epochs):
        h_prob = rbm.hidden_probs(data)
        h_sample = (rng.random(h_prob.shape) < h_prob).astype(np.float64)
        v_prob = rbm.visible_probs(h_sample)
        v_sample = (rng.random(v_prob.shape) < v_prob).astype(np.float64)
        h_prob2 = rbm.hidden_probs(v_sample)
        rbm.weights += lr * (data.T @ h_prob - v_sample.T @ h_prob2) / n
        rbm.visible_bias += lr * (data - v_sample).mean(axis=0)
        rbm.hidden_bias += lr * (h_prob - h_prob2).mean(axis=0)
        if not (np.all(np.isfinite(rbm.weights)) and np.all(np.isfinite(rbm.visible_bias))
                and np.all(np.isfinite(rbm.hidden_bias))):
            raise Diverged("non-finite parameters during contrastive divergence")
        errors.append(rbm.reconstruction_error(data))
    return rbm, errors


def rbm_fill_residue(rbm: RBM, h_clamped, gibbs_steps: int, seed: int) -> np.ndarray:
    """Block Gibbs sampling with the hidden part clamped.

    The residue part starts uniform and is resampled ``gibbs_steps``
    times; clamped bits are restored after every visible update.
    """
    h_clamped = np.asarray(h_clamped, dtype=np.float64)
    if h_clamped.shape != (rbm.h_part,):
        raise DimensionMismatch(f"clamp length {h_clamped.shape} vs h_part {rbm.h_part}")
    rng = np.random.default_rng(seed)
    v = np.concatenate([h_clamped, (rng.random(rbm.r_part) < 0.5).astype(np.float64)])
    for _ in range(gibbs_steps):
        h_prob = rbm.hidden_probs(v)
        h_sample = (rng.random(h_prob.shape) < h_prob).astype(np.float64)
        v_prob = rbm.visible_probs(h_sample)
        v = (rng.random(v_prob.shape) < v_prob).astype(np.float64)
        v[:rbm.h_part] = h_clamped
    return v[rbm.h_part:]


def save_rbm(path, rbm: RBM) -> None:
    """Matrix text block for the weights, then one line per bias vector."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{rbm.n_visible} {rbm.n_hidden} {rbm.h_part} {rbm.r_part}\n")
        for row in rbm.weights:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
        fh.write(" ".join(format(x, ".17g") for x in rbm.visible_bias) + "\n")
        fh.write(" ".join(format(x, ".17g") for x in rbm.hidden_bias) + "\n")


def load_rbm(path) -> RBM:
    with open(path) as fh:
        nv, nh, hp, rp = (int(tok) for tok in fh.readline().split())
        rows = [[float(tok) for tok in fh.readline().split()] for _ in range(nv)]
        vb = [float(tok) for tok in fh.readline().split()]
        hb = [float(tok) for tok in fh.readline().split()]
    return RBM(np.array(rows), np.array(vb), np.array(hb), hp, rp)
