"""Dense linear layers whose generative map exactly inverts the forward map.

A layer holds a forward weight ``W`` (hidden x visible) and a generative
weight ``G`` (visible x hidden).  The layer preserves the variance of the
visible space when ``G @ W == I``, i.e. ``G`` is a left inverse of ``W``.
Such a pair reconstructs every visible vector exactly, and any unseen
hidden vector settles into a forward/generative fixed point after a
single generative pass.

The module also extracts residue weights: given ``W`` with spectral norm
at most one, a second weight ``U`` with ``W.T @ W + U.T @ U == I`` captures
the variance ``W`` leaves behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CERT_TOL = 1e-8
STACK_TOL = 1e-7
RANK_RTOL = 1e-10
PSD_TOL = 1e-10
COND_LIMIT = 1e10


class RankDeficient(Exception):
    """The forward weight has no left inverse."""


class DimensionMismatch(Exception):
    """Operand shapes are incompatible with the layer."""


class NotDecomposable(Exception):
    """I - W.T W has a genuinely negative eigenvalue; no real residue exists."""


def as_matrix(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def save_matrix(path, m) -> None:
    """Write a matrix as 'rows cols' then one space-separated row per line."""
    m = as_matrix(m)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad matrix header")
        rows, cols = int(header[0]), int(header[1])
        m = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if m.shape != (rows, cols):
        raise ValueError(f"{path}: header {rows}x{cols} does not match body {m.shape}")
    return m


def left_inverse(w) -> np.ndarray:
    """Minimum-Frobenius-norm left inverse ``(W.T W)^-1 W.T``.

    Raises RankDeficient when the smallest singular value is below
    ``RANK_RTOL`` times the largest, in which case no left inverse exists
    and variance cannot be preserved.
    """
    w = as_matrix(w)
    if w.shape[0] < w.shape[1]:
        raise RankDeficient(f"{w.shape}: fewer rows than columns")
    svals = np.linalg.svd(w, compute_uv=False)
    if svals[-1] <= RANK_RTOL * svals[0]:
        raise RankDeficient(f"singular value ratio {svals[-1]:.3e}/{svals[0]:.3e}")
    return np.linalg.solve(w.T @ w, w.T)


@dataclass(frozen=True)
class LinearConsistentLayer:
    """A forward/generative weight pair with a certification flag.

    ``certified`` is set only when ``generative @ forward`` is within
    ``CERT_TOL`` of the identity (Frobenius norm) and the forward weight is
    well conditioned (singular value ratio below ``COND_LIMIT``).
    """

    forward: np.ndarray
    generative: np.ndarray
    certified: bool = field(default=False)

    def __post_init__(self):
        f = as_matrix(self.forward)
        g = as_matrix(self.generative)
        if f.shape[0] < f.shape[1]:
            raise DimensionMismatch("hidden dimension must be >= visible dimension")
        if g.shape != (f.shape[1], f.shape[0]):
            raise DimensionMismatch(f"generative shape {g.shape} incompatible with forward {f.shape}")
        object.__setattr__(self, "forward", f)
        object.__setattr__(self, "generative", g)
        svals = np.linalg.svd(f, compute_uv=False)
        well_conditioned = svals[-1] > 0 and svals[0] / svals[-1] <= COND_LIMIT
        err = np.linalg.norm(g @ f - np.eye(f.shape[1]))
        object.__setattr__(self, "certified", bool(well_conditioned and err <= CERT_TOL))

    @property
    def visible_dim(self) -> int:
        return self.forward.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.forward.shape[0]

    @classmethod
    def from_forward(cls, w) -> "LinearConsistentLayer":
        """Build a certified layer by pairing ``w`` with its left inverse."""
        w = as_matrix(w)
        return cls(w, left_inverse(w))


def identity_layer(dim: int) -> LinearConsistentLayer:
    eye = np.eye(dim)
    return LinearConsistentLayer(eye, eye)


def layer_forward(layer: LinearConsistentLayer, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (layer.visible_dim,):
        raise DimensionMismatch(f"visible vector {v.shape} vs dim {layer.visible_dim}")
    return layer.forward @ v


def layer_generative(layer: LinearConsistentLayer, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (layer.hidden_dim,):
        raise DimensionMismatch(f"hidden vector {h.shape} vs dim {layer.hidden_dim}")
    return layer.generative @ h


@dataclass(frozen=True)
class PreservationReport:
    max_error: float
    product_error: float
    passed: bool


def check_variance_preservation(layer: LinearConsistentLayer, samples: int = 100,
                                seed: int = 0) -> PreservationReport:
    """Round-trip ``samples`` random unit vectors and bound the worst error.

    Passes iff both the max infinity-norm round-trip error and the direct
    Frobenius error of ``G @ W - I`` are at most ``CERT_TOL``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        v = rng.standard_normal(layer.visible_dim)
        n = np.linalg.norm(v)
        if n == 0:
            continue
        v /= n
        back = layer.generative @ (layer.forward @ v)
        worst = max(worst, float(np.max(np.abs(back - v))))
    prod = float(np.linalg.norm(layer.generative @ layer.forward - np.eye(layer.visible_dim)))
    return PreservationReport(worst, prod, worst <= CERT_TOL and prod <= CERT_TOL)


@dataclass(frozen=True)
class ResidueExtraction:
    residue_forward: np.ndarray      # U, rows = number of retained eigenpairs
    residue_generative: np.ndarray   # U.T
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def extract_residue(w) -> ResidueExtraction:
    """Factor ``I - W.T W`` into ``U.T U`` through its eigendecomposition.

    ``U = sqrt(L) E.T`` restricted to eigenpairs with eigenvalue above
    ``PSD_TOL``.  Eigenvalues in ``[-PSD_TOL, 0)`` are clamped to zero;
    anything more negative means the forward weight claims more variance
    than the visible space holds, which raises NotDecomposable.

    Eigenvector signs are fixed so the first nonzero entry of each vector
    is positive, making the extraction deterministic.
    """
    w = as_matrix(w)
    gap = np.eye(w.shape[1]) - w.T @ w
    evals, evecs = np.linalg.eigh(gap)
    if np.min(evals) < -PSD_TOL:
        raise NotDecomposable(f"eigenvalue {np.min(evals):.3e} below -{PSD_TOL:.0e}")
    evals = np.clip(evals, 0.0, None)
    for j in range(evecs.shape[1]):
        col = evecs[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            evecs[:, j] = -col
    keep = evals > PSD_TOL
    u = np.sqrt(evals[keep])[:, None] * evecs[:, keep].T
    if u.size == 0:
        u = np.zeros((0, w.shape[1]))
    return ResidueExtraction(u, u.T.copy(), evals, evecs)


def residue_reconstruct(w_gen, u_gen, h, r) -> np.ndarray:
    """Rebuild a visible vector from a hidden part and its residue part."""
    w_gen = as_matrix(w_gen)
    u_gen = as_matrix(u_gen)
    h = np.asarray(h, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if w_gen.shape[1] != h.shape[0] or u_gen.shape[1] != r.shape[0]:
        raise DimensionMismatch("hidden/residue lengths do not match the generative weights")
    if w_gen.shape[0] != u_gen.shape[0]:
        raise DimensionMismatch("generative weights disagree on the visible dimension")
    return w_gen @ h + u_gen @ r


@dataclass(frozen=True)
class LayerStack:
    """An ordered stack of layers sharing the forward/generative contract.

    Any object with ``visible_dim``, ``hidden_dim``, ``fwd(v)`` and
    ``gen(h)`` (or a LinearConsistentLayer) can participate, so rectified
    mirror layers and basis-set layers stack with linear ones.
    """

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("empty stack")
        for lo, hi in zip(layers, layers[1:]):
            if _hidden_dim(lo) != _visible_dim(hi):
                raise DimensionMismatch(
                    f"layer output {_hidden_dim(lo)} feeds layer input {_visible_dim(hi)}")
        object.__setattr__(self, "layers", layers)

    @property
    def visible_dim(self) -> int:
        return _visible_dim(self.layers[0])

    @property
    def hidden_dim(self) -> int:
        return _hidden_dim(self.layers[-1])


def _visible_dim(layer) -> int:
    return layer.visible_dim


def _hidden_dim(layer) -> int:
    return layer.hidden_dim


def _fwd(layer, v):
    if isinstance(layer, LinearConsistentLayer):
        return layer_forward(layer, v)
    return layer.fwd(v)


def _gen(layer, h):
    if isinstance(layer, LinearConsistentLayer):
        return layer_generative(layer, h)
    return layer.gen(h)


def stack_forward(stack: LayerStack, v) -> np.ndarray:
    x = np.asarray(v, dtype=np.float64)
    for layer in stack.layers:
        x = _fwd(layer, x)
    return x


def stack_generative(stack: LayerStack, h_top) -> np.ndarray:
    x = np.asarray(h_top, dtype=np.float64)
    for layer in reversed(stack.layers):
        x = _gen(layer, x)
    return x


def random_certified_layer(visible: int, hidden: int, rng) -> LinearConsistentLayer:
    """Draw a random full-rank forward weight and certify it with its left inverse.

    Redraws until the condition guard is met, which for Gaussian entries
    essentially never takes more than one extra attempt.
    """
    if hidden < visible:
        raise DimensionMismatch("hidden dimension must be >= visible dimension")
    while True:
        w = rng.standard_normal((hidden, visible))
        svals = np.linalg.svd(w, compute_uv=False)
        if svals[-1] > 1e-3 * svals[0]:
            layer = LinearConsistentLayer.from_forward(w)
            if layer.certified:
                return layer
