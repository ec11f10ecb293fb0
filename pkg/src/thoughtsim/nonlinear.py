"""Non-linear layers that keep the exact round-trip property.

Three constructions:

* mirror rectified pairs: ``relu(Wv)`` and ``relu(-Wv)`` jointly carry
  ``Wv`` since ``relu(x) - relu(-x) == x``, so the generative side
  recovers ``v`` through the linear left inverse;
* basis sets: elementwise gating functions that sum to one everywhere
  split a pre-activation into channels whose sum restores it exactly;
* circular convolution layers: a kernel with a nowhere-vanishing
  spectrum is inverted by the kernel whose spectrum is the elementwise
  reciprocal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consistency import DimensionMismatch, LinearConsistentLayer, layer_forward, layer_generative

SPECTRUM_TOL = 1e-10


class NonInvertibleKernel(Exception):
    """A spectral coefficient of the kernel is (numerically) zero."""


def relu(x):
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class MirrorRectLayer:
    """Rectified layer over a certified linear base.

    As a stack layer it exposes a hidden space of twice the base hidden
    dimension: the positive lobe followed by the negative lobe.
    """

    base: LinearConsistentLayer

    def __post_init__(self):
        if not self.base.certified:
            raise ValueError("mirror layer requires a certified base layer")

    @property
    def visible_dim(self):
        return self.base.visible_dim

    @property
    def hidden_dim(self):
        return 2 * self.base.hidden_dim

    def fwd(self, v):
        pos, neg = mirror_forward(self, v)
        return np.concatenate([pos, neg])

    def gen(self, h):
        h = np.asarray(h, dtype=np.float64)
        if h.shape != (self.hidden_dim,):
            raise DimensionMismatch(f"hidden vector {h.shape} vs dim {self.hidden_dim}")
        k = self.base.hidden_dim
        return mirror_generative(self, h[:k], h[k:])


def mirror_forward(layer: MirrorRectLayer, v):
    pre = layer_forward(layer.base, v)
    return relu(pre), relu(-pre)


def mirror_generative(layer: MirrorRectLayer, h_pos, h_neg):
    h_pos = np.asarray(h_pos, dtype=np.float64)
    h_neg = np.asarray(h_neg, dtype=np.float64)
    k = layer.base.hidden_dim
    if h_pos.shape != (k,) or h_neg.shape != (k,):
        raise DimensionMismatch("mirror lobes must both have the base hidden dimension")
    return layer_generative(layer.base, h_pos - h_neg)


@dataclass(frozen=True)
class BasisSet:
    """Elementwise selectors forming a partition of unity on the reals.

    Each selector maps a pre-activation array to a {0,1} mask; for every
    input value the masks sum to exactly one.
    """

    selectors: tuple

    def masks(self, x):
        x = np.asarray(x, dtype=np.float64)
        return [np.asarray(s(x), dtype=np.float64) for s in self.selectors]


def step_basis_pair() -> BasisSet:
    """The step-function pair: x >= 0 goes to channel 0, x < 0 to channel 1.

    Zero is assigned to the nonnegative channel so the partition covers it.
    """
    return BasisSet((
        lambda x: (x >= 0).astype(np.float64),
        lambda x: (x < 0).astype(np.float64),
    ))


def basis_set_forward(layer: LinearConsistentLayer, basis: BasisSet, v):
    """Split ``W v`` into gated channels; the channels sum back bit-for-bit."""
    pre = layer_forward(layer, v)
    return [mask * pre for mask in basis.masks(pre)]


def basis_set_generative(layer: LinearConsistentLayer, parts):
    parts = [np.asarray(p, dtype=np.float64) for p in parts]
    for p in parts:
        if p.shape != (layer.hidden_dim,):
            raise DimensionMismatch(f"channel shape {p.shape} vs hidden dim {layer.hidden_dim}")
    total = np.zeros(layer.hidden_dim)
    for p in parts:
        total = total + p
    return layer_generative(layer, total)


@dataclass(frozen=True)
class BasisSplitLayer:
    """Stack adapter: channels concatenated on the hidden side."""

    base: LinearConsistentLayer
    basis: BasisSet

    @property
    def visible_dim(self):
        return self.base.visible_dim

    @property
    def hidden_dim(self):
        return len(self.basis.selectors) * self.base.hidden_dim

    def fwd(self, v):
        return np.concatenate(basis_set_forward(self.base, self.basis, v))

    def gen(self, h):
        h = np.asarray(h, dtype=np.float64)
        if h.shape != (self.hidden_dim,):
            raise DimensionMismatch(f"hidden vector {h.shape} vs dim {self.hidden_dim}")
        k = self.base.hidden_dim
        parts = [h[i * k:(i + 1) * k] for i in range(len(self.basis.selectors))]
        return basis_set_generative(self.base, parts)


def circular_convolve(kernel, signal):
    """Circular convolution with the kernel zero-padded to the signal length."""
    signal = np.asarray(signal, dtype=np.float64)
    n = signal.shape[0]
    padded = np.zeros(n)
    padded[:len(kernel)] = kernel
    return np.real(np.fft.ifft(np.fft.fft(padded) * np.fft.fft(signal)))


@dataclass(frozen=True)
class ConvLayer:
    kernel: np.ndarray
    inverse_kernel: np.ndarray
    signal_length: int

    @property
    def visible_dim(self):
        return self.signal_length

    @property
    def hidden_dim(self):
        return self.signal_length

    def fwd(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.signal_length,):
            raise DimensionMismatch(f"signal {v.shape} vs length {self.signal_length}")
        return circular_convolve(self.kernel, v)

    def gen(self, h):
        h = np.asarray(h, dtype=np.float64)
        if h.shape != (self.signal_length,):
            raise DimensionMismatch(f"signal {h.shape} vs length {self.signal_length}")
        return circular_convolve(self.inverse_kernel, h)


def conv_make(kernel, signal_length: int) -> ConvLayer:
    """Build a convolution layer with its exact spectral inverse.

    A zero coefficient in the padded kernel spectrum would destroy the
    variance at that frequency, so it is rejected up front.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.shape[0] > signal_length:
        raise DimensionMismatch("kernel must be 1-d and no longer than the signal")
    padded = np.zeros(signal_length)
    padded[:kernel.shape[0]] = kernel
    spectrum = np.fft.fft(padded)
    if np.min(np.abs(spectrum)) < SPECTRUM_TOL:
        raise NonInvertibleKernel(
            f"spectral magnitude {np.min(np.abs(spectrum)):.3e} below {SPECTRUM_TOL:.0e}")
    inverse = np.real(np.fft.ifft(1.0 / spectrum))
    return ConvLayer(padded, inverse, signal_length)


def conv_basis_forward(layer: ConvLayer, basis: BasisSet, v):
    """Gate the convolved signal in the signal domain.

    Equivalent to gating the spectrum channel by channel, but avoids
    complex-valued masks; the channels still sum to the full convolution.
    """
    pre = layer.fwd(v)
    return [mask * pre for mask in basis.masks(pre)]


def conv_basis_generative(layer: ConvLayer, parts):
    parts = [np.asarray(p, dtype=np.float64) for p in parts]
    total = np.zeros(layer.signal_length)
    for p in parts:
        if p.shape != (layer.signal_length,):
            raise DimensionMismatch("channel length does not match the signal length")
        total = total + p
    return layer.gen(total)


def save_kernel(path, kernel) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(" ".join(format(x, ".17g") for x in np.asarray(kernel, dtype=np.float64)) + "\n")


def load_kernel(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(tok) for tok in fh.read().split()], dtype=np.float64)
