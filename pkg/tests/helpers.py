"""Shared oracles and generators for the test suite.

The DFT oracles here are deliberate O(N^2) summations, independent of the
FFT-based implementation they check.
"""

import numpy as np

from ktrecon import DOMAIN_IMAGE, DynTensor


def naive_dft(x: np.ndarray, axis: int, inverse: bool = False) -> np.ndarray:
    """Unitary DFT along one axis by explicit summation."""
    n = x.shape[axis]
    sign = 2j if inverse else -2j
    k, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mat = np.exp(sign * np.pi * k * j / n) / np.sqrt(n)
    moved = np.moveaxis(x, axis, -1)
    out = moved @ mat.T
    return np.moveaxis(out, -1, axis)


def naive_dft2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Unitary 2-D DFT over the last two axes by explicit summation."""
    return naive_dft(naive_dft(x, -2, inverse), -1, inverse)


def random_tensor(rng, shape, domain=DOMAIN_IMAGE) -> DynTensor:
    data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return DynTensor(data, domain)


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.sum(np.conj(a) * b))


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / denom)
