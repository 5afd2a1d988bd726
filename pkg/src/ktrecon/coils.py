"""Coil sensitivity maps: synthesis, per-coil projection and combination.

Maps are normalized so that sum_i |S_i|^2 = 1 at every pixel, which makes
combine(project(m)) == m and keeps the weighted-merge step of the solver
a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import DynTensor, ShapeMismatchError, _freeze

_NORM_TOL = 1e-6
_FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


@dataclass(frozen=True)
class CoilMaps:
    """Per-coil complex sensitivities, shape (n_c, H, W)."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"maps must be (n_c, H, W), got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("coil maps contain non-finite values")
        if self.normalized:
            ssq = np.sum(np.abs(arr) ** 2, axis=0)
            if np.max(np.abs(ssq - 1.0)) > _NORM_TOL:
                raise ValueError("maps flagged normalized but sum_i |S_i|^2 != 1")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def n_coils(self) -> int:
        return self.data.shape[0]

    @property
    def spatial_shape(self) -> tuple:
        return self.data.shape[1:]


def normalize(maps: CoilMaps) -> CoilMaps:
    """Rescale per pixel so sum_i |S_i|^2 = 1."""
    ssq = np.sqrt(np.sum(np.abs(maps.data) ** 2, axis=0))
    if np.any(ssq == 0):
        raise ValueError("cannot normalize maps with an all-zero pixel")
    return CoilMaps(maps.data / ssq, normalized=True)


def synth_maps(n_c: int, H: int, W: int, seed: int = 0) -> CoilMaps:
    """Smooth synthetic sensitivities: Gaussian lobes on the border ellipse.

    Lobe FWHM is 0.8 * max(H, W); each coil carries a linear phase ramp of
    magnitude pi across the FOV pointing at its center.  Deterministic in
    ``seed`` (the seed rotates the coil ring and jitters ramp strengths).
    """
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    rng = np.random.default_rng(seed)
    angle0 = rng.uniform(0.0, 2.0 * np.pi)
    ramp_scale = rng.uniform(0.8, 1.2, size=n_c)

    yy, xx = np.meshgrid(np.arange(H, dtype=np.float64),
                         np.arange(W, dtype=np.float64), indexing="ij")
    sigma = 0.8 * max(H, W) / _FWHM_TO_SIGMA
    fov = float(max(H, W))

    maps = np.empty((n_c, H, W), dtype=np.complex128)
    for i in range(n_c):
        theta = angle0 + 2.0 * np.pi * i / n_c
        cy = (H - 1) / 2.0 + 0.5 * (H - 1) * np.sin(theta)
        cx = (W - 1) / 2.0 + 0.5 * (W - 1) * np.cos(theta)
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        lobe = np.exp(-0.5 * d2 / sigma**2)
        phase = np.pi * ramp_scale[i] * ((xx - cx) * np.cos(theta) +
                                         (yy - cy) * np.sin(theta)) / fov
        maps[i] = lobe * np.exp(1j * phase)
    return normalize(CoilMaps(maps))


def project(m: DynTensor, maps: CoilMaps) -> DynTensor:
    """Per-coil weighting S_i * m, broadcast over frames: (t,y,x) -> (n_c,t,y,x)."""
    if m.has_coils:
        raise ShapeMismatchError("project expects a coil-free (t,y,x) tensor")
    if m.shape[-2:] != maps.spatial_shape:
        raise ShapeMismatchError(
            f"spatial dims mismatch: image {m.shape[-2:]} vs maps {maps.spatial_shape}"
        )
    return DynTensor(maps.data[:, None, :, :] * m.data[None], m.domain)


def combine(x: DynTensor, maps: CoilMaps) -> DynTensor:
    """Adjoint of :func:`project`: sum_i conj(S_i) * x_i -> (t,y,x)."""
    if not x.has_coils:
        raise ShapeMismatchError("combine expects a (coil,t,y,x) tensor")
    if x.n_coils != maps.n_coils or x.shape[-2:] != maps.spatial_shape:
        raise ShapeMismatchError(
            f"coil/spatial dims mismatch: data {x.shape} vs maps {maps.data.shape}"
        )
    return DynTensor(np.sum(np.conj(maps.data)[:, None, :, :] * x.data, axis=0),
                     x.domain)
