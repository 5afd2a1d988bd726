"""Unitary Fourier transforms between the image, k-space and x-f domains.

Both directions use the orthonormal (1/sqrt(n)) convention so that the
adjoint of each transform is exactly its inverse.  The spatial transform
acts on (y, x) per frame per coil; the temporal transform acts along t
for every (coil, y, x) position.  Zero frequency sits at index 0 of each
transformed axis; use :func:`centered` for a display-ordered view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import DOMAIN_IMAGE, DOMAIN_KSPACE, DOMAIN_XF, DynTensor

_SPATIAL_AXES = (-2, -1)
_TEMPORAL_AXIS = -3


@dataclass(frozen=True)
class FftPlan:
    """A (axis set, direction) pair with the unitary normalization baked in.

    axes: "spatial" transforms (y, x), "temporal" transforms t.
    direction: "forward" or "adjoint"; adjoint == inverse here.
    """

    axes: str
    direction: str

    def __post_init__(self):
        if self.axes not in ("spatial", "temporal"):
            raise ValueError(f"unknown axis set {self.axes!r}")
        if self.direction not in ("forward", "adjoint"):
            raise ValueError(f"unknown direction {self.direction!r}")

    def apply(self, x: DynTensor) -> DynTensor:
        if self.axes == "spatial":
            if self.direction == "forward":
                x.require_domain(DOMAIN_IMAGE, "spatial forward FFT")
                return DynTensor(np.fft.fft2(x.data, axes=_SPATIAL_AXES, norm="ortho"),
                                 DOMAIN_KSPACE)
            x.require_domain(DOMAIN_KSPACE, "spatial adjoint FFT")
            return DynTensor(np.fft.ifft2(x.data, axes=_SPATIAL_AXES, norm="ortho"),
                             DOMAIN_IMAGE)
        if self.direction == "forward":
            x.require_domain(DOMAIN_IMAGE, "temporal forward FFT")
            return DynTensor(np.fft.fft(x.data, axis=_TEMPORAL_AXIS, norm="ortho"),
                             DOMAIN_XF)
        x.require_domain(DOMAIN_XF, "temporal adjoint FFT")
        return DynTensor(np.fft.ifft(x.data, axis=_TEMPORAL_AXIS, norm="ortho"),
                         DOMAIN_IMAGE)


def fft_spatial(x: DynTensor) -> DynTensor:
    """Image (t,y,x) -> k-space (t,ky,kx), unitary."""
    return FftPlan("spatial", "forward").apply(x)


def ifft_spatial(x: DynTensor) -> DynTensor:
    """Exact inverse/adjoint of :func:`fft_spatial`."""
    return FftPlan("spatial", "adjoint").apply(x)


def fft_temporal(x: DynTensor) -> DynTensor:
    """Image sequence -> x-f domain (f replaces t), unitary."""
    return FftPlan("temporal", "forward").apply(x)


def ifft_temporal(x: DynTensor) -> DynTensor:
    """Exact inverse/adjoint of :func:`fft_temporal`."""
    return FftPlan("temporal", "adjoint").apply(x)


def centered(x: DynTensor) -> np.ndarray:
    """Display view of k-space (or x-f) data with zero frequency centered.

    Returns a shifted copy; never feed the result back into the pipeline,
    which keeps zero frequency at index 0 throughout.
    """
    if x.domain == DOMAIN_KSPACE:
        return np.fft.fftshift(x.data, axes=_SPATIAL_AXES)
    if x.domain == DOMAIN_XF:
        return np.fft.fftshift(x.data, axes=(_TEMPORAL_AXIS,))
    return np.array(x.data)
