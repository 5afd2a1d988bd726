"""Complex dynamic-image tensors shared by every stage of the pipeline.

The axis order is fixed to [coil, t, y, x]; tensors without a coil axis
are 3-D (t, y, x).  Values are complex128 internally (file storage is
float32 pairs, see :mod:`ktrecon.io`) and arrays are frozen after
construction so tensors can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAIN_IMAGE = "image-xt"
DOMAIN_KSPACE = "kspace-kt"
DOMAIN_XF = "xf"
DOMAINS = (DOMAIN_IMAGE, DOMAIN_KSPACE, DOMAIN_XF)


class ShapeMismatchError(ValueError):
    """Operands do not have compatible shapes."""


class DomainError(ValueError):
    """Tensor carries the wrong domain tag for the requested operation."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    if arr.flags.writeable and arr.base is None:
        arr = arr.view()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DynTensor:
    """Complex image/k-space sequence, shape (t, y, x) or (coil, t, y, x)."""

    data: np.ndarray
    domain: str = DOMAIN_IMAGE

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim not in (3, 4):
            raise ShapeMismatchError(
                f"expected 3-D (t,y,x) or 4-D (coil,t,y,x) data, got ndim={arr.ndim}"
            )
        if any(n < 1 for n in arr.shape):
            raise ShapeMismatchError(f"all axis lengths must be >= 1, got {arr.shape}")
        if self.domain not in DOMAINS:
            raise DomainError(f"unknown domain tag {self.domain!r}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def has_coils(self) -> bool:
        return self.data.ndim == 4

    @property
    def n_coils(self) -> int:
        return self.data.shape[0] if self.has_coils else 1

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def frames(self) -> int:
        return self.data.shape[-3]

    def magnitude(self) -> "RealTensor":
        return RealTensor(np.abs(self.data[0] if self.has_coils else self.data))

    def require_domain(self, domain: str, what: str = "operation") -> None:
        if self.domain != domain:
            raise DomainError(f"{what} expects {domain!r} input, got {self.domain!r}")


@dataclass(frozen=True)
class RealTensor:
    """Real-valued (t, y, x) stack, e.g. magnitude images or error maps."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"expected 3-D (t,y,x) data, got ndim={arr.ndim}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def shape(self) -> tuple:
        return self.data.shape


def zeros_like(a: DynTensor) -> DynTensor:
    return DynTensor(np.zeros(a.shape, dtype=np.complex128), a.domain)


def _check_match(a: DynTensor, b: DynTensor, need_domain: bool) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if need_domain and a.domain != b.domain:
        raise DomainError(f"domain mismatch: {a.domain!r} vs {b.domain!r}")


def add(a: DynTensor, b: DynTensor) -> DynTensor:
    _check_match(a, b, need_domain=True)
    return DynTensor(a.data + b.data, a.domain)


def sub(a: DynTensor, b: DynTensor) -> DynTensor:
    _check_match(a, b, need_domain=True)
    return DynTensor(a.data - b.data, a.domain)


def mul(a: DynTensor, b: DynTensor) -> DynTensor:
    _check_match(a, b, need_domain=False)
    return DynTensor(a.data * b.data, a.domain)


def scale(a: DynTensor, c: complex) -> DynTensor:
    return DynTensor(a.data * complex(c), a.domain)


def norm(a: DynTensor, kind: str = "l2") -> float:
    """l1 = sum of moduli, l2 = sqrt of sum of squared moduli, linf = max modulus."""
    mags = np.abs(a.data)
    if kind == "l1":
        return float(mags.sum())
    if kind == "l2":
        return float(np.sqrt(np.sum(mags * mags)))
    if kind == "linf":
        return float(mags.max())
    raise ValueError(f"unknown norm kind {kind!r}")
