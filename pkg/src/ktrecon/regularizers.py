"""De-aliasing operators for the x-f and x-t sub-problems.

Both sub-problems share the residual structure: the update returns
baseline + f(input - baseline), where f is either an exact complex
soft-threshold (classical mode) or a trained denoiser.  Any f with
f(0) = 0 therefore leaves the baseline fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import DynTensor, ShapeMismatchError

KIND_IDENTITY = "identity"
KIND_SOFT = "soft_threshold"
KIND_LEARNED = "learned"


@dataclass(frozen=True)
class ProxSpec:
    """Selects the de-aliasing operator for one domain.

    For ``soft_threshold`` the threshold is tau = 1/beta in the x-f
    sub-problem and tau = mu/alpha in the x-t sub-problem; ``learned``
    carries a trained net exposing ``denoise(residual) -> residual``.
    """

    kind: str = KIND_SOFT
    tau: float = 0.0
    net: object = None

    def __post_init__(self):
        if self.kind not in (KIND_IDENTITY, KIND_SOFT, KIND_LEARNED):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.tau < 0:
            raise ValueError("threshold tau must be >= 0")
        if self.kind == KIND_LEARNED and self.net is None:
            raise ValueError("learned regularizer needs a net")


def soft_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """Complex soft-threshold: shrink each modulus by tau, keep the phase.

    Exactly minimizes 0.5*|y - x|^2 + tau*|y| per entry.
    """
    mag = np.abs(x)
    shrink = np.maximum(mag - tau, 0.0)
    out = np.zeros_like(x)
    np.divide(x * shrink, mag, out=out, where=mag > 0)
    return out


def prox_soft(x: DynTensor, tau: float) -> DynTensor:
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return x
    return DynTensor(soft_threshold(x.data, tau), x.domain)


def _regularize(x_in: DynTensor, baseline: DynTensor, spec: ProxSpec) -> DynTensor:
    if x_in.shape != baseline.shape:
        raise ShapeMismatchError(
            f"input {x_in.shape} and baseline {baseline.shape} differ"
        )
    if spec.kind == KIND_IDENTITY:
        return x_in
    residual = x_in.data - baseline.data
    if spec.kind == KIND_SOFT:
        cleaned = soft_threshold(residual, spec.tau)
    else:
        cleaned = spec.net.denoise(residual)
        if cleaned.shape != residual.shape:
            raise ShapeMismatchError("net output shape differs from its input")
    return DynTensor(baseline.data + cleaned, x_in.domain)


def xf_regularize(rho_in: DynTensor, rho_baseline: DynTensor,
                  spec: ProxSpec) -> DynTensor:
    """x-f de-aliasing: baseline + f(rho_in - baseline)."""
    return _regularize(rho_in, rho_baseline, spec)


def xt_regularize(m_in: DynTensor, m_baseline: DynTensor,
                  spec: ProxSpec) -> DynTensor:
    """Image-domain de-aliasing: baseline + f(m_in - baseline)."""
    return _regularize(m_in, m_baseline, spec)
