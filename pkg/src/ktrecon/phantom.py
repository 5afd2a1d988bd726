"""Synthetic dynamic cine phantom and acquisition simulation.

Ground truth is a stack of anti-aliased ellipses whose radii pulse and
whose centers sway sinusoidally with the frame index, so frame T equals
frame 0 under circular extension.  Acquisition follows the per-coil
forward model: mask o spatial FFT o coil weighting, plus optional complex
Gaussian noise in k-space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coils import CoilMaps, project
from .sampling import SamplingMask, apply_mask
from .tensors import DOMAIN_IMAGE, DynTensor, ShapeMismatchError
from .transforms import fft_spatial

_SUPERSAMPLE = 4


@dataclass(frozen=True)
class Ellipse:
    """One structure: center/axes in pixels, pulsation and sway amplitudes.

    Radius law r(t) = r0 * (1 + pulse * sin(2 pi t / T)); the center moves
    by (sway_y, sway_x) * sin(2 pi t / T).
    """

    cy: float
    cx: float
    ry: float
    rx: float
    intensity: float = 1.0
    pulse: float = 0.0
    sway_y: float = 0.0
    sway_x: float = 0.0


@dataclass(frozen=True)
class PhantomSpec:
    T: int
    H: int
    W: int
    ellipses: tuple = ()
    background: float = 0.2
    phase_cycles: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.T, self.H, self.W) < 1:
            raise ValueError("T, H, W must all be >= 1")
        for e in self.ellipses:
            if not 0.0 <= e.pulse <= 0.5:
                raise ValueError(f"pulsation amplitude {e.pulse} outside [0, 0.5]")
            if not 0.0 <= e.intensity <= 1.0:
                raise ValueError(f"intensity {e.intensity} outside [0, 1]")
            reach_y = e.ry * (1 + e.pulse) + abs(e.sway_y)
            reach_x = e.rx * (1 + e.pulse) + abs(e.sway_x)
            if (e.cy - reach_y < 0 or e.cy + reach_y > self.H
                    or e.cx - reach_x < 0 or e.cx + reach_x > self.W):
                raise ValueError("ellipse leaves the FOV at some frame")


def default_spec(T: int = 16, H: int = 64, W: int = 64,
                 noise_sigma: float = 0.0, seed: int = 0) -> PhantomSpec:
    """Pulsating 'ventricle' plus a static 'chest wall' over a dim background."""
    return PhantomSpec(
        T=T, H=H, W=W,
        ellipses=(
            Ellipse(cy=0.52 * H, cx=0.46 * W, ry=0.14 * H, rx=0.14 * W,
                    intensity=1.0, pulse=0.3),
            Ellipse(cy=0.30 * H, cx=0.62 * W, ry=0.10 * H, rx=0.16 * W,
                    intensity=0.6),
        ),
        background=0.2, noise_sigma=noise_sigma, seed=seed,
    )


def _coverage(H: int, W: int, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    """Fraction of each pixel inside the ellipse, 4x4 supersampled."""
    offs = (np.arange(_SUPERSAMPLE) + 0.5) / _SUPERSAMPLE - 0.5
    yy = np.arange(H)[:, None] + offs[None, :]
    xx = np.arange(W)[:, None] + offs[None, :]
    fy = ((yy - cy) / ry) ** 2
    fx = ((xx - cx) / rx) ** 2
    inside = fy[:, None, :, None] + fx[None, :, None, :] <= 1.0
    return inside.mean(axis=(2, 3))


def generate(spec: PhantomSpec) -> DynTensor:
    """Render the ground-truth complex image sequence (t, y, x)."""
    frames = np.empty((spec.T, spec.H, spec.W), dtype=np.float64)
    for t in range(spec.T):
        phase = np.sin(2.0 * np.pi * t / spec.T)
        img = np.full((spec.H, spec.W), spec.background, dtype=np.float64)
        for e in spec.ellipses:
            r = 1.0 + e.pulse * phase
            cov = _coverage(spec.H, spec.W,
                            e.cy + e.sway_y * phase, e.cx + e.sway_x * phase,
                            e.ry * r, e.rx * r)
            img = img * (1.0 - cov) + e.intensity * cov
        frames[t] = img
    data = frames.astype(np.complex128)
    if spec.phase_cycles:
        ramp = np.exp(2j * np.pi * spec.phase_cycles * np.arange(spec.W) / spec.W)
        data = data * ramp[None, None, :]
    return DynTensor(data, DOMAIN_IMAGE)


def acquire(m_gt: DynTensor, maps: CoilMaps, mask: SamplingMask,
            noise_sigma: float = 0.0, seed: int = 0) -> DynTensor:
    """Simulate the per-coil acquisition: v = mask * (F_s S_i m + noise).

    Noise is complex Gaussian with total std ``noise_sigma`` per k-space
    entry (real and imaginary parts each sigma/sqrt(2)), added before
    masking.  Deterministic in ``seed``.
    """
    if m_gt.has_coils:
        raise ShapeMismatchError("acquire expects a coil-free ground truth")
    k = fft_spatial(project(m_gt, maps))
    data = k.data
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = noise_sigma / np.sqrt(2.0)
        data = data + scale * (rng.standard_normal(data.shape)
                               + 1j * rng.standard_normal(data.shape))
    return apply_mask(DynTensor(data, k.domain), mask)
