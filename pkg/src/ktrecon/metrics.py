"""Quantitative evaluation: NMSE/PSNR on complex images, SSIM/HFEN on
magnitudes, all restricted to an automatically derived dynamic-region crop.

Kernel conventions (fixed, documented here): SSIM uses an 11x11 Gaussian
window with sigma 1.5, K1=0.01, K2=0.03 and dynamic range L=1 on inputs
normalized by the reference maximum; HFEN uses a 15x15
Laplacian-of-Gaussian kernel with sigma 1.5, normalized to zero sum, with
reflective padding.  PSNR uses the reference peak magnitude over the crop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import convolve2d

from .tensors import DynTensor, RealTensor, ShapeMismatchError

_STD_FRACTION = 0.05
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
HFEN_KERNEL = 15
HFEN_SIGMA = 1.5


@dataclass(frozen=True)
class CropBox:
    y0: int
    y1: int
    x0: int
    x1: int
    full_fov: bool = False

    def slice(self, arr: np.ndarray) -> np.ndarray:
        return arr[..., self.y0:self.y1, self.x0:self.x1]

    def contains(self, other: "CropBox") -> bool:
        return (self.y0 <= other.y0 and self.y1 >= other.y1
                and self.x0 <= other.x0 and self.x1 >= other.x1)


@dataclass(frozen=True)
class EvalReport:
    nmse: float
    psnr: float
    ssim: float
    hfen: float
    crop: CropBox
    per_frame: dict = field(default_factory=dict)


def _as_array(x) -> np.ndarray:
    if isinstance(x, (DynTensor, RealTensor)):
        return x.data
    return np.asarray(x)


def crop_dynamic(gt: DynTensor, margin: int = 4) -> CropBox:
    """Bounding box of pixels whose temporal magnitude-std is significant.

    Pixels whose std exceeds 5% of the maximum temporal std are boxed,
    the margin added, and the box clipped to the FOV.  A fully static
    sequence yields the full FOV with ``full_fov=True``.
    """
    arr = _as_array(gt)
    if arr.ndim == 4:
        raise ShapeMismatchError("crop_dynamic expects a coil-free sequence")
    T, H, W = arr.shape
    if T < 2:
        raise ValueError("need at least two frames to detect dynamics")
    std = np.abs(arr).std(axis=0)
    peak = std.max()
    if peak <= 0:
        return CropBox(0, H, 0, W, full_fov=True)
    ys, xs = np.nonzero(std > _STD_FRACTION * peak)
    return CropBox(max(0, int(ys.min()) - margin), min(H, int(ys.max()) + 1 + margin),
                   max(0, int(xs.min()) - margin), min(W, int(xs.max()) + 1 + margin))


def nmse(x, ref) -> float:
    """||x - ref||^2 / ||ref||^2 on complex values."""
    xa, ra = _as_array(x), _as_array(ref)
    if xa.shape != ra.shape:
        raise ShapeMismatchError(f"shape mismatch: {xa.shape} vs {ra.shape}")
    denom = np.sum(np.abs(ra) ** 2)
    if denom == 0:
        raise ValueError("reference is identically zero")
    return float(np.sum(np.abs(xa - ra) ** 2) / denom)


def psnr(x, ref) -> float:
    """10 log10(peak^2 / mse) in dB with peak = max |ref|; +inf when x == ref."""
    xa, ra = _as_array(x), _as_array(ref)
    if xa.shape != ra.shape:
        raise ShapeMismatchError(f"shape mismatch: {xa.shape} vs {ra.shape}")
    peak = np.abs(ra).max()
    if peak == 0:
        raise ValueError("reference is identically zero")
    mse = np.mean(np.abs(xa - ra) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()


def ssim(x_mag, ref_mag) -> float:
    """Mean local SSIM on magnitude images already normalized to [0, 1].

    Inputs may be (H, W) or (T, H, W); frames are averaged.  Symmetric in
    its arguments since the dynamic range is fixed at L=1.
    """
    xa, ra = _as_array(x_mag), _as_array(ref_mag)
    if xa.shape != ra.shape:
        raise ShapeMismatchError(f"shape mismatch: {xa.shape} vs {ra.shape}")
    if xa.ndim == 2:
        xa, ra = xa[None], ra[None]
    if min(xa.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for xf, rf in zip(xa, ra):
        mu_x = convolve2d(xf, win, mode="valid")
        mu_r = convolve2d(rf, win, mode="valid")
        xx = convolve2d(xf * xf, win, mode="valid") - mu_x**2
        rr = convolve2d(rf * rf, win, mode="valid") - mu_r**2
        xr = convolve2d(xf * rf, win, mode="valid") - mu_x * mu_r
        num = (2 * mu_x * mu_r + c1) * (2 * xr + c2)
        den = (mu_x**2 + mu_r**2 + c1) * (xx + rr + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def log_kernel(size: int = HFEN_KERNEL, sigma: float = HFEN_SIGMA) -> np.ndarray:
    """Laplacian-of-Gaussian kernel, normalized to exactly zero sum."""
    half = (size - 1) / 2.0
    y, x = np.meshgrid(np.arange(size) - half, np.arange(size) - half, indexing="ij")
    r2 = y * y + x * x
    g = np.exp(-r2 / (2 * sigma**2))
    k = (r2 - 2 * sigma**2) / sigma**4 * g
    return k - k.mean()


def hfen(x_mag, ref_mag) -> float:
    """High-frequency error norm: relative L2 error of LoG-filtered frames."""
    xa, ra = _as_array(x_mag), _as_array(ref_mag)
    if xa.shape != ra.shape:
        raise ShapeMismatchError(f"shape mismatch: {xa.shape} vs {ra.shape}")
    if xa.ndim == 2:
        xa, ra = xa[None], ra[None]
    kern = log_kernel()
    vals = []
    for xf, rf in zip(xa, ra):
        ex = ndimage.convolve(xf, kern, mode="reflect")
        er = ndimage.convolve(rf, kern, mode="reflect")
        denom = np.sqrt(np.sum(er * er))
        if denom == 0:
            raise ValueError("reference frame has no high-frequency content")
        vals.append(np.sqrt(np.sum((ex - er) ** 2)) / denom)
    return float(np.mean(vals))


def evaluate(recon: DynTensor, gt: DynTensor, margin: int = 4) -> EvalReport:
    """Full report on the dynamic-region crop, with a per-frame breakdown."""
    box = crop_dynamic(gt, margin)
    xa = box.slice(_as_array(recon))
    ra = box.slice(_as_array(gt))
    peak = np.abs(ra).max()
    xm, rm = np.abs(xa) / peak, np.abs(ra) / peak
    per_frame = {
        "nmse": [nmse(xa[t], ra[t]) for t in range(xa.shape[0])],
        "psnr": [psnr(xa[t], ra[t]) for t in range(xa.shape[0])],
        "ssim": [ssim(xm[t], rm[t]) for t in range(xa.shape[0])],
        "hfen": [hfen(xm[t], rm[t]) for t in range(xa.shape[0])],
    }
    return EvalReport(nmse=nmse(xa, ra), psnr=psnr(xa, ra),
                      ssim=ssim(xm, rm), hfen=hfen(xm, rm),
                      crop=box, per_frame=per_frame)
