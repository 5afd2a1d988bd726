"""Cartesian k-t undersampling: mask generation, application, baseline.

Masks live on the (t, k_y) grid; a sampled line acquires every k_x point.
k_y indexing follows the unshifted FFT convention (DC at row 0, negative
frequencies wrapping from the top), matching :mod:`ktrecon.transforms`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coils import CoilMaps, combine
from .tensors import DOMAIN_KSPACE, DynTensor, ShapeMismatchError, _freeze
from .transforms import ifft_spatial


@dataclass(frozen=True)
class SamplingMask:
    """Binary (T, H) mask over (t, k_y) with acceleration metadata."""

    data: np.ndarray
    accel: float
    center_band: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"mask must be 2-D (T, H), got ndim={arr.ndim}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask entries must be 0 or 1")
        if np.any(arr.sum(axis=1) == 0):
            raise ValueError("every frame must sample at least one k_y line")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def lines(self) -> int:
        return self.data.shape[1]

    @property
    def achieved_accel(self) -> float:
        return self.data.size / float(self.data.sum())

    def union_lines(self) -> np.ndarray:
        """k_y lines sampled in at least one frame."""
        return self.data.max(axis=0)


def signed_ky(H: int) -> np.ndarray:
    """Signed frequency of each k_y row index under the unshifted convention."""
    ky = np.arange(H)
    return np.where(ky <= H // 2, ky, ky - H)


def center_band_rows(H: int, band: int) -> np.ndarray:
    """Row indices of the ``band`` lowest-|k_y| lines."""
    order = np.lexsort((np.arange(H), np.abs(signed_ky(H))))
    return order[:band]


def mask_lattice(T: int, H: int, R: int, stride: int = 1) -> SamplingMask:
    """Regular lattice: every R-th k_y line, frame offset advancing by ``stride``.

    The stride is bumped to the next value coprime with R so the union over
    frames cycles through all residues.
    """
    if R > H:
        raise ValueError(f"acceleration R={R} exceeds number of lines H={H}")
    if R < 1:
        raise ValueError("R must be >= 1")
    stride = max(1, int(stride))
    while math.gcd(stride, R) != 1:
        stride += 1
    mask = np.zeros((T, H), dtype=np.uint8)
    for t in range(T):
        mask[t, (t * stride) % R::R] = 1
    return SamplingMask(mask, accel=float(R), center_band=0)


def _frame_quotas(T: int, n: int) -> np.ndarray:
    """Spread n samples over T frames with counts differing by at most one."""
    base, extra = divmod(n, T)
    quotas = np.full(T, base, dtype=np.int64)
    if extra:
        # Bresenham-style even spread of the +1 frames.
        marks = (np.arange(T) * extra) // T
        bumped = np.flatnonzero(np.diff(np.concatenate(([-1], marks))) > 0)
        quotas[bumped[:extra]] += 1
    return quotas


def mask_vista_like(T: int, H: int, R: float, density_decay: float = 1.0,
                    center_band: int = 4, seed: int = 0,
                    exponent: float = 2.0) -> SamplingMask:
    """Greedy Riesz-energy placement of N = ceil(T*H/R) samples on (t, k_y).

    Each sample goes to the free cell that least increases the pairwise
    energy  sum w(ky) w(ky') / dist^p  with the frame axis stretched by H/T
    and w(ky) = (1 + |ky|/H)^density_decay, so high frequencies thin out.
    Per-frame quotas keep the frame counts within one of each other; a
    post-pass forces the center band into the time-averaged union.  The
    seed only perturbs the first point.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    n_samples = int(np.ceil(T * H / float(R)))
    if n_samples < T:
        raise ValueError(f"infeasible: {n_samples} samples cannot cover {T} frames")
    if n_samples >= T * H:
        return SamplingMask(np.ones((T, H), dtype=np.uint8), accel=float(R),
                            center_band=center_band)

    ky_abs = np.abs(signed_ky(H)).astype(np.float64)
    weight = (1.0 + ky_abs / H) ** density_decay
    t_scale = H / float(T)

    rng = np.random.default_rng(seed)
    t0 = int(rng.integers(T))
    k0 = center_band_rows(H, max(1, H // 8))[int(rng.integers(max(1, H // 8)))]

    taken = np.zeros((T, H), dtype=bool)
    # acc[t, ky] = sum over placed points of w(point) / dist^p
    acc = np.zeros((T, H), dtype=np.float64)
    counts = np.zeros(T, dtype=np.int64)
    quotas = _frame_quotas(T, n_samples)

    tt = np.arange(T, dtype=np.float64)[:, None] * t_scale
    kk = signed_ky(H).astype(np.float64)[None, :]

    def place(t: int, k: int) -> None:
        taken[t, k] = True
        counts[t] += 1
        d2 = (tt - t * t_scale) ** 2 + (kk - float(signed_ky(H)[k])) ** 2
        with np.errstate(divide="ignore"):
            contrib = weight[k] / d2 ** (exponent / 2.0)
        contrib[t, k] = 0.0
        acc[...] += contrib

    place(t0, k0)
    # Tie-breaking: lowest |ky|, then lowest t.
    tie_ky = np.broadcast_to(ky_abs[None, :], (T, H))
    tie_t = np.broadcast_to(np.arange(T)[:, None], (T, H))
    for _ in range(n_samples - 1):
        cost = weight[None, :] * acc
        blocked = taken | (counts >= quotas)[:, None]
        cost = np.where(blocked, np.inf, cost)
        flat = np.lexsort((tie_t.ravel(), tie_ky.ravel(), cost.ravel()))[0]
        place(flat // H, flat % H)

    mask = taken.astype(np.uint8)
    # Force the center band into the union and give empty frames one line.
    for k in center_band_rows(H, center_band):
        if not mask[:, k].any():
            t = int(np.argmin(mask.sum(axis=1)))
            mask[t, k] = 1
    for t in np.flatnonzero(mask.sum(axis=1) == 0):
        mask[t, center_band_rows(H, 1)[0]] = 1
    return SamplingMask(mask, accel=float(R), center_band=center_band)


def apply_mask(v: DynTensor, mask: SamplingMask) -> DynTensor:
    """Zero the k-space lines that were not acquired (idempotent)."""
    v.require_domain(DOMAIN_KSPACE, "mask application")
    if v.shape[-3:-1] != mask.data.shape:
        raise ShapeMismatchError(
            f"mask {mask.data.shape} does not match k-space (t,ky) {v.shape[-3:-1]}"
        )
    return DynTensor(v.data * mask.data[..., :, :, None], v.domain)


def temporal_average(v: DynTensor, mask: SamplingMask, maps: CoilMaps) -> DynTensor:
    """Baseline image: time-averaged acquired k-space, coil-combined, replicated.

    Per k-space location the acquired samples are summed over t and divided
    by max(1, number of times sampled); locations never sampled contribute
    zero.  The single combined frame is repeated along t.
    """
    v.require_domain(DOMAIN_KSPACE, "temporal average")
    if not v.has_coils:
        raise ShapeMismatchError("temporal_average expects per-coil k-space")
    counts = np.maximum(1, mask.data.sum(axis=0)).astype(np.float64)
    avg = v.data.sum(axis=1) / counts[None, :, None]
    T = v.shape[1]
    imgs = ifft_spatial(DynTensor(avg[:, None, :, :], DOMAIN_KSPACE))
    frame = combine(imgs, maps)
    return DynTensor(np.broadcast_to(frame.data, (T,) + frame.shape[-2:]).copy(),
                     frame.domain)
