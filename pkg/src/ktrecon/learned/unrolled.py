"""Differentiable unrolled solve: the full reconstruction as one graph.

Numerically identical to :func:`ktrecon.solver.solve` in learned mode; this
path additionally records the tape so training can backpropagate through
every iteration, including the closed-form data-consistency and merge
stages (whose pullbacks are just their own adjoints/coefficients).
"""

from __future__ import annotations

import numpy as np

from ..coils import CoilMaps
from ..sampling import SamplingMask
from ..solver import SolverConfig
from . import autodiff as ad
from .autodiff import Var


def baseline_graph(v: Var, mask: SamplingMask, maps: CoilMaps) -> Var:
    """Temporal-average baseline as a graph over the k-space leaf."""
    D = mask.data
    T = D.shape[0]
    wline = 1.0 / np.maximum(1, D.sum(axis=0)).astype(np.float64)
    avg = ad.mul_const(ad.sum_axis(v, 1), wline[None, :, None])
    frame = ad.coil_combine(ad.ifft_spatial(avg), maps.data)
    return ad.repeat_frames(frame, T)


def solve_graph(v: Var, mask: SamplingMask, maps: CoilMaps, cfg: SolverConfig,
                net_xf, net_xt) -> Var:
    """Unrolled n_it iterations from the k-space leaf to the final image."""
    S = maps.data
    mbar = baseline_graph(v, mask, maps)
    ft_bar = ad.fft_frames(mbar)
    m = ad.coil_combine(ad.ifft_spatial(v), S)
    lam_diag = np.where(mask.data[:, :, None] == 1, cfg.lambda0, 1.0)

    h_xf = h_xt = None
    for _ in range(cfg.n_it):
        y_xf, h_xf = net_xf.forward(ad.sub(ad.fft_frames(m), ft_bar), h_xf)
        rho = ad.add(ft_bar, y_xf)
        y_xt, h_xt = net_xt.forward(ad.sub(m, mbar), h_xt)
        u = ad.add(mbar, y_xt)
        s_hat = ad.fft_spatial(ad.coil_project(m, S))
        kdc = ad.add(ad.mul_const(s_hat, lam_diag[None]),
                     ad.mul_const(v, 1.0 - cfg.lambda0))
        dc = ad.coil_combine(ad.ifft_spatial(kdc), S)
        m = ad.add(ad.add(ad.mul_const(u, cfg.alpha0),
                          ad.mul_const(ad.ifft_frames(rho), cfg.beta0)),
                   ad.mul_const(dc, 1.0 - cfg.alpha0 - cfg.beta0))
    return m


def loss_graph(v: Var, target: np.ndarray, mask: SamplingMask, maps: CoilMaps,
               cfg: SolverConfig, net_xf, net_xt) -> Var:
    """Pixel-wise L1 distance between the unrolled output and the target."""
    m = solve_graph(v, mask, maps, cfg, net_xf, net_xt)
    return ad.l1_modulus(ad.sub(m, ad.constant(target)))
