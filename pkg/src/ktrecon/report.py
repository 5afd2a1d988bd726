"""Delimited reports and the matplotlib figures rendered next to them.

CSV files use a header row, '.' decimals and %.12g formatting so repeated
runs are byte-identical.  Figures go through the Agg backend at a fixed
size/DPI for the same reason.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import EvalReport
from .tensors import DynTensor

_FIG_DPI = 110


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(c) for c in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_eval_csv(report: EvalReport, path, label: str = "sequence") -> None:
    write_csv(path, ["sequence", "nmse", "psnr_db", "ssim", "hfen"],
              [[label, report.nmse, report.psnr, report.ssim, report.hfen]])


def write_frames_csv(report: EvalReport, path) -> None:
    rows = [[t, report.per_frame["nmse"][t], report.per_frame["psnr"][t],
             report.per_frame["ssim"][t], report.per_frame["hfen"][t]]
            for t in range(len(report.per_frame["nmse"]))]
    write_csv(path, ["frame", "nmse", "psnr_db", "ssim", "hfen"], rows)


def write_trace_csv(trace: list, path) -> None:
    write_csv(path, ["iteration", "objective"],
              [[k, val] for k, val in enumerate(trace)])


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_frame_metrics(report: EvalReport, path) -> None:
    """Per-frame PSNR and SSIM curves."""
    plt = _pyplot()
    frames = np.arange(len(report.per_frame["psnr"]))
    fig, ax1 = plt.subplots(figsize=(6.4, 3.6))
    ax1.plot(frames, report.per_frame["psnr"], "o-", color="tab:blue", ms=3)
    ax1.set_xlabel("frame")
    ax1.set_ylabel("PSNR (dB)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(frames, report.per_frame["ssim"], "s--", color="tab:orange", ms=3)
    ax2.set_ylabel("SSIM", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def render_error_maps(recon: DynTensor, gt: DynTensor, report: EvalReport,
                      path, frame: int = None) -> None:
    """Ground truth, reconstruction and |error| for one cropped frame."""
    plt = _pyplot()
    if frame is None:
        frame = gt.shape[-3] // 2
    box = report.crop
    g = np.abs(box.slice(gt.data)[frame])
    r = np.abs(box.slice(recon.data)[frame])
    err = np.abs(box.slice(recon.data - gt.data)[frame])
    fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.2))
    for ax, img, title in zip(axes, (g, r, err),
                              ("reference", "reconstruction", "|error|")):
        im = ax.imshow(img, cmap="gray", vmin=0,
                       vmax=g.max() if title != "|error|" else None)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def render_trace(trace: list, path) -> None:
    """Penalty-objective trace across solver iterations."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(np.arange(len(trace)), trace, "o-", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("penalty objective")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def render_mask(mask_data: np.ndarray, path) -> None:
    """k-t sampling pattern (t horizontal, k_y vertical, DC centered)."""
    plt = _pyplot()
    shifted = np.fft.fftshift(mask_data, axes=1)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.imshow(shifted.T, cmap="gray", interpolation="nearest", aspect="auto")
    ax.set_xlabel("frame")
    ax.set_ylabel("k_y (centered)")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)
