"""Command-line interface: one binary, one subcommand per pipeline stage.

Every flag maps to exactly one run-configuration key (shown in its help
text); values from ``--config FILE`` fill in whatever the command line
leaves unset.  All stages are deterministic given the same seeds, so any
pipeline rerun from one config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io, report
from .coils import synth_maps
from .metrics import evaluate
from .phantom import Ellipse, PhantomSpec, acquire, default_spec, generate
from .sampling import mask_lattice, mask_vista_like
from .solver import MODE_CLASSICAL, MODE_LEARNED, SolverConfig, solve
from .tensors import DOMAIN_IMAGE, DOMAIN_KSPACE


def _opt(parser, flag, key, **kwargs):
    """Add a flag whose fallback lives in the config file under ``key``."""
    help_text = io.CONFIG_KEYS[key][2]
    parser.add_argument(flag, dest=key.replace(".", "_"), default=None,
                        help=f"{help_text} [{key}]", **kwargs)


def _get(args, cfg, key, default=None, required=False):
    val = getattr(args, key.replace(".", "_"), None)
    if val is None:
        val = cfg.get(key)
    if val is None:
        if required:
            raise io.ConfigError(
                f"missing required setting {key} (flag or config file)")
        return default
    typ, check, _ = io.CONFIG_KEYS[key]
    val = typ(val)
    if check is not None and not check(val):
        raise io.ConfigError(f"value {val!r} out of range for {key}")
    return val


def _load_cfg(args) -> dict:
    if getattr(args, "config", None):
        return io.load_config(args.config)
    return {}


def _phantom_spec(args, cfg) -> PhantomSpec:
    T = _get(args, cfg, "phantom.frames", required=True)
    H = _get(args, cfg, "phantom.height", required=True)
    W = _get(args, cfg, "phantom.width", required=True)
    bg = _get(args, cfg, "phantom.background", 0.2)
    phase = _get(args, cfg, "phantom.phase_cycles", 0.0)
    ellipse_keys = sorted(k for k in cfg if k.startswith("phantom.ellipse."))
    if ellipse_keys:
        ellipses = tuple(Ellipse(*cfg[k]) for k in ellipse_keys)
    else:
        ellipses = default_spec(T=T, H=H, W=W).ellipses
    return PhantomSpec(T=T, H=H, W=W, ellipses=ellipses, background=bg,
                       phase_cycles=phase)


def _make_mask(kind, T, H, args, cfg):
    accel = _get(args, cfg, "mask.accel", required=True)
    if kind == "lattice":
        return mask_lattice(T, H, int(round(accel)),
                            stride=_get(args, cfg, "mask.stride", 1))
    if kind == "vista":
        return mask_vista_like(
            T, H, accel,
            density_decay=_get(args, cfg, "mask.decay", 1.0),
            center_band=_get(args, cfg, "mask.center_band", 4),
            seed=_get(args, cfg, "seed", 0))
    raise io.ConfigError(f"unknown mask type {kind!r}")


def _resolve_mask(spec: str, T, H, args, cfg):
    """Mask source: ``lattice`` | ``vista`` | ``file:PATH``."""
    if spec.startswith("file:"):
        mask = io.load_mask(spec[5:])
        if mask.data.shape != (T, H):
            raise io.FormatError(
                f"mask shape {mask.data.shape} does not match data ({T}, {H})")
        return mask
    return _make_mask(spec, T, H, args, cfg)


# ------------------------------------------------------------------ handlers

def cmd_phantom(args) -> int:
    cfg = _load_cfg(args)
    spec = _phantom_spec(args, cfg)
    seed = _get(args, cfg, "seed", 0)
    outdir = Path(_get(args, cfg, "phantom.outdir", required=True))
    outdir.mkdir(parents=True, exist_ok=True)

    gt = generate(spec)
    maps = synth_maps(_get(args, cfg, "maps.coils", required=True),
                      spec.H, spec.W, seed=seed)
    mask = _make_mask(_get(args, cfg, "mask.type", "vista"),
                      spec.T, spec.H, args, cfg)
    v = acquire(gt, maps, mask, _get(args, cfg, "acquire.noise", 0.0), seed)

    io.save_tensor(outdir / "gt.cxt", gt)
    io.save_maps(outdir / "maps.cxt", maps)
    io.save_mask(outdir / "mask.cxt", mask)
    io.save_tensor(outdir / "kdata.cxt", v)
    print(f"wrote gt/maps/mask/kdata to {outdir} "
          f"(R achieved {mask.achieved_accel:.2f})")
    return 0


def cmd_maps(args) -> int:
    cfg = _load_cfg(args)
    out = _get(args, cfg, "maps.out", required=True)
    maps = synth_maps(_get(args, cfg, "maps.coils", required=True),
                      _get(args, cfg, "phantom.height", required=True),
                      _get(args, cfg, "phantom.width", required=True),
                      seed=_get(args, cfg, "seed", 0))
    io.save_maps(out, maps)
    print(f"wrote {maps.n_coils}-coil maps to {out}")
    return 0


def cmd_mask(args) -> int:
    cfg = _load_cfg(args)
    out = _get(args, cfg, "mask.out", required=True)
    mask = _make_mask(_get(args, cfg, "mask.type", "vista"),
                      _get(args, cfg, "phantom.frames", required=True),
                      _get(args, cfg, "phantom.height", required=True),
                      args, cfg)
    io.save_mask(out, mask)
    fig = _get(args, cfg, "mask.fig")
    if fig:
        report.render_mask(np.asarray(mask.data), fig)
    print(f"wrote mask to {out} (R achieved {mask.achieved_accel:.2f})")
    return 0


def cmd_acquire(args) -> int:
    cfg = _load_cfg(args)
    gt = io.load_tensor(_get(args, cfg, "acquire.gt", required=True),
                        DOMAIN_IMAGE)
    maps = io.load_maps(_get(args, cfg, "acquire.maps", required=True))
    T, H = gt.shape[0], gt.shape[1]
    mask = _resolve_mask(_get(args, cfg, "acquire.mask", required=True),
                         T, H, args, cfg)
    v = acquire(gt, maps, mask, _get(args, cfg, "acquire.noise", 0.0),
                _get(args, cfg, "seed", 0))
    out = _get(args, cfg, "acquire.out", required=True)
    io.save_tensor(out, v)
    print(f"wrote k-space data to {out}")
    return 0


def cmd_recon(args) -> int:
    cfg = _load_cfg(args)
    v = io.load_tensor(_get(args, cfg, "recon.input", required=True),
                       DOMAIN_KSPACE)
    maps = io.load_maps(_get(args, cfg, "recon.maps", required=True))
    T, H = v.shape[1], v.shape[2]
    mask = _resolve_mask(_get(args, cfg, "recon.mask", required=True),
                         T, H, args, cfg)
    mode = _get(args, cfg, "recon.mode", MODE_CLASSICAL)
    solver_cfg = SolverConfig(
        lambda0=_get(args, cfg, "recon.lambda0", 0.1),
        alpha0=_get(args, cfg, "recon.alpha0", 0.1),
        beta0=_get(args, cfg, "recon.beta0", 0.1),
        n_it=_get(args, cfg, "recon.nit", 5),
        mode=mode,
        tau_xf=_get(args, cfg, "recon.tau_xf", SolverConfig.tau_xf),
        tau_xt=_get(args, cfg, "recon.tau_xt", SolverConfig.tau_xt),
    )
    nets = None
    if mode == MODE_LEARNED:
        from .learned.checkpoint import load_nets
        nets = load_nets(_get(args, cfg, "recon.ckpt", required=True))
    m, state = solve(v, mask, maps, solver_cfg, nets)
    out = _get(args, cfg, "recon.out", required=True)
    io.save_tensor(out, m)
    print(f"wrote reconstruction to {out}")
    trace_path = _get(args, cfg, "recon.trace")
    if trace_path:
        if state.trace:
            report.write_trace_csv(state.trace, trace_path)
            report.render_trace(state.trace,
                                Path(trace_path).with_suffix(".png"))
            print(f"wrote objective trace to {trace_path}")
        else:
            print("no objective trace in learned mode; skipped")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    from .learned.checkpoint import save_nets
    from .learned.training import build_nets, make_training_set, train

    ckpt = _get(args, cfg, "train.ckpt", required=True)
    seed = _get(args, cfg, "train.seed", 0)
    net_xf, net_xt = build_nets(hidden=_get(args, cfg, "train.hidden", 8),
                                seed=seed)
    batch = make_training_set(
        n_seq=_get(args, cfg, "train.sequences", 2),
        T=_get(args, cfg, "train.frames", 16),
        H=_get(args, cfg, "train.height", 16),
        W=_get(args, cfg, "train.width", 16),
        n_c=_get(args, cfg, "maps.coils", 2),
        accel=_get(args, cfg, "train.accel", 4.0),
        seed=seed,
        noise_sigma=_get(args, cfg, "train.noise", 0.0),
        patch_w=_get(args, cfg, "train.patch_w", 0),
        augment=bool(_get(args, cfg, "train.augment", 0)))
    solver_cfg = SolverConfig(mode=MODE_LEARNED,
                              n_it=_get(args, cfg, "train.nit", 5))
    losses = train(net_xf, net_xt, batch, solver_cfg,
                   steps=_get(args, cfg, "train.steps", 200),
                   lr=_get(args, cfg, "train.lr", 1e-4))
    save_nets(ckpt, net_xf, net_xt)
    report.write_csv(Path(ckpt).with_suffix(".loss.csv"), ["step", "loss"],
                     [[i, l] for i, l in enumerate(losses)])
    print(f"trained {len(losses)} steps: loss {losses[0]:.6g} -> "
          f"{losses[-1]:.6g}; checkpoint at {ckpt}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    recon = io.load_tensor(_get(args, cfg, "eval.recon", required=True),
                           DOMAIN_IMAGE)
    gt = io.load_tensor(_get(args, cfg, "eval.gt", required=True),
                        DOMAIN_IMAGE)
    rep = evaluate(recon, gt, margin=_get(args, cfg, "eval.margin", 4))
    out = Path(_get(args, cfg, "eval.out", required=True))
    report.write_eval_csv(rep, out)
    report.write_frames_csv(rep, out.with_name(out.stem + "_frames.csv"))
    figures = _get(args, cfg, "eval.figures", 1)
    if args.no_figures:
        figures = 0
    if figures:
        report.render_frame_metrics(rep, out.with_name(out.stem + "_frames.png"))
        report.render_error_maps(recon, gt, rep,
                                 out.with_name(out.stem + "_error.png"))
    print(f"nmse={rep.nmse:.6g} psnr={rep.psnr:.3f}dB ssim={rep.ssim:.4f} "
          f"hfen={rep.hfen:.4f} -> {out}")
    return 0


def cmd_export(args) -> int:
    cfg = _load_cfg(args)
    x = io.load_tensor(_get(args, cfg, "export.input", required=True),
                       DOMAIN_IMAGE)
    idx = _get(args, cfg, "export.frame", 0)
    if idx >= x.shape[0]:
        raise ValueError(f"frame {idx} out of range for {x.shape[0]} frames")
    frame = np.abs(x.data[idx])
    diff = _get(args, cfg, "export.diff")
    if diff:
        ref = io.load_tensor(diff, DOMAIN_IMAGE)
        frame = np.abs(x.data[idx] - ref.data[idx])
    out = _get(args, cfg, "export.out", required=True)
    wmin, wmax = io.export_png(frame, out,
                               wmin=_get(args, cfg, "export.wmin"),
                               wmax=_get(args, cfg, "export.wmax"),
                               plow=_get(args, cfg, "export.plow", 1.0),
                               phigh=_get(args, cfg, "export.phigh", 99.0))
    print(f"wrote {out} (window [{wmin:.6g}, {wmax:.6g}])")
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ktrecon",
        description="Dynamic multi-coil MRI reconstruction in complementary "
                    "x-t / x-f domains.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value run configuration file")
        _opt(sp, "--seed", "seed", type=int)

    sp = sub.add_parser("phantom", help="generate gt, maps, mask and k-space")
    common(sp)
    _opt(sp, "--outdir", "phantom.outdir")
    _opt(sp, "--frames", "phantom.frames", type=int)
    _opt(sp, "--height", "phantom.height", type=int)
    _opt(sp, "--width", "phantom.width", type=int)
    _opt(sp, "--background", "phantom.background", type=float)
    _opt(sp, "--coils", "maps.coils", type=int)
    _opt(sp, "--mask-type", "mask.type")
    _opt(sp, "--accel", "mask.accel", type=float)
    _opt(sp, "--center-band", "mask.center_band", type=int)
    _opt(sp, "--noise", "acquire.noise", type=float)
    sp.set_defaults(func=cmd_phantom)

    sp = sub.add_parser("maps", help="synthesize coil sensitivity maps")
    common(sp)
    _opt(sp, "--out", "maps.out")
    _opt(sp, "--coils", "maps.coils", type=int)
    _opt(sp, "--height", "phantom.height", type=int)
    _opt(sp, "--width", "phantom.width", type=int)
    sp.set_defaults(func=cmd_maps)

    sp = sub.add_parser("mask", help="generate a k-t sampling mask")
    common(sp)
    _opt(sp, "--out", "mask.out")
    _opt(sp, "--fig", "mask.fig")
    _opt(sp, "--type", "mask.type")
    _opt(sp, "--frames", "phantom.frames", type=int)
    _opt(sp, "--height", "phantom.height", type=int)
    _opt(sp, "--accel", "mask.accel", type=float)
    _opt(sp, "--stride", "mask.stride", type=int)
    _opt(sp, "--center-band", "mask.center_band", type=int)
    _opt(sp, "--decay", "mask.decay", type=float)
    sp.set_defaults(func=cmd_mask)

    sp = sub.add_parser("acquire", help="simulate the per-coil acquisition")
    common(sp)
    _opt(sp, "--gt", "acquire.gt")
    _opt(sp, "--maps", "acquire.maps")
    _opt(sp, "--mask", "acquire.mask")
    _opt(sp, "--out", "acquire.out")
    _opt(sp, "--accel", "mask.accel", type=float)
    _opt(sp, "--noise", "acquire.noise", type=float)
    sp.set_defaults(func=cmd_acquire)

    sp = sub.add_parser("recon", help="reconstruct from undersampled k-space")
    common(sp)
    _opt(sp, "--input", "recon.input")
    _opt(sp, "--mask", "recon.mask")
    _opt(sp, "--maps", "recon.maps")
    _opt(sp, "--out", "recon.out")
    _opt(sp, "--trace", "recon.trace")
    _opt(sp, "--mode", "recon.mode")
    _opt(sp, "--ckpt", "recon.ckpt")
    _opt(sp, "--nit", "recon.nit", type=int)
    _opt(sp, "--lambda0", "recon.lambda0", type=float)
    _opt(sp, "--alpha0", "recon.alpha0", type=float)
    _opt(sp, "--beta0", "recon.beta0", type=float)
    _opt(sp, "--tau-xf", "recon.tau_xf", type=float)
    _opt(sp, "--tau-xt", "recon.tau_xt", type=float)
    _opt(sp, "--accel", "mask.accel", type=float)
    sp.set_defaults(func=cmd_recon)

    sp = sub.add_parser("train", help="train the learned regularizers")
    common(sp)
    _opt(sp, "--ckpt", "train.ckpt")
    _opt(sp, "--steps", "train.steps", type=int)
    _opt(sp, "--lr", "train.lr", type=float)
    _opt(sp, "--nit", "train.nit", type=int)
    _opt(sp, "--hidden", "train.hidden", type=int)
    _opt(sp, "--train-seed", "train.seed", type=int)
    _opt(sp, "--accel", "train.accel", type=float)
    _opt(sp, "--sequences", "train.sequences", type=int)
    _opt(sp, "--frames", "train.frames", type=int)
    _opt(sp, "--height", "train.height", type=int)
    _opt(sp, "--width", "train.width", type=int)
    _opt(sp, "--coils", "maps.coils", type=int)
    _opt(sp, "--patch-w", "train.patch_w", type=int)
    _opt(sp, "--augment", "train.augment", type=int)
    _opt(sp, "--noise", "train.noise", type=float)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="quantitative report plus figures")
    common(sp)
    _opt(sp, "--recon", "eval.recon")
    _opt(sp, "--gt", "eval.gt")
    _opt(sp, "--out", "eval.out")
    sp.add_argument("--no-figures", action="store_true",
                    help="skip the matplotlib figures [eval.figures]")
    _opt(sp, "--margin", "eval.margin", type=int)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("export", help="export one frame as 8-bit PNG")
    common(sp)
    _opt(sp, "--input", "export.input")
    _opt(sp, "--frame", "export.frame", type=int)
    _opt(sp, "--out", "export.out")
    _opt(sp, "--diff", "export.diff")
    _opt(sp, "--wmin", "export.wmin", type=float)
    _opt(sp, "--wmax", "export.wmax", type=float)
    _opt(sp, "--plow", "export.plow", type=float)
    _opt(sp, "--phigh", "export.phigh", type=float)
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
