"""Checkpoints: flat float64 parameter vector plus a net manifest."""

from __future__ import annotations

import numpy as np

from .. import io
from .net import ConvRecNet, NetConfig


def _manifest_line(tag: str, net: ConvRecNet) -> str:
    c = net.config
    return (f"net={tag} hidden={c.hidden} n_rec={c.n_rec} kernel={c.kernel} "
            f"dilation={c.dilation} seed={c.seed} params={net.theta().size}")


def save_nets(path, net_xf: ConvRecNet, net_xt: ConvRecNet) -> None:
    theta = np.concatenate([net_xf.theta(), net_xt.theta()])
    manifest = "\n".join([_manifest_line("xf", net_xf),
                          _manifest_line("xt", net_xt)]) + "\n"
    io.save_checkpoint(path, theta, manifest)


def _parse_line(line: str) -> dict:
    fields = dict(part.split("=", 1) for part in line.split())
    needed = {"net", "hidden", "n_rec", "kernel", "dilation", "seed", "params"}
    if set(fields) != needed:
        raise io.FormatError(f"bad checkpoint manifest line: {line!r}")
    return fields


def load_nets(path) -> tuple:
    theta, manifest = io.load_checkpoint(path)
    lines = [ln for ln in manifest.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise io.FormatError("checkpoint manifest must describe two nets")
    nets, pos = [], 0
    for line, layout in zip(lines, ("xf", "xt")):
        f = _parse_line(line)
        if f["net"] != layout:
            raise io.FormatError(f"expected net={layout} in manifest, got {line!r}")
        net = ConvRecNet(NetConfig(layout=layout, hidden=int(f["hidden"]),
                                   n_rec=int(f["n_rec"]), kernel=int(f["kernel"]),
                                   dilation=int(f["dilation"]),
                                   seed=int(f["seed"])))
        n = int(f["params"])
        if net.theta().size != n:
            raise io.FormatError("manifest parameter count does not match net")
        net.set_theta(theta[pos:pos + n])
        pos += n
        nets.append(net)
    if pos != theta.size:
        raise io.FormatError("checkpoint parameter vector has trailing values")
    return nets[0], nets[1]
