"""Trainable convolutional-recurrent residual denoisers.

Two layouts share the machinery:

* ``xf``: the input is an x-f residual (f, y, x); y is the batch axis and
  2-D convolutions act on (f, x) planes.
* ``xt``: the input is an image residual (t, y, x); t is the batch axis,
  convolutions act on (y, x), and the recurrent layers additionally mix
  each frame with its circular temporal neighbors (the desk-scale stand-in
  for bidirectional temporal recurrence).

Every recurrent layer keeps a hidden state that feeds the next solver
iteration through a hidden-to-hidden convolution.  Real and imaginary
parts travel as two channels; the output layer is linear so an all-zero
parameter vector maps any input to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var

LEAKY_SLOPE = 0.01


def _init_weight(rng, shape, fan_in: float) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2dLayer:
    """Plain same-size convolution; linear (no activation)."""

    def __init__(self, rng, c_in: int, c_out: int, kernel: int, dilation: int):
        self.dilation = dilation
        self.w = Var(_init_weight(rng, (c_out, c_in, kernel, kernel),
                                  c_in * kernel * kernel))
        self.b = Var(np.zeros(c_out))
        self.recurrent = False

    def params(self):
        return [self.w, self.b]

    def forward(self, x: Var, h_prev=None):
        return ad.conv2d(x, self.w, self.b, self.dilation), None


class RecurrentConv2dLayer:
    """Iteration-recurrent conv: lrelu(Wx * x + Wh * h_prev + b)."""

    def __init__(self, rng, c_in: int, c_out: int, kernel: int, dilation: int):
        self.dilation = dilation
        self.w_x = Var(_init_weight(rng, (c_out, c_in, kernel, kernel),
                                    c_in * kernel * kernel))
        self.w_h = Var(_init_weight(rng, (c_out, c_out, kernel, kernel),
                                    c_out * kernel * kernel))
        self.b = Var(np.zeros(c_out))
        self.recurrent = True

    def params(self):
        return [self.w_x, self.w_h, self.b]

    def forward(self, x: Var, h_prev=None):
        pre = ad.conv2d(x, self.w_x, self.b, self.dilation)
        if h_prev is not None:
            hterm = ad.conv2d(h_prev, self.w_h,
                              Var(np.zeros(self.w_h.data.shape[0])), self.dilation)
            pre = ad.add(pre, hterm)
        h = ad.leaky_relu(pre, LEAKY_SLOPE)
        return h, h


class TemporalRecurrentConv2dLayer(RecurrentConv2dLayer):
    """Recurrent conv whose input term also sees the two circular neighbor
    frames (batch axis = t), each through its own kernel."""

    def __init__(self, rng, c_in: int, c_out: int, kernel: int, dilation: int):
        super().__init__(rng, c_in, c_out, kernel, dilation)
        self.w_prev = Var(_init_weight(rng, (c_out, c_in, kernel, kernel),
                                       c_in * kernel * kernel))
        self.w_next = Var(_init_weight(rng, (c_out, c_in, kernel, kernel),
                                       c_in * kernel * kernel))

    def params(self):
        return [self.w_x, self.w_prev, self.w_next, self.w_h, self.b]

    def forward(self, x: Var, h_prev=None):
        zero_b = Var(np.zeros(self.w_x.data.shape[0]))
        pre = ad.conv2d(x, self.w_x, self.b, self.dilation)
        pre = ad.add(pre, ad.conv2d(ad.roll_frames(x, 1), self.w_prev, zero_b,
                                    self.dilation))
        pre = ad.add(pre, ad.conv2d(ad.roll_frames(x, -1), self.w_next, zero_b,
                                    self.dilation))
        if h_prev is not None:
            pre = ad.add(pre, ad.conv2d(h_prev, self.w_h, zero_b, self.dilation))
        h = ad.leaky_relu(pre, LEAKY_SLOPE)
        return h, h


@dataclass(frozen=True)
class NetConfig:
    layout: str = "xt"          # "xf" or "xt"
    hidden: int = 8             # desk-scale default; scales up freely
    n_rec: int = 2              # recurrent layers before the output conv
    kernel: int = 3
    dilation: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.layout not in ("xf", "xt"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.kernel % 2 != 1:
            raise ValueError("kernel size must be odd")
        if self.hidden < 1 or self.n_rec < 0:
            raise ValueError("hidden >= 1 and n_rec >= 0 required")


class ConvRecNet:
    """Stack of recurrent conv layers plus a linear 2-channel output conv."""

    def __init__(self, config: NetConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        rec_cls = (TemporalRecurrentConv2dLayer if config.layout == "xt"
                   else RecurrentConv2dLayer)
        self.layers = []
        c_in = 2
        for _ in range(config.n_rec):
            self.layers.append(rec_cls(rng, c_in, config.hidden,
                                       config.kernel, config.dilation))
            c_in = config.hidden
        self.layers.append(Conv2dLayer(rng, c_in, 2, config.kernel,
                                       config.dilation))
        self._hidden = None

    # ------------------------------------------------------------ parameters

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def theta(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params()])

    def set_theta(self, vec: np.ndarray) -> None:
        pos = 0
        for p in self.params():
            n = p.data.size
            p.data = np.asarray(vec[pos:pos + n], dtype=np.float64).reshape(
                p.data.shape)
            pos += n
        if pos != len(vec):
            raise ValueError(f"theta length {len(vec)} != {pos}")

    def grad_theta(self) -> np.ndarray:
        chunks = []
        for p in self.params():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            chunks.append(np.asarray(g, dtype=np.float64).ravel())
        return np.concatenate(chunks)

    def zero_like_params(self) -> None:
        for p in self.params():
            p.data = np.zeros_like(p.data)

    # ----------------------------------------------------------- graph paths

    def pack(self, z: Var) -> Var:
        if self.config.layout == "xf":
            return ad.to_channels(ad.transpose(z, (1, 0, 2)))
        return ad.to_channels(z)

    def unpack(self, x: Var) -> Var:
        if self.config.layout == "xf":
            return ad.transpose(ad.from_channels(x), (1, 0, 2))
        return ad.from_channels(x)

    def forward(self, z: Var, hiddens=None):
        """Complex residual (T, H, W) -> (denoised residual, new hiddens)."""
        if hiddens is None:
            hiddens = [None] * len(self.layers)
        x = self.pack(z)
        new_hiddens = []
        for layer, h_prev in zip(self.layers, hiddens):
            x, h = layer.forward(x, h_prev)
            new_hiddens.append(h)
        return self.unpack(x), new_hiddens

    # -------------------------------------------------------- inference path

    def reset_hidden(self) -> None:
        self._hidden = None

    def denoise(self, residual: np.ndarray) -> np.ndarray:
        """Stateful single-call forward used by the solver at inference.

        Hidden states persist between calls (one call per solver iteration)
        until :meth:`reset_hidden`.
        """
        hiddens = None
        if self._hidden is not None:
            hiddens = [None if h is None else Var(h) for h in self._hidden]
        out, new_hiddens = self.forward(Var(np.asarray(residual)), hiddens)
        self._hidden = [None if h is None else h.data for h in new_hiddens]
        return out.data
