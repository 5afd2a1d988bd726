"""Minimal reverse-mode autodiff over numpy arrays for the trainable nets.

Complex arrays carry their gradient as a complex array whose real and
imaginary parts are dL/dRe and dL/dIm.  Under that convention the
pullback of any complex-linear map (FFTs, masking, coil weighting) is its
adjoint, so the backward passes of the solver's linear stages are the
matching inverse/adjoint operators and nothing more.
"""

from __future__ import annotations

import numpy as np


class Var:
    """One node of the computation graph."""

    __slots__ = ("data", "grad", "parents", "vjp")

    def __init__(self, data, parents=(), vjp=None):
        self.data = data
        self.parents = parents
        self.vjp = vjp
        self.grad = None

    @property
    def shape(self):
        return np.shape(self.data)


def constant(data) -> Var:
    return Var(np.asarray(data))


def _accumulate(var: Var, g) -> None:
    var.grad = g if var.grad is None else var.grad + g


def backward(root: Var, seed=None) -> None:
    """Accumulate dL/dx into ``grad`` of every node reachable from root."""
    if seed is None:
        seed = np.ones_like(root.data) if np.ndim(root.data) else 1.0
    order, stack, seen = [], [(root, False)], set()
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    root.grad = seed
    for node in reversed(order):
        if node.vjp is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if g is not None:
                _accumulate(parent, g)


def zero_grads(vars_) -> None:
    for v in vars_:
        v.grad = None


# ---------------------------------------------------------------- arithmetic

def add(a: Var, b: Var) -> Var:
    return Var(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Var, b: Var) -> Var:
    return Var(a.data - b.data, (a, b), lambda g: (g, -g))


def mul_const(a: Var, c) -> Var:
    """Multiply by a constant scalar/array (broadcast against ``a``)."""
    c = np.asarray(c)
    return Var(a.data * c, (a,), lambda g: (np.conj(c) * g,))


# ------------------------------------------------------------ shape plumbing

def transpose(a: Var, axes) -> Var:
    inv = tuple(np.argsort(axes))
    return Var(np.ascontiguousarray(np.transpose(a.data, axes)), (a,),
               lambda g: (np.transpose(g, inv),))


def reshape(a: Var, shape) -> Var:
    old = a.data.shape
    return Var(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def sum_axis(a: Var, axis: int) -> Var:
    shape = a.data.shape
    return Var(a.data.sum(axis=axis), (a,),
               lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),))


def repeat_frames(a: Var, T: int) -> Var:
    """(H, W) -> (T, H, W) replication; pullback sums over frames."""
    return Var(np.broadcast_to(a.data, (T,) + a.data.shape).copy(), (a,),
               lambda g: (g.sum(axis=0),))


def roll_frames(a: Var, shift: int) -> Var:
    """Circular shift along axis 0 (the frame axis)."""
    return Var(np.roll(a.data, shift, axis=0), (a,),
               lambda g: (np.roll(g, -shift, axis=0),))


# ---------------------------------------------------- complex/channel bridge

def to_channels(z: Var) -> Var:
    """Complex (B, P, Q) -> real (B, 2, P, Q) with (real, imag) planes."""
    data = np.stack([z.data.real, z.data.imag], axis=1)
    return Var(data, (z,), lambda g: (g[:, 0] + 1j * g[:, 1],))


def from_channels(x: Var) -> Var:
    """Real (B, 2, P, Q) -> complex (B, P, Q)."""
    data = x.data[:, 0] + 1j * x.data[:, 1]
    return Var(data, (x,), lambda g: (np.stack([g.real, g.imag], axis=1),))


# ------------------------------------------------------------------ unitary

def fft_frames(a: Var) -> Var:
    """Unitary FFT along axis 0; pullback is the inverse transform."""
    return Var(np.fft.fft(a.data, axis=0, norm="ortho"), (a,),
               lambda g: (np.fft.ifft(g, axis=0, norm="ortho"),))


def ifft_frames(a: Var) -> Var:
    return Var(np.fft.ifft(a.data, axis=0, norm="ortho"), (a,),
               lambda g: (np.fft.fft(g, axis=0, norm="ortho"),))


def fft_spatial(a: Var) -> Var:
    """Unitary 2-D FFT over the last two axes."""
    return Var(np.fft.fft2(a.data, axes=(-2, -1), norm="ortho"), (a,),
               lambda g: (np.fft.ifft2(g, axes=(-2, -1), norm="ortho"),))


def ifft_spatial(a: Var) -> Var:
    return Var(np.fft.ifft2(a.data, axes=(-2, -1), norm="ortho"), (a,),
               lambda g: (np.fft.fft2(g, axes=(-2, -1), norm="ortho"),))


# ---------------------------------------------------------------- coil maps

def _maps_for(maps: np.ndarray, ndim_with_coil: int) -> np.ndarray:
    shape = (maps.shape[0],) + (1,) * (ndim_with_coil - 3) + maps.shape[1:]
    return maps.reshape(shape)


def coil_project(m: Var, maps: np.ndarray) -> Var:
    """(..., H, W) -> (n_c, ..., H, W) per-coil weighting; pullback combines."""
    mb = _maps_for(maps, m.data.ndim + 1)
    return Var(mb * m.data[None], (m,),
               lambda g: (np.sum(np.conj(mb) * g, axis=0),))


def coil_combine(x: Var, maps: np.ndarray) -> Var:
    """(n_c, ..., H, W) -> (..., H, W): sum of conj(S_i) * x_i."""
    mb = _maps_for(maps, x.data.ndim)
    return Var(np.sum(np.conj(mb) * x.data, axis=0), (x,),
               lambda g: (mb * g[None],))


# -------------------------------------------------------------------- dense

def leaky_relu(a: Var, slope: float = 0.01) -> Var:
    gate = np.where(a.data > 0, 1.0, slope)
    return Var(a.data * gate, (a,), lambda g: (g * gate,))


def _pad_amount(k: int, dilation: int) -> int:
    return ((k - 1) * dilation) // 2


def conv2d(x: Var, w: Var, b: Var, dilation: int = 1) -> Var:
    """Same-size 2-D convolution, real data: x (B,C,H,W), w (O,C,kh,kw), b (O,).

    Odd kernels only; zero padding keeps the spatial size.
    """
    B, C, H, W = x.data.shape
    O, _, kh, kw = w.data.shape
    d = dilation
    ph, pw = _pad_amount(kh, d), _pad_amount(kw, d)
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))

    wr = w.data.reshape(O, C * kh * kw)
    cols = np.empty((B, C * kh * kw, H * W), dtype=x.data.dtype)
    idx = 0
    for i in range(kh):
        for j in range(kw):
            view = xp[:, :, i * d:i * d + H, j * d:j * d + W]
            cols[:, idx * C:(idx + 1) * C] = view.reshape(B, C, H * W)
            idx += 1
    # cols blocks are ordered (i, j, c); reorder weights to match.
    worder = wr.reshape(O, C, kh * kw).transpose(0, 2, 1).reshape(O, -1)
    y = (worder[None] @ cols).reshape(B, O, H, W) + b.data[None, :, None, None]

    def vjp(g):
        gr = g.reshape(B, O, H * W)
        gw_flat = np.einsum("bop,bkp->ok", gr, cols)
        gw = gw_flat.reshape(O, kh * kw, C).transpose(0, 2, 1).reshape(O, C, kh, kw)
        gb = g.sum(axis=(0, 2, 3))
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                wij = w.data[:, :, i, j]
                gxp[:, :, i * d:i * d + H, j * d:j * d + W] += np.einsum(
                    "bohw,oc->bchw", g, wij)
        gx = gxp[:, :, ph:ph + H, pw:pw + W]
        return gx, gw, gb

    return Var(y, (x, w, b), vjp)


# --------------------------------------------------------------------- loss

def l1_modulus(a: Var) -> Var:
    """Sum of complex moduli; subgradient 0 at exact zeros."""
    mag = np.abs(a.data)

    def vjp(g):
        sign = np.zeros_like(a.data)
        np.divide(a.data, mag, out=sign, where=mag > 0)
        return (g * sign,)

    return Var(float(mag.sum()), (a,), vjp)


def scale(a: Var, s: float) -> Var:
    return Var(a.data * s, (a,), lambda g: (g * s,))
