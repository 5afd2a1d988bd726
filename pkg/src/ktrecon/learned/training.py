"""Toy-scale training loop: Adam with hard gradient clipping, synthetic data.

Each sample is normalized by the peak magnitude of its own undersampled
temporal-average frame before entering the network, matching the scale the
nets see at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..coils import CoilMaps, synth_maps
from ..phantom import Ellipse, PhantomSpec, acquire, generate
from ..sampling import SamplingMask, mask_vista_like, temporal_average
from ..solver import SolverConfig
from ..tensors import DynTensor
from . import autodiff as ad
from .autodiff import Var
from .net import ConvRecNet, NetConfig
from .unrolled import loss_graph


@dataclass
class TrainState:
    """Adam moments plus the clipping and step bookkeeping."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 5.0
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure(self, params) -> None:
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in params]
            self.v = [np.zeros_like(p.data) for p in params]


@dataclass(frozen=True)
class TrainSample:
    """One normalized training pair (k-space in, image target)."""

    v: np.ndarray       # (n_c, T, H, W), already masked and scaled
    target: np.ndarray  # (T, H, W), scaled by the same factor
    mask: SamplingMask
    maps: CoilMaps
    scale: float


def make_sample(gt: DynTensor, maps: CoilMaps, mask: SamplingMask,
                noise_sigma: float = 0.0, seed: int = 0) -> TrainSample:
    v = acquire(gt, maps, mask, noise_sigma, seed)
    peak = float(np.abs(temporal_average(v, mask, maps).data).max())
    if peak <= 0:
        raise ValueError("degenerate sample: empty temporal average")
    return TrainSample(v=v.data / peak, target=gt.data / peak,
                       mask=mask, maps=maps, scale=peak)


def crop_readout(gt: DynTensor, maps: CoilMaps, x0: int, width: int):
    """Full-height band along the fully-sampled readout axis.

    Because the k_y lines are untouched, acquiring the cropped pair under
    the same (t, k_y) mask is exactly the readout-band restriction of the
    full acquisition (separability along x).  Per-pixel map normalization
    survives the crop.
    """
    W = gt.shape[-1]
    if not (0 <= x0 and x0 + width <= W and width >= 1):
        raise ValueError(f"band [{x0}, {x0 + width}) outside 0..{W}")
    gt_band = DynTensor(gt.data[:, :, x0:x0 + width], gt.domain)
    maps_band = CoilMaps(maps.data[:, :, x0:x0 + width],
                         normalized=maps.normalized)
    return gt_band, maps_band


def augment_image(gt: DynTensor, rng) -> DynTensor:
    """Random flips (+ 90-degree rotation when square) and intensity scale.

    Valid exactly on synthetic pairs since k-space is regenerated from the
    augmented image afterwards.
    """
    data = gt.data
    if rng.integers(2):
        data = data[:, ::-1, :]
    if rng.integers(2):
        data = data[:, :, ::-1]
    if data.shape[-1] == data.shape[-2] and rng.integers(2):
        data = np.rot90(data, axes=(-2, -1))
    return DynTensor(data * rng.uniform(0.9, 1.1), gt.domain)


def _random_spec(rng, T: int, H: int, W: int) -> PhantomSpec:
    n_extra = int(rng.integers(0, 2))
    ellipses = [Ellipse(cy=H * rng.uniform(0.4, 0.6), cx=W * rng.uniform(0.4, 0.6),
                        ry=H * rng.uniform(0.10, 0.16), rx=W * rng.uniform(0.10, 0.16),
                        intensity=rng.uniform(0.8, 1.0),
                        pulse=rng.uniform(0.2, 0.35))]
    for _ in range(1 + n_extra):
        ellipses.append(Ellipse(cy=H * rng.uniform(0.25, 0.75),
                                cx=W * rng.uniform(0.25, 0.75),
                                ry=H * rng.uniform(0.05, 0.10),
                                rx=W * rng.uniform(0.05, 0.12),
                                intensity=rng.uniform(0.4, 0.8)))
    return PhantomSpec(T=T, H=H, W=W, ellipses=tuple(ellipses), background=0.2)


def make_training_set(n_seq: int, T: int, H: int, W: int, n_c: int, accel: float,
                      seed: int = 0, noise_sigma: float = 0.0,
                      patch_w: int = 0, augment: bool = False) -> list:
    """Deterministic synthetic training pairs, one mask/maps per sequence.

    ``patch_w`` > 0 crops each pair to a random readout band of that width;
    ``augment`` applies random flips/rotation and intensity scaling before
    the k-space is generated.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n_seq):
        spec = _random_spec(rng, T, H, W)
        gt = generate(spec)
        maps = synth_maps(n_c, H, W, seed=seed + 101 * i)
        if augment:
            gt = augment_image(gt, rng)
        if patch_w:
            x0 = int(rng.integers(0, gt.shape[-1] - patch_w + 1))
            gt, maps = crop_readout(gt, maps, x0, patch_w)
        mask = mask_vista_like(T, H, accel, seed=seed + 7 * i)
        samples.append(make_sample(gt, maps, mask, noise_sigma, seed + 13 * i))
    return samples


def adam_step(params, state: TrainState) -> None:
    """Hard-clip gradients to [-clip, clip], then one Adam update."""
    state.ensure(params)
    state.step += 1
    t = state.step
    for p, m_buf, v_buf in zip(params, state.m, state.v):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        g = np.clip(g, -state.clip, state.clip)
        m_buf += (1.0 - state.beta1) * (g - m_buf)
        v_buf += (1.0 - state.beta2) * (g * g - v_buf)
        m_hat = m_buf / (1.0 - state.beta1**t)
        v_hat = v_buf / (1.0 - state.beta2**t)
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def train_step(net_xf: ConvRecNet, net_xt: ConvRecNet, batch: list,
               cfg: SolverConfig, state: TrainState) -> float:
    """One full-batch step; returns the loss before the update."""
    params = net_xf.params() + net_xt.params()
    ad.zero_grads(params)
    total = 0.0
    for sample in batch:
        loss = loss_graph(Var(sample.v), sample.target, sample.mask,
                          sample.maps, cfg, net_xf, net_xt)
        total += loss.data
        ad.backward(loss, seed=1.0 / len(batch))
    value = total / len(batch)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite training loss {value!r}")
    adam_step(params, state)
    return value


def train(net_xf: ConvRecNet, net_xt: ConvRecNet, batch: list,
          cfg: SolverConfig, steps: int, lr: float = 1e-4,
          clip: float = 5.0) -> list:
    """Run ``steps`` full-batch updates; returns the loss history."""
    state = TrainState(lr=lr, clip=clip)
    return [train_step(net_xf, net_xt, batch, cfg, state) for _ in range(steps)]


def build_nets(hidden: int = 8, n_rec: int = 2, kernel: int = 3,
               dilation: int = 1, seed: int = 0):
    net_xf = ConvRecNet(NetConfig(layout="xf", hidden=hidden, n_rec=n_rec,
                                  kernel=kernel, dilation=dilation, seed=seed))
    net_xt = ConvRecNet(NetConfig(layout="xt", hidden=hidden, n_rec=n_rec,
                                  kernel=kernel, dilation=dilation, seed=seed + 1))
    return net_xf, net_xt
