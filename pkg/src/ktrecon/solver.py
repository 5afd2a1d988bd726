"""Alternating reconstruction in complementary x-f and x-t domains.

One iteration, all reading the same current estimate m^k:

    rho   <- F_t(baseline) + f_xf(F_t m^k - F_t baseline)     (x-f de-aliasing)
    u     <- baseline + f_xt(m^k - baseline)                   (x-t de-aliasing)
    sigma <- per-coil closed-form data consistency against v   (dc_step)
    m^k+1 <- a0*u + b0*F_t^H rho + (1-a0-b0)*sum_i S_i^H sigma (merge_step)

With the classical soft-threshold regularizers every update exactly
minimizes its sub-problem, so the penalty objective is non-increasing
across iterations.  m^0 is the zero-filled coil combination and the
baseline is the temporally averaged sensitivity-combined image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coils import CoilMaps, combine, project
from .regularizers import (KIND_LEARNED, KIND_SOFT, ProxSpec,
                           xf_regularize, xt_regularize)
from .sampling import SamplingMask, temporal_average
from .tensors import DOMAIN_KSPACE, DynTensor
from .transforms import fft_spatial, fft_temporal, ifft_spatial, ifft_temporal

MODE_CLASSICAL = "classical"
MODE_LEARNED = "learned"


class SolverDivergedError(RuntimeError):
    """A solver stage produced non-finite values."""

    def __init__(self, iteration: int, stage: str, max_abs: float):
        self.iteration = iteration
        self.stage = stage
        super().__init__(
            f"non-finite values at iteration {iteration}, stage {stage!r} "
            f"(max |value| = {max_abs:g})"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Update-path weights and regularizer selection.

    lambda0 is the data-fidelity mix on sampled k-space entries (0 = hard
    replacement, 1 = ignore data); alpha0/beta0 weight the x-t and x-f
    estimates in the merge, the remainder going to the data-consistency
    branch.
    """

    lambda0: float = 0.1
    alpha0: float = 0.1
    beta0: float = 0.1
    n_it: int = 5
    mode: str = MODE_CLASSICAL
    tau_xf: float = 0.08
    tau_xt: float = 0.06

    def __post_init__(self):
        if not 0.0 <= self.lambda0 <= 1.0:
            raise ValueError("lambda0 must lie in [0, 1]")
        if self.alpha0 < 0 or self.beta0 < 0 or self.alpha0 + self.beta0 >= 1.0:
            raise ValueError("need alpha0, beta0 >= 0 and alpha0 + beta0 < 1")
        if self.n_it < 0:
            raise ValueError("n_it must be >= 0")
        if self.mode not in (MODE_CLASSICAL, MODE_LEARNED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if min(self.tau_xf, self.tau_xt) < 0:
            raise ValueError("thresholds must be >= 0")


def classical_recipe(n_it: int = 20) -> SolverConfig:
    """Classical-mode settings tuned on the default phantom.

    Heavier prior weighting and more iterations than the learned-mode
    defaults: with fixed soft-threshold regularizers the merge needs to
    lean on the de-aliased estimates for the iteration to move away from
    the zero-filled initialization at a useful rate.
    """
    return SolverConfig(lambda0=0.05, alpha0=0.1, beta0=0.3,
                        tau_xf=0.08, tau_xt=0.06, n_it=n_it)


@dataclass(frozen=True)
class ObjectiveWeights:
    """Penalty weights (alpha, beta, gamma, lam, mu, w_xf) for reporting.

    ``from_config`` derives them from the update-path parameters via
    lambda0 = gamma/(lam+gamma), alpha0 = alpha/(alpha+beta+gamma),
    beta0 = beta/(alpha+beta+gamma) with gamma = 1, plus w_xf = tau_xf*beta
    and mu = tau_xt*alpha, so the update path exactly minimizes the
    reported objective.
    """

    alpha: float
    beta: float
    gamma: float
    lam: float
    mu: float
    w_xf: float

    @classmethod
    def from_config(cls, cfg: SolverConfig) -> "ObjectiveWeights":
        if cfg.lambda0 == 0:
            raise ValueError("lambda0 = 0 is a hard constraint; no finite lam")
        rest = 1.0 - cfg.alpha0 - cfg.beta0
        alpha = cfg.alpha0 / rest
        beta = cfg.beta0 / rest
        return cls(alpha=alpha, beta=beta, gamma=1.0,
                   lam=(1.0 - cfg.lambda0) / cfg.lambda0,
                   mu=cfg.tau_xt * alpha, w_xf=cfg.tau_xf * beta)


@dataclass
class SolverState:
    """Current estimate, auxiliary variables and problem references."""

    m: DynTensor
    u: DynTensor
    rho: DynTensor
    sigma: DynTensor
    baseline: DynTensor
    v: DynTensor
    mask: SamplingMask
    maps: CoilMaps
    k: int = 0
    trace: list = field(default_factory=list)


def _check_finite(arr: np.ndarray, iteration: int, stage: str) -> None:
    view = arr.view(np.float64) if np.iscomplexobj(arr) else arr
    if not np.all(np.isfinite(view)):
        finite = view[np.isfinite(view)]
        peak = float(np.abs(finite).max()) if finite.size else float("inf")
        raise SolverDivergedError(iteration, stage, peak)


def dc_step(m: DynTensor, maps: CoilMaps, v: DynTensor, mask: SamplingMask,
            lambda0: float) -> DynTensor:
    """Coil-wise point-wise data consistency.

    In k-space, sampled entries become lambda0*s_hat + (1-lambda0)*v and
    unsampled entries keep s_hat, where s_hat = F_s S_i m; the result is
    returned as per-coil images.
    """
    if not 0.0 <= lambda0 <= 1.0:
        raise ValueError("lambda0 must lie in [0, 1]")
    v.require_domain(DOMAIN_KSPACE, "data consistency")
    s_hat = fft_spatial(project(m, maps))
    lam_diag = np.where(mask.data[:, :, None] == 1, lambda0, 1.0)
    k = s_hat.data * lam_diag + (1.0 - lambda0) * v.data
    return ifft_spatial(DynTensor(k, DOMAIN_KSPACE))


def merge_step(u: DynTensor, rho: DynTensor, sigma: DynTensor, maps: CoilMaps,
               alpha0: float, beta0: float) -> DynTensor:
    """Weighted merge of the three estimates into the next image.

    Requires normalized maps (sum_i S_i^H S_i = I) so the result exactly
    minimizes the quadratic coupling sub-problem.
    """
    if alpha0 + beta0 > 1.0:
        raise ValueError("alpha0 + beta0 must not exceed 1")
    dc = combine(sigma, maps)
    merged = (alpha0 * u.data + beta0 * ifft_temporal(rho).data
              + (1.0 - alpha0 - beta0) * dc.data)
    return DynTensor(merged, u.domain)


def xf_step(m: DynTensor, baseline: DynTensor, spec: ProxSpec) -> DynTensor:
    """x-f estimate: F_t baseline + f(F_t m - F_t baseline)."""
    return xf_regularize(fft_temporal(m), fft_temporal(baseline), spec)


def xt_step(m: DynTensor, baseline: DynTensor, spec: ProxSpec) -> DynTensor:
    """Image-domain estimate: baseline + f(m - baseline)."""
    return xt_regularize(m, baseline, spec)


def zero_filled(v: DynTensor, maps: CoilMaps) -> DynTensor:
    """Coil-combined inverse FFT of the undersampled k-space (m^0)."""
    return combine(ifft_spatial(v), maps)


def penalty_objective(state: SolverState, weights: ObjectiveWeights) -> float:
    """Single-cost-function value for the current splitting variables.

    w_xf*||rho - F_t baseline||_1 + mu*||u - baseline||_1
    + lam/2 * sum_i ||D F_s sigma_i - v_i||^2
    + alpha/2 * ||u - m||^2 + beta/2 * ||rho - F_t m||^2
    + gamma/2 * sum_i ||sigma_i - S_i m||^2
    """
    ft_m = fft_temporal(state.m).data
    ft_bar = fft_temporal(state.baseline).data
    k_sigma = fft_spatial(state.sigma).data * state.mask.data[:, :, None]
    data_res = k_sigma - state.v.data
    proj = project(state.m, state.maps).data
    return float(
        weights.w_xf * np.abs(state.rho.data - ft_bar).sum()
        + weights.mu * np.abs(state.u.data - state.baseline.data).sum()
        + 0.5 * weights.lam * np.sum(np.abs(data_res) ** 2)
        + 0.5 * weights.alpha * np.sum(np.abs(state.u.data - state.m.data) ** 2)
        + 0.5 * weights.beta * np.sum(np.abs(state.rho.data - ft_m) ** 2)
        + 0.5 * weights.gamma * np.sum(np.abs(state.sigma.data - proj) ** 2)
    )


def _specs(cfg: SolverConfig, nets) -> tuple:
    if cfg.mode == MODE_CLASSICAL:
        return (ProxSpec(KIND_SOFT, cfg.tau_xf), ProxSpec(KIND_SOFT, cfg.tau_xt))
    net_xf, net_xt = nets
    return (ProxSpec(KIND_LEARNED, net=net_xf), ProxSpec(KIND_LEARNED, net=net_xt))


def solve(v: DynTensor, mask: SamplingMask, maps: CoilMaps, cfg: SolverConfig,
          nets=None):
    """Run n_it alternating iterations; returns (m, SolverState).

    ``v`` must already be masked and ``maps`` normalized.  In learned mode
    ``nets`` is the (xf_net, xt_net) pair; their hidden states are reset
    here, at the start of each solve.
    """
    if cfg.mode == MODE_LEARNED:
        if nets is None:
            raise ValueError("learned mode needs (xf_net, xt_net)")
        for net in nets:
            net.reset_hidden()
    spec_xf, spec_xt = _specs(cfg, nets)

    _check_finite(v.data, 0, "input")
    m = zero_filled(v, maps)
    baseline = temporal_average(v, mask, maps)
    ft_bar = fft_temporal(baseline)
    state = SolverState(m=m, u=m, rho=fft_temporal(m), sigma=project(m, maps),
                        baseline=baseline, v=v, mask=mask, maps=maps)
    classical = cfg.mode == MODE_CLASSICAL
    weights = ObjectiveWeights.from_config(cfg) if classical and cfg.lambda0 > 0 \
        else None
    if weights is not None:
        state.trace.append(penalty_objective(state, weights))

    for k in range(cfg.n_it):
        rho = xf_regularize(fft_temporal(state.m), ft_bar, spec_xf)
        _check_finite(rho.data, k, "xf")
        u = xt_regularize(state.m, baseline, spec_xt)
        _check_finite(u.data, k, "xt")
        sigma = dc_step(state.m, maps, v, mask, cfg.lambda0)
        _check_finite(sigma.data, k, "dc")
        m_next = merge_step(u, rho, sigma, maps, cfg.alpha0, cfg.beta0)
        _check_finite(m_next.data, k, "merge")
        state.m, state.u, state.rho, state.sigma = m_next, u, rho, sigma
        state.k = k + 1
        if weights is not None:
            state.trace.append(penalty_objective(state, weights))
    return state.m, state
