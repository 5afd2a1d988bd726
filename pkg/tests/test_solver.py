import numpy as np
import pytest

from ktrecon import (DOMAIN_IMAGE, DOMAIN_KSPACE, DynTensor, Ellipse,
                     PhantomSpec, SamplingMask, SolverConfig, acquire,
                     apply_mask, classical_recipe, combine, crop_dynamic,
                     dc_step, default_spec, fft_spatial, fft_temporal,
                     generate, ifft_temporal, mask_lattice, mask_vista_like,
                     merge_step, penalty_objective, project, psnr, solve,
                     synth_maps, xf_step, zero_filled)
from ktrecon.regularizers import KIND_SOFT, ProxSpec
from ktrecon.solver import (MODE_LEARNED, ObjectiveWeights, SolverDivergedError,
                            SolverState)

from helpers import random_tensor, rel_err


def _random_problem(rng, T=4, H=8, W=8, n_c=3, accel=2):
    m = random_tensor(rng, (T, H, W))
    maps = synth_maps(n_c, H, W, seed=int(rng.integers(1 << 30)))
    mask = mask_vista_like(T, H, accel, seed=int(rng.integers(1 << 30)))
    v = apply_mask(fft_spatial(project(m, maps)), mask)
    return m, maps, mask, v


def _dc_oracle(m, maps, v, mask, lambda0):
    """Independent per-entry quadratic minimizer of the DC sub-problem.

    With gamma = 1 and lam = (1 - lambda0)/lambda0, the k-space entry
    minimizing lam/2*D|s - v|^2 + 1/2*|s - s_hat|^2 is
    (lam*D*v + s_hat) / (lam*D + 1), evaluated with explicit loops.
    """
    s_hat = fft_spatial(project(m, maps)).data
    out = np.empty_like(s_hat)
    n_c, T, H, W = s_hat.shape
    for i in range(n_c):
        for t in range(T):
            for ky in range(H):
                sampled = mask.data[t, ky] == 1
                for kx in range(W):
                    z = s_hat[i, t, ky, kx]
                    if not sampled:
                        out[i, t, ky, kx] = z
                    elif lambda0 == 0:
                        out[i, t, ky, kx] = v.data[i, t, ky, kx]
                    else:
                        lam = (1 - lambda0) / lambda0
                        out[i, t, ky, kx] = (lam * v.data[i, t, ky, kx] + z) \
                            / (lam + 1)
    return out


def _dc_objective(sigma_k, s_hat, v, mask, lambda0):
    """DC sub-problem objective evaluated in k-space (gamma = 1 scaling)."""
    lam = np.inf if lambda0 == 0 else (1 - lambda0) / lambda0
    res = (sigma_k - v) * mask.data[:, :, None]
    fit = np.sum(np.abs(res) ** 2)
    couple = np.sum(np.abs(sigma_k - s_hat) ** 2)
    if lambda0 == 0:
        return couple if fit < 1e-18 else np.inf
    return 0.5 * lam * fit + 0.5 * couple


@pytest.mark.parametrize("lambda0", [0.0, 0.1, 0.5, 1.0])
def test_dc_step_matches_per_entry_oracle(lambda0):
    rng = np.random.default_rng(17)
    m, maps, mask, v = _random_problem(rng)
    sigma = dc_step(m, maps, v, mask, lambda0)
    oracle = _dc_oracle(m, maps, v, mask, lambda0)
    assert rel_err(fft_spatial(sigma).data, oracle) < 1e-10


def test_dc_step_lambda1_ignores_data():
    rng = np.random.default_rng(1)
    m, maps, mask, v = _random_problem(rng)
    sigma = dc_step(m, maps, v, mask, 1.0)
    assert rel_err(sigma.data, project(m, maps).data) < 1e-12


def test_dc_step_hard_replacement():
    rng = np.random.default_rng(2)
    m, maps, mask, v = _random_problem(rng)
    sigma_k = fft_spatial(dc_step(m, maps, v, mask, 0.0)).data
    s_hat = fft_spatial(project(m, maps)).data
    on = mask.data[:, :, None] == 1
    on4 = np.broadcast_to(on, sigma_k.shape)
    assert rel_err(sigma_k[on4], v.data[on4]) < 1e-10
    assert rel_err(sigma_k[~on4], s_hat[~on4]) < 1e-10


def test_dc_step_formula_per_entry():
    rng = np.random.default_rng(3)
    m, maps, mask, v = _random_problem(rng)
    lam0 = 0.3
    sigma_k = fft_spatial(dc_step(m, maps, v, mask, lam0)).data
    s_hat = fft_spatial(project(m, maps)).data
    on = np.broadcast_to(mask.data[:, :, None] == 1, sigma_k.shape)
    direct = np.where(on, lam0 * s_hat + (1 - lam0) * v.data, s_hat)
    assert np.max(np.abs(sigma_k - direct)) < 1e-12


def test_dc_objective_at_output_is_minimal():
    rng = np.random.default_rng(4)
    _, maps, mask, v = _random_problem(rng)
    m = random_tensor(rng, (4, 8, 8))  # mid-iteration estimate, not the truth
    lam0 = 0.1
    s_hat = fft_spatial(project(m, maps)).data
    sigma_k = fft_spatial(dc_step(m, maps, v, mask, lam0)).data
    oracle_k = _dc_oracle(m, maps, v, mask, lam0)
    f_out = _dc_objective(sigma_k, s_hat, v.data, mask, lam0)
    f_oracle = _dc_objective(oracle_k, s_hat, v.data, mask, lam0)
    assert abs(f_out - f_oracle) <= 1e-8 * max(f_oracle, 1e-30)
    # any perturbation increases the objective
    bump = sigma_k + 1e-3 * (rng.standard_normal(sigma_k.shape)
                             + 1j * rng.standard_normal(sigma_k.shape))
    assert _dc_objective(bump, s_hat, v.data, mask, lam0) > f_out


def test_merge_step_limit_cases():
    rng = np.random.default_rng(5)
    maps = synth_maps(3, 8, 8, seed=0)
    u = random_tensor(rng, (2, 8, 8))
    rho = fft_temporal(random_tensor(rng, (2, 8, 8)))
    sigma = random_tensor(rng, (3, 2, 8, 8))
    m_u = merge_step(u, rho, sigma, maps, 1.0, 0.0)
    assert rel_err(m_u.data, u.data) < 1e-14
    m_dc = merge_step(u, rho, sigma, maps, 0.0, 0.0)
    assert rel_err(m_dc.data, combine(sigma, maps).data) < 1e-14
    with pytest.raises(ValueError):
        merge_step(u, rho, sigma, maps, 0.7, 0.4)


def _merge_objective(m, u, rho, sigma, maps, alpha, beta, gamma):
    ft_m = np.fft.fft(m, axis=0, norm="ortho")
    proj = maps.data[:, None] * m[None]
    return float(0.5 * alpha * np.sum(np.abs(u - m) ** 2)
                 + 0.5 * beta * np.sum(np.abs(rho - ft_m) ** 2)
                 + 0.5 * gamma * np.sum(np.abs(sigma - proj) ** 2))


def _fd_gradient_norm(f, x0, rng, n_coords=64, h=1e-6):
    flat = x0.ravel()
    idx = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
    comps = []
    for i in idx:
        for part in (1.0, 1j):
            xp = flat.copy()
            xp[i] += h * part
            fp = f(xp.reshape(x0.shape))
            xm = flat.copy()
            xm[i] -= h * part
            fm = f(xm.reshape(x0.shape))
            comps.append((fp - fm) / (2 * h))
    return float(np.linalg.norm(comps))


def test_merge_step_stationarity():
    rng = np.random.default_rng(6)
    maps = synth_maps(3, 8, 8, seed=1)
    u = random_tensor(rng, (2, 8, 8))
    rho = fft_temporal(random_tensor(rng, (2, 8, 8)))
    sigma = random_tensor(rng, (3, 2, 8, 8))
    a0, b0 = 0.1, 0.1
    rest = 1 - a0 - b0
    alpha, beta, gamma = a0 / rest, b0 / rest, 1.0
    m_star = merge_step(u, rho, sigma, maps, a0, b0).data

    def f(m):
        return _merge_objective(m, u.data, rho.data, sigma.data, maps,
                                alpha, beta, gamma)

    g_at_min = _fd_gradient_norm(f, m_star, rng)
    shift = 0.1 * np.linalg.norm(m_star) / np.sqrt(m_star.size)
    g_nearby = _fd_gradient_norm(
        f, m_star + shift * (rng.standard_normal(m_star.shape)
                             + 1j * rng.standard_normal(m_star.shape)),
        rng)
    assert g_at_min / g_nearby < 1e-6


def test_xf_step_reduces_xf_error_on_lattice_r8():
    spec = default_spec(T=16, H=64, W=64)
    gt = generate(spec)
    maps = synth_maps(4, 64, 64, seed=1)
    mask = mask_lattice(16, 64, 8)
    v = acquire(gt, maps, mask)
    m0 = zero_filled(v, maps)
    from ktrecon.sampling import temporal_average
    baseline = temporal_average(v, mask, maps)
    rho = xf_step(m0, baseline, ProxSpec(KIND_SOFT, tau=0.08))
    gt_xf = fft_temporal(gt).data
    err_new = np.linalg.norm(rho.data - gt_xf)
    err_zf = np.linalg.norm(fft_temporal(m0).data - gt_xf)
    assert err_new < err_zf


def test_xt_step_reduces_image_error_on_lattice_r8():
    spec = default_spec(T=16, H=64, W=64)
    gt = generate(spec)
    maps = synth_maps(4, 64, 64, seed=1)
    mask = mask_lattice(16, 64, 8)
    v = acquire(gt, maps, mask)
    m0 = zero_filled(v, maps)
    from ktrecon.sampling import temporal_average
    from ktrecon.solver import xt_step
    baseline = temporal_average(v, mask, maps)
    u = xt_step(m0, baseline, ProxSpec(KIND_SOFT, tau=0.06))
    assert (np.linalg.norm(u.data - gt.data)
            < np.linalg.norm(m0.data - gt.data))
    # trivial cases mirror the x-f step
    out = xt_step(baseline, baseline, ProxSpec(KIND_SOFT, tau=0.4))
    assert rel_err(out.data, baseline.data) < 1e-14
    out = xt_step(m0, baseline, ProxSpec("identity"))
    assert rel_err(out.data, m0.data) < 1e-14


def test_xf_step_trivial_cases():
    rng = np.random.default_rng(7)
    baseline = random_tensor(rng, (4, 8, 8))
    m = random_tensor(rng, (4, 8, 8))
    out = xf_step(baseline, baseline, ProxSpec(KIND_SOFT, tau=0.4))
    assert rel_err(out.data, fft_temporal(baseline).data) < 1e-14
    out = xf_step(m, baseline, ProxSpec("identity"))
    assert rel_err(out.data, fft_temporal(m).data) < 1e-14


def test_solve_fully_sampled_hard_dc_one_iteration():
    spec = default_spec(T=4, H=16, W=16)
    gt = generate(spec)
    maps = synth_maps(3, 16, 16, seed=2)
    full = SamplingMask(np.ones((4, 16), dtype=np.uint8), accel=1)
    v = acquire(gt, maps, full)
    cfg = SolverConfig(lambda0=0.0, alpha0=0.0, beta0=0.0, n_it=1)
    m, _ = solve(v, full, maps, cfg)
    assert rel_err(m.data, gt.data) < 1e-10


def test_solve_zero_iterations_returns_zero_filled():
    spec = default_spec(T=4, H=16, W=16)
    gt = generate(spec)
    maps = synth_maps(2, 16, 16, seed=3)
    mask = mask_lattice(4, 16, 2)
    v = acquire(gt, maps, mask)
    m, state = solve(v, mask, maps, SolverConfig(n_it=0))
    assert np.array_equal(m.data, zero_filled(v, maps).data)
    assert state.k == 0


def test_solve_improves_crop_psnr_at_r8():
    spec = default_spec()
    gt = generate(spec)
    maps = synth_maps(4, 64, 64, seed=1)
    mask = mask_vista_like(16, 64, 8, seed=2)
    v = acquire(gt, maps, mask)
    box = crop_dynamic(gt)
    m, _ = solve(v, mask, maps, classical_recipe())
    gain = (psnr(box.slice(m.data), box.slice(gt.data))
            - psnr(box.slice(zero_filled(v, maps).data), box.slice(gt.data)))
    assert gain >= 3.0


def _random_phantom_spec(rng, T, H, W):
    return PhantomSpec(
        T=T, H=H, W=W,
        ellipses=(
            Ellipse(cy=H * rng.uniform(0.42, 0.58), cx=W * rng.uniform(0.42, 0.58),
                    ry=H * rng.uniform(0.10, 0.16), rx=W * rng.uniform(0.10, 0.16),
                    intensity=rng.uniform(0.7, 1.0), pulse=rng.uniform(0.15, 0.35)),
            Ellipse(cy=H * rng.uniform(0.2, 0.3), cx=W * rng.uniform(0.55, 0.7),
                    ry=H * 0.08, rx=W * 0.1, intensity=rng.uniform(0.4, 0.7)),
        ),
        background=0.2)


@pytest.mark.parametrize("accel", [4, 8])
def test_objective_trace_monotone(accel):
    rng = np.random.default_rng(100 + accel)
    for trial in range(5):
        spec = _random_phantom_spec(rng, 6, 24, 24)
        gt = generate(spec)
        maps = synth_maps(3, 24, 24, seed=int(rng.integers(1 << 30)))
        mask = mask_vista_like(6, 24, accel, seed=int(rng.integers(1 << 30)))
        v = acquire(gt, maps, mask)
        cfg = SolverConfig(lambda0=0.1, alpha0=0.15, beta0=0.25,
                           tau_xf=0.08, tau_xt=0.05, n_it=10)
        _, state = solve(v, mask, maps, cfg)
        trace = state.trace
        assert len(trace) == 11
        for a, b in zip(trace, trace[1:]):
            assert b <= a * (1 + 1e-9)


def test_objective_terms_scale_linearly():
    rng = np.random.default_rng(8)
    m, maps, mask, v = _random_problem(rng)
    cfg = SolverConfig(n_it=2)
    _, state = solve(v, mask, maps, cfg)
    w = ObjectiveWeights.from_config(cfg)
    base = penalty_objective(state, w)
    # doubling lam adds exactly the data-fidelity term once more
    w2 = ObjectiveWeights(alpha=w.alpha, beta=w.beta, gamma=w.gamma,
                          lam=2 * w.lam, mu=w.mu, w_xf=w.w_xf)
    k_sigma = fft_spatial(state.sigma).data * mask.data[:, :, None]
    fidelity = 0.5 * w.lam * np.sum(np.abs(k_sigma - state.v.data) ** 2)
    assert penalty_objective(state, w2) == pytest.approx(base + fidelity,
                                                         rel=1e-12)


def test_objective_zero_residuals_leaves_only_l1_terms():
    spec = default_spec(T=4, H=16, W=16)
    gt = generate(spec)
    maps = synth_maps(2, 16, 16, seed=4)
    full = SamplingMask(np.ones((4, 16), dtype=np.uint8), accel=1)
    v = acquire(gt, maps, full)
    from ktrecon.sampling import temporal_average
    baseline = temporal_average(v, full, maps)
    state = SolverState(m=gt, u=gt, rho=fft_temporal(gt),
                        sigma=project(gt, maps), baseline=baseline,
                        v=v, mask=full, maps=maps)
    w = ObjectiveWeights(alpha=1, beta=1, gamma=1, lam=9, mu=1, w_xf=1)
    got = penalty_objective(state, w)
    expected = (np.abs(fft_temporal(gt).data
                       - fft_temporal(baseline).data).sum()
                + np.abs(gt.data - baseline.data).sum())
    assert got == pytest.approx(expected, rel=1e-9)


def test_shift_equivariance_in_y():
    spec = default_spec(T=8, H=32, W=32)
    gt = generate(spec)
    maps = synth_maps(3, 32, 32, seed=5)
    mask = mask_vista_like(8, 32, 4, seed=6)
    cfg = SolverConfig(lambda0=0.05, alpha0=0.1, beta0=0.3,
                       tau_xf=0.08, tau_xt=0.06, n_it=5)

    v = acquire(gt, maps, mask)
    m, _ = solve(v, mask, maps, cfg)

    gt_s = DynTensor(np.roll(gt.data, 1, axis=1), DOMAIN_IMAGE)
    from ktrecon.coils import CoilMaps
    maps_s = CoilMaps(np.roll(maps.data, 1, axis=1), normalized=True)
    v_s = acquire(gt_s, maps_s, mask)
    m_s, _ = solve(v_s, mask, maps_s, cfg)
    assert rel_err(m_s.data, np.roll(m.data, 1, axis=1)) < 1e-6


def test_non_finite_guard():
    rng = np.random.default_rng(9)
    m, maps, mask, v = _random_problem(rng)
    bad = v.data.copy()
    bad[0, 0, 0, 0] = np.inf
    with pytest.raises(SolverDivergedError) as err:
        solve(DynTensor(bad, DOMAIN_KSPACE), mask, maps, SolverConfig(n_it=2))
    assert "iteration 0" in str(err.value) and "input" in str(err.value)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(lambda0=1.5)
    with pytest.raises(ValueError):
        SolverConfig(alpha0=0.6, beta0=0.5)
    with pytest.raises(ValueError):
        SolverConfig(mode="nonsense")
    with pytest.raises(ValueError):
        SolverConfig(n_it=-1)


def test_learned_mode_requires_nets():
    rng = np.random.default_rng(10)
    _, maps, mask, v = _random_problem(rng)
    with pytest.raises(ValueError):
        solve(v, mask, maps, SolverConfig(mode=MODE_LEARNED))
