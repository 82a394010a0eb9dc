import math
import warnings

import numpy as np
import pytest

from irs_cascade.acquisition import (SparsityPattern, gen_pilot_plan, gen_reflection, restrict,
                                     simulate_observation)
from irs_cascade.channel import crandn, gen_on_grid_sparse, gen_rayleigh
from irs_cascade.estimators import (EstimatorParams, IllConditionedWarning, analytic_mse,
                                    baseline_lmmse, baseline_onoff, estimate, lmmse_apply,
                                    mse_gradient, nmse, noise_floor_tol, omp_support,
                                    proposed_apply, proposed_digital_estimator, reconstruct)
from irs_cascade.geometry import UpaDims, build_transform
from irs_cascade.quantizer import INFINITE, lloyd_max

BS = IRS = UpaDims(4, 4)
M = N = 16
L, T = 4, 64


def direct_mse(W, Xi, p):
    """sigma_h2 ||(1-eta) W Xi - I||_F^2 + c ||W||_F^2 (unexpanded form)."""
    E = p.gain * W @ Xi - np.eye(Xi.shape[1])
    return p.sigma_h2 * np.vdot(E, E).real + p.c * np.vdot(W, W).real


def quadratic_minimizer(f, n):
    """Minimize a real quadratic f: C^n -> R, known only by evaluation."""
    dim = 2 * n

    def ev(z):
        return f(z[:n] + 1j * z[n:])

    f0 = ev(np.zeros(dim))
    eye = np.eye(dim)
    fp = np.array([ev(eye[i]) for i in range(dim)])
    fm = np.array([ev(-eye[i]) for i in range(dim)])
    q_diag = (fp + fm) / 2 - f0
    b = (fp - fm) / 2
    Q = np.diag(q_diag)
    for i in range(dim):
        for j in range(i + 1, dim):
            Q[i, j] = Q[j, i] = (ev(eye[i] + eye[j]) - q_diag[i] - q_diag[j] - b[i] - b[j] - f0) / 2
    z = np.linalg.solve(2 * Q, -b)
    return z[:n] + 1j * z[n:]


def random_problem(rng, rows=16, cols=8):
    Xi = crandn(rng, rows, cols) * rng.uniform(0.3, 3.0)
    p = EstimatorParams(eta=rng.uniform(0.0, 0.4), sigma_h2=rng.uniform(0.5, 2.0),
                        sigma_n2=rng.uniform(0.05, 2.0), N=int(rng.integers(1, 20)))
    return Xi, p


def test_params():
    p = EstimatorParams(0.1175, 1.0, 0.1, 16)
    assert p.c == pytest.approx((1 - 0.1175) * (0.1 + 0.1175 * 16))
    with pytest.raises(ValueError):
        EstimatorParams(1.0, 1.0, 0.1, 16)
    with pytest.raises(ValueError):
        EstimatorParams(0.1, 0.0, 0.1, 16)


def test_scalar_wiener_toy():
    p = EstimatorParams(0.0, 1.0, 1.0, 0)
    np.testing.assert_allclose(proposed_digital_estimator(np.eye(4), p), 0.5 * np.eye(4), atol=1e-15)


def test_matches_brute_force_oracle(rng):
    for _ in range(3):
        Xi, p = random_problem(rng)
        W = proposed_digital_estimator(Xi, p)
        oracle = np.vstack([
            quadratic_minimizer(
                lambda w, i=i: p.sigma_h2 * np.sum(np.abs(p.gain * w @ Xi - np.eye(8)[i]) ** 2)
                + p.c * np.sum(np.abs(w) ** 2), Xi.shape[0])
            for i in range(Xi.shape[1])])
        assert np.linalg.norm(W - oracle) < 1e-8 * np.linalg.norm(oracle)


def test_analytic_mse_matches_direct_form(rng):
    for _ in range(10):
        Xi, p = random_problem(rng)
        W = crandn(rng, 8, 16)
        assert analytic_mse(W, Xi, p) == pytest.approx(direct_mse(W, Xi, p), rel=1e-12)


def test_gradient_vanishes_at_optimum(rng):
    for _ in range(5):
        Xi, p = random_problem(rng)
        W = proposed_digital_estimator(Xi, p)
        assert np.abs(mse_gradient(W, Xi, p)).max() < 1e-8


def test_gradient_finite_differences(rng):
    Xi, p = random_problem(rng, 6, 3)
    W = crandn(rng, 3, 6)
    G = mse_gradient(W, Xi, p)
    h = 1e-6
    for (i, j) in [(0, 0), (1, 4), (2, 5)]:
        E = np.zeros_like(W)
        E[i, j] = 1
        d_re = (direct_mse(W + h * E, Xi, p) - direct_mse(W - h * E, Xi, p)) / (2 * h)
        d_im = (direct_mse(W + 1j * h * E, Xi, p) - direct_mse(W - 1j * h * E, Xi, p)) / (2 * h)
        # df/d conj(w) = (df/dRe + j df/dIm) / 2
        assert G[i, j] == pytest.approx(0.5 * (d_re + 1j * d_im), rel=1e-6, abs=1e-8)


def test_perturbations_never_improve(rng):
    Xi, p = random_problem(rng)
    W = proposed_digital_estimator(Xi, p)
    best = analytic_mse(W, Xi, p)
    for _ in range(100):
        D = crandn(rng, *W.shape)
        D *= 1e-3 / np.linalg.norm(D)
        assert analytic_mse(W + D, Xi, p) >= best


def test_apply_form_agrees(rng):
    Xi, p = random_problem(rng, 40, 30)
    y = crandn(rng, 40)
    np.testing.assert_allclose(proposed_apply(Xi, y, p), proposed_digital_estimator(Xi, p) @ y,
                               rtol=1e-10)
    np.testing.assert_allclose(lmmse_apply(Xi, y, 0.3), baseline_lmmse(Xi, 0.3) @ y, rtol=1e-10)
    gram = Xi.conj().T @ Xi
    np.testing.assert_allclose(proposed_digital_estimator(Xi, p, gram),
                               proposed_digital_estimator(Xi, p), rtol=1e-12)


def test_ill_conditioning_warns(rng):
    Xi = crandn(rng, 8, 2) @ crandn(rng, 2, 6)       # rank 2 of 6 columns
    p = EstimatorParams(0.0, 1.0, 1e-15, 0)
    with pytest.warns(IllConditionedWarning):
        W = proposed_digital_estimator(Xi, p)
    assert W.shape == (6, 8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        proposed_digital_estimator(crandn(rng, 8, 6), EstimatorParams(0.1, 1.0, 0.1, 4))


def test_estimate_embedding():
    A = build_transform(UpaDims(2, 1))
    y = np.array([1.0 + 0j, 2.0])
    ident = estimate(np.eye(2), y, SparsityPattern.identity(2), A, 1)
    np.testing.assert_allclose(ident.h_v_hat, y)
    np.testing.assert_allclose(ident.H_hat[:, 0], A @ y)
    W = np.array([[0.0, 0.5]])
    single = estimate(W, y, SparsityPattern.from_indices([1], 2), A, 1)
    np.testing.assert_allclose(single.h_v_hat, [0.0, 1.0])
    with pytest.raises(ValueError):
        estimate(np.eye(3), y, SparsityPattern.identity(2), A, 1)
    with pytest.raises(ValueError):
        reconstruct(np.ones(2), SparsityPattern.identity(4), A, 1)


def test_support_two_example():
    pattern = SparsityPattern.from_indices([2], 6)
    z = 3.0 - 1.0j
    h = pattern.embed(np.array([z]))
    assert h[2] == z and np.count_nonzero(h) == 1


def test_noiseless_near_least_squares(rng):
    ch = gen_rayleigh(rng, BS, IRS)
    refl, plan = gen_reflection(rng, N, T), gen_pilot_plan(rng, M, L, T)
    blk = simulate_observation(ch, refl, plan, INFINITE, 0.0, rng)
    p = EstimatorParams(0.0, 1.0, 1e-12, N)
    res = estimate(proposed_digital_estimator(blk.Xi, p), blk.y, blk.pattern,
                   build_transform(BS), N, ch.H)
    assert np.linalg.norm(res.h_v_hat - ch.h_v) < 1e-3 * np.linalg.norm(ch.h_v)
    assert res.nmse < 1e-6


def _sparse_block(rng, n_v, bits, snr_db):
    ch = gen_on_grid_sparse(rng, BS, IRS, n_v)
    refl, plan = gen_reflection(rng, N, T), gen_pilot_plan(rng, M, L, T)
    spec = lloyd_max(bits)
    return ch, spec, simulate_observation(ch, refl, plan, spec, 10 ** (-snr_db / 10), rng)


def test_omp_single_atom_noiseless(rng):
    ch = gen_on_grid_sparse(rng, BS, IRS, 1)
    blk = simulate_observation(ch, gen_reflection(rng, N, T), gen_pilot_plan(rng, M, L, T),
                               INFINITE, 0.0, rng)
    pattern = omp_support(blk.Psi, blk.y, max_atoms=1)
    np.testing.assert_array_equal(pattern.support, ch.support)
    # noiseless: the residual vanishes after the single pick, so a tolerance stops it there
    assert omp_support(blk.Psi, blk.y, 10, residual_tol=1e-20).n_active == 1


def test_omp_recovery_rate(rng):
    hits = total = 0
    for _ in range(200):
        ch, spec, blk = _sparse_block(rng, 8, 3, 20)
        p = EstimatorParams(spec.eta, 1.0, 0.01, N)
        tol = noise_floor_tol(p.c, blk.n_obs, blk.y, factor=1.0)
        found = omp_support(p.gain * blk.Psi, blk.y, 8, tol).support
        hits += np.intersect1d(found, ch.support).size
        total += 8
    assert hits / total > 0.9


def test_omp_zero_observation():
    pattern = omp_support(np.ones((4, 6)), np.zeros(4, dtype=complex), 3, 0.1)
    assert pattern.n_active == 0 and pattern.size == 6
    with pytest.raises(ValueError):
        omp_support(np.ones((4, 6)), np.ones(4), 5)


def test_lmmse_equals_proposed_without_quantization(rng):
    Psi = crandn(rng, 64, 48)
    p = EstimatorParams(0.0, 1.0, 0.3, 16)
    np.testing.assert_allclose(baseline_lmmse(Psi, 0.3, 1.0), proposed_digital_estimator(Psi, p),
                               rtol=1e-12, atol=1e-14)


def test_lmmse_shape_at_default_config(rng):
    ch = gen_rayleigh(rng, BS, IRS)
    blk = simulate_observation(ch, gen_reflection(rng, N, T), gen_pilot_plan(rng, M, L, T),
                               INFINITE, 0.1, rng)
    assert baseline_lmmse(blk.Psi, 0.1).shape == (256, 256)


def _compare(rng, bits, snr_db, trials, onoff=False):
    spec = lloyd_max(bits)
    sigma_n2 = 10 ** (-snr_db / 10)
    A = build_transform(BS)
    p = EstimatorParams(spec.eta, 1.0, sigma_n2, N)
    prop, other = [], []
    for _ in range(trials):
        ch = gen_rayleigh(rng, BS, IRS)
        blk = simulate_observation(ch, gen_reflection(rng, N, T), gen_pilot_plan(rng, M, L, T),
                                   spec, sigma_n2, rng, A_r=A)
        prop.append(reconstruct(proposed_apply(blk.Xi, blk.y, p), blk.pattern, A, N, ch.H).nmse)
        if onoff:
            other.append(baseline_onoff(ch, L, spec, sigma_n2, rng).nmse)
        else:
            other.append(reconstruct(lmmse_apply(blk.Psi, blk.y, sigma_n2), blk.pattern, A, N,
                                     ch.H).nmse)
    return np.mean(prop), np.mean(other)


def test_lmmse_worse_at_one_bit(rng):
    prop, lmmse = _compare(rng, 1, 20, 200)
    assert prop < lmmse


def test_onoff_budget_and_exact_fully_digital(rng):
    assert -(-16 // 4) * 16 == 64 == T
    dims = UpaDims(2, 2)
    ch = gen_rayleigh(rng, dims, IRS)
    res = baseline_onoff(ch, 4, INFINITE, 1e-300, rng)
    assert res.nmse < 1e-20


def test_onoff_worse_than_proposed(rng):
    prop, onoff = _compare(rng, 2, 10, 200, onoff=True)
    assert prop < onoff


def test_nmse_cases(rng):
    H = crandn(rng, 4, 3)
    assert nmse(H, H) == 0.0
    assert nmse(np.zeros_like(H), H) == pytest.approx(1.0)
    assert nmse(2 * H, H) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        nmse(H, np.zeros_like(H))
    with pytest.raises(ValueError):
        nmse(H[:2], H)


def test_restricted_estimator_on_true_support(rng):
    ch, spec, blk = _sparse_block(rng, 10, 3, 20)
    p = EstimatorParams(spec.eta, 1.0, 0.01, N)
    pattern = SparsityPattern(ch.support, M * N)
    sub = restrict(blk, pattern)
    res = estimate(proposed_digital_estimator(sub.Xi, p), blk.y, pattern, build_transform(BS), N,
                   ch.H)
    assert res.nmse < 0.05
