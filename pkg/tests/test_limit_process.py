import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaysde.errors import ConfigError, DegenerateDenominatorError
from delaysde.limit_process import (companion_drift, iterated_wiener, limit_delta_J, limit_loglik_ratio,
                                    limit_mle_alpha, phi_vec, psi_mat, simulate_complex_wiener,
                                    simulate_limit_experiment, simulate_limit_system, wiener_delta_J)
from delaysde.spectral import RootRecord, classify

from .conftest import resonant_model


def _record(lam, coeffs):
    coeffs = tuple(complex(c) for c in coeffs)
    return RootRecord(complex(lam), len(coeffs), coeffs, len(coeffs) - 1)


def test_real_frequency_gives_real_path():
    w = simulate_complex_wiener(0.0, 1e-3, seed=1)
    assert w.values.dtype == float and w.values[0] == 0.0 and len(w.values) == 1001


def test_complex_normalisation():
    w = simulate_complex_wiener(2.0, 1e-3, seed=3)
    # E|dW|^2 = dt (1/2 + 1/2); 1000 steps give a 4.5% standard error
    assert np.mean(np.abs(w.increments) ** 2) == pytest.approx(1e-3, rel=0.15)
    assert np.var(w.increments.real) == pytest.approx(5e-4, rel=0.2)


def test_negative_frequency_is_conjugate():
    w = simulate_complex_wiener(1.3, 1e-2, seed=5, key=(1, 2))
    v = simulate_complex_wiener(-1.3, 1e-2, seed=5, key=(1, 2))
    assert v.frequency == -1.3
    assert np.array_equal(v.values, np.conj(w.values))
    assert np.array_equal(w.conj().values, v.values)


def test_supplied_increments_layouts():
    real2 = np.ones((2, 10))
    w = simulate_complex_wiener(1.0, 0.1, increments=real2)
    assert np.allclose(w.increments, (1 + 1j) / math.sqrt(2))
    with pytest.raises(ConfigError):
        simulate_complex_wiener(0.0, 0.1, increments=np.ones(9))


def test_iterated_wiener_order_zero_and_linear_ramp():
    w = simulate_complex_wiener(0.0, 1e-3, seed=2)
    assert np.array_equal(iterated_wiener(w, 0), w.values)
    ramp = simulate_complex_wiener(0.0, 1e-3, increments=np.full(1000, 1e-3))
    s = ramp.times
    assert np.max(np.abs(iterated_wiener(ramp, 1) - s ** 2 / 2)) <= 1e-3
    # exact left sum: dt^2 * sum_{j<k} (k - j) = dt^2 k (k + 1) / 2
    k = np.arange(1001)
    assert np.allclose(iterated_wiener(ramp, 1), 1e-6 * k * (k + 1) / 2, atol=1e-15)


def test_iterated_wiener_commutes_with_conjugation():
    w = simulate_complex_wiener(0.7, 1e-2, seed=8)
    for ell in range(4):
        assert np.allclose(iterated_wiener(w.conj(), ell), np.conj(iterated_wiener(w, ell)), atol=0)


def test_alpha_zero_chain_reproduces_wiener_and_iterated_integrals():
    rec = _record(1j, [0.3, 1.0 - 0.5j, 0.2 + 0.1j])
    dt = 1e-3
    w = simulate_complex_wiener(1.0, dt, seed=21)
    p = simulate_limit_system(rec, 2, 0.0, dt, wiener=w)
    assert np.array_equal(p.states[0], w.values)
    for ell in (1, 2):
        assert np.max(np.abs(p.states[ell] - iterated_wiener(w, ell))) <= 10 * dt
    assert np.all(p.states[:, 0] == 0)


def test_zero_noise_kick_gives_power_profiles():
    rec = _record(0.0, [1.0, 1.0, 1.0, 1.0])
    dt = 1e-3
    kick = np.zeros(1000)
    kick[0] = 1.0
    p = simulate_limit_system(rec, 3, 0.0, dt, increments=kick)
    t = np.arange(1001) * dt
    for ell in range(4):
        # the kick lands at t = dt, so X_l(t) = (t - dt)^l / l! up to O(dt)
        want = np.where(t > 0, (t - dt) ** ell / math.factorial(ell), 0.0)
        assert np.max(np.abs(p.states[ell].real - want)) <= 2 * dt


def test_scalar_ou_reduction():
    rec = _record(0.0, [2.0])
    dt = 1e-3
    w = simulate_complex_wiener(0.0, dt, seed=4)
    p = simulate_limit_system(rec, 0, 0.7, dt, wiener=w)
    x = np.zeros(1001)
    for k in range(1000):
        x[k + 1] = x[k] + 0.7 * 2.0 * x[k] * dt + w.increments[k]
    assert np.allclose(p.states[0].real, x, atol=1e-14)
    # single real root, m* = 0: the estimator is the scalar OU drift MLE divided by c
    xm = x[:-1]
    ou = float(np.dot(xm, np.diff(x)) / (np.dot(xm, xm) * dt))
    assert limit_mle_alpha([p]) == pytest.approx(ou / 2.0, rel=1e-12)


def test_alpha_hat_exact_without_noise():
    for rec, m in ((_record(0.0, [1.3]), 0), (_record(2j, [0.5, 1 - 1j]), 1)):
        kick = np.zeros(1000, dtype=complex if rec.lam.imag else float)
        kick[0] = 1.0
        p = simulate_limit_system(rec, m, 0.3, 1e-3, increments=kick)
        assert limit_mle_alpha([p]) == pytest.approx(0.3, abs=1e-12)


def test_zero_noise_statistics_vanish():
    rec = _record(1j, [1.0, 2.0])
    p = simulate_limit_system(rec, 1, 0.0, 1e-2, increments=np.zeros(100, dtype=complex))
    assert limit_delta_J([p]) == (0.0, 0.0)
    with pytest.raises(DegenerateDenominatorError):
        limit_mle_alpha([p])


def test_particular_case_statistics():
    mass = -0.5
    rec = _record(0.0, [mass])
    w = simulate_complex_wiener(0.0, 1e-3, seed=6)
    d, J = limit_delta_J([simulate_limit_system(rec, 0, 0.0, 1e-3, wiener=w)])
    W = w.values
    assert d == pytest.approx(mass * np.dot(W[:-1], w.increments), rel=1e-13)
    assert J == pytest.approx(mass ** 2 * np.dot(W[:-1], W[:-1]) * 1e-3, rel=1e-13)


def test_phase_rotation_leaves_J_unchanged():
    gamma = 0.9
    w = simulate_complex_wiener(1.0, 1e-3, seed=7)
    rotated = simulate_complex_wiener(1.0, 1e-3, increments=w.increments * cmath.exp(1j * gamma))
    a = simulate_limit_system(_record(1j, [1.0 + 0.5j]), 0, 0.0, 1e-3, wiener=w)
    b = simulate_limit_system(_record(1j, [(1.0 + 0.5j) * cmath.exp(1j * gamma)]), 0, 0.0, 1e-3, wiener=rotated)
    assert limit_delta_J([a])[1] == pytest.approx(limit_delta_J([b])[1], rel=1e-13)


def test_realness_residuals():
    rec = _record(0.0, [1.7])
    d, J, res = limit_delta_J([simulate_limit_system(rec, 0, 0.4, 1e-3, seed=1)], return_residual=True)
    assert abs(res) <= 1e-12
    pair = simulate_limit_system(_record(1j, [0.3, 1 - 2j]), 1, 0.4, 1e-3, seed=2)
    d, J, res = limit_delta_J([pair], return_residual=True)
    assert abs(res) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_mle_identity_and_loglik(seed):
    summary = classify(resonant_model(1.0))
    paths = simulate_limit_experiment(summary, 0.8, 1e-3, seed=seed)
    d, J = limit_delta_J(paths)
    assert abs((limit_mle_alpha(paths) - 0.8) - d / J) <= 1e-10 * max(1.0, abs(d / J))
    assert limit_loglik_ratio(paths, 0.8, 0.8) == 0
    l1 = limit_loglik_ratio(paths, 0.8, 1.1)
    assert l1 == pytest.approx(0.3 * d - 0.5 * 0.09 * J, rel=1e-14)


def test_loglik_arithmetic_example():
    # dt = 1/2, increments (2, 1/2): X = (0, 2, 5/2), Delta = 2 * 1/2 = 1, J = 2^2 / 2 = 2
    p = simulate_limit_system(_record(0.0, [1.0]), 0, 0.0, 0.5, increments=np.array([2.0, 0.5]))
    assert limit_delta_J([p]) == (1.0, 2.0)
    assert limit_loglik_ratio([p], 0.0, 1.0) == 0.0
    assert limit_loglik_ratio([p], 0.0, 0.0) == 0.0


def test_alpha_zero_matches_iterated_integral_form():
    summary = classify(resonant_model(1.0))
    (rec,) = summary.dominant_roots
    dt = 1e-3
    for seed in range(5):
        w = simulate_complex_wiener(rec.lam.imag, dt, seed=seed)
        p = simulate_limit_system(rec, 1, 0.0, dt, wiener=w)
        d0, J0 = limit_delta_J([p])
        d1, J1 = wiener_delta_J([rec], 1, [w])
        assert abs(d0 - d1) <= 10 * dt and abs(J0 - J1) <= 10 * dt


def test_real_form_simulation_matches_complex():
    rec = _record(1j, [0.4, 1.2 - 0.7j])
    dt, alpha = 1e-3, 0.9
    z = np.random.default_rng(3).standard_normal((2, 1000)) * math.sqrt(dt)
    p = simulate_limit_system(rec, 1, alpha, dt, increments=z)
    A = companion_drift(rec.coeffs[1], alpha, 1, pair=True)
    x = np.zeros(4)
    for k in range(1000):
        x = x + A @ x * dt + np.array([z[0, k], z[1, k], 0.0, 0.0]) / math.sqrt(2)
    assert np.allclose(x, np.concatenate([phi_vec(p.states[0, -1]), phi_vec(p.states[1, -1])]), atol=1e-12)
    real = companion_drift(2.0, 0.5, 2, pair=False)
    assert real[0, 2] == 1.0 and real[1, 0] == 1.0 and real[2, 1] == 1.0


def test_root_degree_must_match():
    with pytest.raises(ConfigError):
        simulate_limit_system(_record(0.0, [1.0, 2.0]), 0, 0.0, 0.1)


cplx = st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(cplx, cplx)
def test_phi_psi_identities(z1, z2):
    tol = 1e-14 * max(1.0, abs(z1) * abs(z2), abs(z1) ** 2, abs(z2) ** 2)
    assert np.allclose(psi_mat(z1) @ phi_vec(z2), phi_vec(z1 * z2), atol=tol, rtol=0)
    assert np.allclose(psi_mat(z1).T @ psi_mat(z1), abs(z1) ** 2 * np.eye(2), atol=tol, rtol=0)
    assert abs(phi_vec(z1) @ phi_vec(z2) - (z1 * z2.conjugate()).real) <= tol
    assert abs(phi_vec(z1) @ phi_vec(z1) - abs(z1) ** 2) <= tol
