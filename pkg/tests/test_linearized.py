import math

import numpy as np
import pytest
import scipy.linalg
from scipy import optimize

from kerrsqueeze.classical import plus_state, steady_states
from kerrsqueeze.errors import DegeneracyError, DomainError
from kerrsqueeze.linearized import (SpectrumResult, analytic_vout, analyze, c1_spectrum,
                                    diffusion_closed_form, diffusion_constant, eigensystem,
                                    jacobian, kd_contraction, noise_matrices, phi0_and_n0)
from kerrsqueeze.model import ReducedParams
from kerrsqueeze.stochastic.drift import drift_jacobian, reduced_diffusion, reduced_drift

P12 = ReducedParams(1.2, 3.0, 1e-3)
P15 = ReducedParams(1.5, 4.0, 1e-3)

# frozen reference values at (p, delta) = (1.2, 3); D cross-checked against the null-space oracle below
PHI0_12 = -0.23763983796512622
D_12 = 0.6285015347632961
IM_LAMBDA2_12 = 1.5336166


def nullspace_diffusion(params, theta=0.3):
    """d_theta from the left null vector of the raw drift Jacobian (no co-rotation, no N0)."""
    x = plus_state(params).state(theta)
    j = drift_jacobian(x, params)
    tangent = np.array([-1j * x[0], 1j * x[1], 1j * x[2], -1j * x[3]])   # d state / d theta
    w = scipy.linalg.null_space(j.T)[:, 0]
    w = w / (w @ tangent)
    return complex(w @ reduced_diffusion(x, params) @ w)


def test_drift_jacobian_finite_differences():
    s = plus_state(P12)
    rng = np.random.default_rng(0)
    for x in [s.state(0.0), s.state(0.0) + 0.1 * (rng.normal(size=4) + 1j * rng.normal(size=4))]:
        j = drift_jacobian(x, P12)
        h = 1e-6
        fd = np.empty((4, 4), dtype=complex)
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd[:, k] = (reduced_drift(x + e, P12) - reduced_drift(x - e, P12)) / (2 * h)
        assert np.abs(fd - j).max() / np.abs(j).max() < 1e-6


def test_jacobian_is_theta_independent():
    s = plus_state(P12)
    base = jacobian(P12, s, 0.0)
    for theta in (0.5, 1.0, 2.0):
        assert np.abs(jacobian(P12, s, theta) - base).max() < 1e-13


def test_jacobian_rejects_trivial_state():
    trivial = steady_states(P12)[0]
    with pytest.raises(DomainError):
        jacobian(P12, trivial)


def test_eigenvalue_structure_examples():
    a = analyze(ReducedParams(1.5, 3.5))
    lam = a.eigenvalues
    assert abs(lam[0]) < 1e-9 and abs(lam[1] + 2) < 1e-9
    assert abs(lam[2] + lam[3] + 2) < 1e-9
    assert lam[2].imag < lam[3].imag
    a = analyze(P12)
    assert a.eigenvalues[3].imag == pytest.approx(IM_LAMBDA2_12, abs=1e-6)


def test_eigenvector_shapes():
    a = analyze(P12)
    v0 = a.right_vectors[:, 0]
    np.testing.assert_allclose(v0, np.array([-1, 1, 1, -1]) / a.n0, atol=1e-12)
    e = np.exp(1j * a.phi0)
    v1 = a.right_vectors[:, 1]
    np.testing.assert_allclose(v1, np.array([e, -e, np.conj(e), -np.conj(e)]) / a.n0, atol=1e-12)
    w1 = a.left_vectors[:, 1]
    ratio = w1 / w1[0]
    np.testing.assert_allclose(ratio, [1, -1, 1, -1], atol=1e-12)
    assert a.biorthonormality_residual() < 1e-12


def test_phi0_and_n0():
    phi0, n0, diag = phi0_and_n0(P12)
    assert phi0 == pytest.approx(PHI0_12, abs=1e-10)
    assert n0 == pytest.approx(-4 * math.cos(phi0))
    phi0b, _, _ = phi0_and_n0(P12)
    assert phi0b == phi0
    # the verbatim closed form is a diagnostic; its modulus is not one
    assert abs(diag["verbatim_modulus"] - 1) > 0.1
    assert abs(diag["corrected_modulus"] - 1) < 1e-12
    assert diag["corrected_discrepancy"] < 1e-10
    a = analyze(P12)
    assert abs(np.vdot(a.left_vectors[:, 0], a.right_vectors[:, 0]) - 1) < 1e-9


def test_saddle_node_is_degenerate():
    with pytest.raises(DegeneracyError):
        analyze(ReducedParams(1.0, 3.0))
    with pytest.raises(DegeneracyError):
        eigensystem(np.zeros((4, 4)))


def test_noise_matrices():
    s = plus_state(P12)
    d_bar, b_bar = noise_matrices(P12, s, 0.0)
    assert np.abs(d_bar - b_bar @ b_bar.T).max() < 1e-12
    k, mu2 = P12.kappa, s.mu_sq
    a, b = b_bar[0, 0], b_bar[0, 1]
    c, d = b_bar[1, 0], b_bar[1, 1]
    assert abs(a * a + b * b - 1j * k * mu2) < 1e-12
    assert abs(a * c + b * d - 1j * k * (2 * mu2 + P12.cross_coupling)) < 1e-12
    np.testing.assert_allclose(d_bar[2:, 2:], d_bar[:2, :2].conj(), atol=1e-15)
    assert np.all(d_bar[:2, 2:] == 0)
    theta = math.pi / 4
    d_rot, _ = noise_matrices(P12, s, theta)
    assert d_rot[0, 0] == pytest.approx(d_bar[0, 0] * np.exp(-2j * theta))
    assert d_rot[1, 1] == pytest.approx(d_bar[1, 1] * np.exp(2j * theta))
    assert d_rot[0, 1] == pytest.approx(d_bar[0, 1])


def test_noise_matrix_orthogonal_gauge_freedom():
    _, b_bar = noise_matrices(P12, plus_state(P12))
    rng = np.random.default_rng(1)
    for _ in range(5):
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        bq = b_bar @ q
        assert np.abs(bq @ bq.T - b_bar @ b_bar.T).max() < 1e-12


def test_steady_diffusion_matches_reduced_diffusion():
    s = plus_state(P15)
    d_bar, _ = noise_matrices(P15, s, 0.7)
    assert np.abs(d_bar - reduced_diffusion(s.state(0.7), P15)).max() < 1e-15


def test_kd_contraction():
    vals = [kd_contraction(analyze(P12, theta=t), "w1") for t in (0.0, 1.0, 2.0)]
    for v in vals:
        assert abs(v / (-4 * P12.kappa) - 1) < 1e-9
    assert max(abs(x - y) for x in vals for y in vals) < 1e-12
    a = analyze(P12)
    w0 = kd_contraction(a, "w0")
    assert w0.real == pytest.approx(-a.n0 ** 2 * a.mu ** 2 * diffusion_constant(P12), rel=1e-10)
    with pytest.raises(ValueError):
        kd_contraction(a, "w2")


def test_diffusion_constant_matches_nullspace_oracle():
    for p, delta in [(1.2, 3.0), (1.5, 4.0), (1.5, 3.5), (1.1, 2.5), (2.0, 5.0)]:
        prm = ReducedParams(p, delta, 1e-3)
        oracle = nullspace_diffusion(prm)
        assert abs(oracle.imag) < 1e-15
        assert diffusion_constant(prm) == pytest.approx(oracle.real, rel=1e-9)
    assert diffusion_constant(P12) / P12.kappa == pytest.approx(D_12, rel=1e-9)


def test_diffusion_constant_examples():
    d = diffusion_constant(P15) / P15.kappa
    assert 0.1 < d < 10
    half = P15.replace(kappa=P15.kappa / 2)
    assert diffusion_constant(half) == pytest.approx(diffusion_constant(P15) / 2, rel=1e-12)
    a = analyze(P15)
    assert diffusion_closed_form(P15, a.state.mu_sq, a.phi0) == pytest.approx(diffusion_constant(P15), rel=1e-9)


def p_at_mu_sq(delta, target):
    def f(p):
        return (delta - 2 * p + math.sqrt(p * p - 1)) / 3 - target
    hi = (2 * delta + math.sqrt(delta * delta - 3)) / 3
    return optimize.brentq(f, 2 / math.sqrt(3), hi, xtol=1e-15)


def test_diffusion_diverges_at_supercritical_edge():
    d_small = diffusion_constant(ReducedParams(p_at_mu_sq(4.0, 1e-4), 4.0))
    d_large = diffusion_constant(ReducedParams(p_at_mu_sq(4.0, 1e-2), 4.0))
    assert d_small / d_large >= 10


def test_theta_gauge_invariance():
    ref = analyze(P15, theta=0.0)
    for theta in (0.4, 1.3, 2.9):
        a = analyze(P15, theta=theta)
        np.testing.assert_allclose(a.eigenvalues, ref.eigenvalues, atol=1e-12)
        assert diffusion_constant(P15, analysis=a) == pytest.approx(diffusion_constant(P15, analysis=ref), rel=1e-12)
        assert a.phi0 == pytest.approx(ref.phi0, abs=1e-12)


def test_c1_spectrum_examples():
    k = 1e-3
    assert c1_spectrum(k, 0.0) == pytest.approx(-k / 4)
    assert c1_spectrum(k, 2.0) == pytest.approx(-k / 8)
    assert c1_spectrum(k, -2.0) == c1_spectrum(k, 2.0)
    big = c1_spectrum(k, 1e6)
    assert big < 0 and abs(big) < 1e-14


def test_analytic_vout_anchors():
    grid = np.linspace(0, 10, 101)
    v = analytic_vout(P12, math.pi / 2, grid)
    assert abs(v.v_out[0]) < 1e-12
    assert abs(v.v_out[20] - 0.5) < 1e-12            # omega = 2
    assert np.all(np.diff(v.v_out) > 0)
    np.testing.assert_allclose(v.v_out, 1 + 4 * c1_spectrum(1.0, grid), atol=1e-12)
    phi0 = analyze(P12).phi0
    v0 = analytic_vout(P12, phi0, grid)
    assert np.abs(v0.v_out - 1).max() < 1e-12
    assert isinstance(v, SpectrumResult) and v.source == "analytic"


def test_analytic_vout_general_phase():
    grid = np.linspace(0, 10, 51)
    phi0 = analyze(P15).phi0
    for phi in np.linspace(-1.5, 1.5, 7):
        v = analytic_vout(P15, phi, grid).v_out
        assert np.all(v >= -1e-12)
        g = analytic_vout(P15, phi, grid, form="gauge").v_out
        # the two forms differ by a frequency-independent offset
        np.testing.assert_allclose(v - g, (v - g)[0], atol=1e-12)
    for phi in (math.pi / 2, phi0):
        np.testing.assert_allclose(analytic_vout(P15, phi, grid).v_out,
                                   analytic_vout(P15, phi, grid, form="gauge").v_out, atol=1e-12)
    with pytest.raises(ValueError):
        analytic_vout(P15, 0.0, grid, form="other")


def test_analytic_vout_theta_invariance():
    grid = np.linspace(0, 6, 13)
    ref = analytic_vout(P15, 0.3, grid, state=plus_state(P15)).v_out
    for theta in (0.5, 1.5, 2.5):
        phi0 = analyze(P15, theta=theta).phi0
        np.testing.assert_allclose(analytic_vout(P15, 0.3, grid, phi0=phi0).v_out, ref, atol=1e-12)


def test_analytic_vout_degenerate_normalization():
    with pytest.raises(DegeneracyError):
        analytic_vout(P12, 0.0, [0.0], phi0=math.pi / 2)


def test_spectrum_result_as_dict():
    d = analytic_vout(P12, math.pi / 2, [0.0, 1.0]).as_dict()
    assert d["omega"] == [0.0, 1.0] and d["source"] == "analytic" and d["stderr"] is None
