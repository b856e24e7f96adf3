import math

import numpy as np
import pytest
from numba import njit

from kerrsqueeze.classical import classical_rhs, plus_state
from kerrsqueeze.errors import FactorizationError
from kerrsqueeze.model import ReducedParams
from kerrsqueeze.stochastic.drift import (FullParams, full_diffusion, full_drift,
                                          full_to_reduced_state, pump_amplitude, reduced_diffusion,
                                          reduced_drift, reduced_to_full_state)
from kerrsqueeze.stochastic.factor import factor2, factor_diffusion
from kerrsqueeze.stochastic.rng import (TAG_FULL, TAG_REDUCED, normal4, philox4x64,
                                        standard_normals)

PRM = ReducedParams(1.2, 3.0, 1e-3)


def random_states(n, size=4, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return scale * (rng.normal(size=(n, size)) + 1j * rng.normal(size=(n, size)))


# ---------------------------------------------------------------- reduced drift and diffusion

def test_reduced_drift_fixed_points():
    assert np.all(reduced_drift(np.zeros(4), PRM) == 0)
    assert np.abs(reduced_drift(plus_state(PRM).state(0.9), PRM)).max() < 1e-12


def test_reduced_drift_classical_restriction():
    beta = random_states(5, 2, 0.7, seed=3)
    x = np.concatenate([beta, beta.conj()], axis=1)
    a = reduced_drift(x, PRM)
    np.testing.assert_allclose(a[:, :2], classical_rhs(beta, PRM), atol=1e-13)
    np.testing.assert_allclose(a[:, 2:], classical_rhs(beta, PRM).conj(), atol=1e-13)


def test_reduced_drift_partner_swap_rule():
    # swapping each amplitude with its partner and conjugating constants maps drift to partner drift
    x = random_states(4, seed=5)
    swapped = x[:, [2, 3, 0, 1]].conj()
    a = reduced_drift(x, PRM)
    b = reduced_drift(swapped, PRM)
    np.testing.assert_allclose(b[:, [2, 3, 0, 1]].conj(), a, atol=1e-13)


def test_reduced_diffusion_vacuum_and_symmetry():
    d = reduced_diffusion(np.zeros(4), PRM)
    z = 1j * PRM.kappa * PRM.cross_coupling
    assert d[0, 1] == pytest.approx(z) and d[1, 0] == pytest.approx(z)
    assert d[0, 0] == 0 and d[1, 1] == 0
    assert d[2, 3] == pytest.approx(np.conj(z))
    for x in random_states(10, seed=6):
        dd = reduced_diffusion(x, PRM)
        assert np.abs(dd - dd.T).max() == 0


def test_reduced_diffusion_scales_with_kappa():
    x = random_states(1, seed=8)[0]
    assert np.all(reduced_diffusion(x, PRM.replace(kappa=0.0)) == 0)
    np.testing.assert_allclose(reduced_diffusion(x, PRM.replace(kappa=2e-3)),
                               2 * reduced_diffusion(x, PRM), rtol=1e-14)


# ---------------------------------------------------------------- full model

def test_full_drift_trivial_cases():
    fp = FullParams(g=0.01, gamma_s=1.0, gamma1=1.0, gamma2=1.0, delta=0.5, pump1=0, pump2=0)
    assert np.all(full_drift(np.zeros(8), fp) == 0)
    fp0 = FullParams(g=0.0, gamma_s=1.0, gamma1=0.7, gamma2=1.3, delta=0.5, pump1=2 + 1j, pump2=1)
    x = random_states(3, 8, seed=9)
    a = full_drift(x, fp0)
    np.testing.assert_allclose(a[:, 0], fp0.pump1 - (fp0.gamma1 + 1j * fp0.delta) * x[:, 0])
    np.testing.assert_allclose(a[:, 1], fp0.pump2 - (fp0.gamma2 + 1j * fp0.delta) * x[:, 1])
    np.testing.assert_allclose(a[:, 2], -(fp0.gamma_s + 1j * fp0.delta) * x[:, 2])


def test_full_model_rests_at_pump_amplitude():
    fp = FullParams.from_reduced(PRM)
    x = reduced_to_full_state(np.zeros(4), PRM)
    assert np.abs(full_drift(x, fp)).max() < 1e-10 * pump_amplitude(PRM)


def test_full_signal_drift_matches_reduced():
    fp = FullParams.from_reduced(PRM, clamp_pumps=True)
    for beta in random_states(10, seed=10):
        a = full_drift(reduced_to_full_state(beta, PRM), fp)
        assert np.all(a[[0, 1, 4, 5]] == 0)
        np.testing.assert_allclose(full_to_reduced_state(a, PRM), reduced_drift(beta, PRM),
                                   rtol=1e-10, atol=1e-12)


def signal_block_in_reduced_units(d_full, params):
    # beta = sqrt(kappa) e^{-i psi} alpha, beta^+ = sqrt(kappa) e^{i psi} alpha^+
    s = math.sqrt(params.kappa)
    e = np.exp(-1j * params.psi)
    m = np.diag([s * e, s * e, s / e, s / e])
    sig = d_full[np.ix_([2, 3, 6, 7], [2, 3, 6, 7])]
    return m @ sig @ m.T


def test_full_diffusion_signal_block_matches_reduced():
    for beta in random_states(10, seed=11):
        x = reduced_to_full_state(beta, PRM)
        d_full = full_diffusion(x, PRM.kappa)
        np.testing.assert_allclose(signal_block_in_reduced_units(d_full, PRM),
                                   reduced_diffusion(beta, PRM), rtol=0, atol=1e-12)


def test_full_diffusion_structure():
    assert np.all(full_diffusion(np.zeros(8), 0.1) == 0)
    x = random_states(1, 8, seed=12)[0]
    d = full_diffusion(x, 0.1)
    assert np.all(d[:4, 4:] == 0)
    for blk in (d[:4, :4], d[4:, 4:]):
        assert np.abs(blk - blk.T).max() == 0
    assert d[2, 2] == pytest.approx(2j * 0.1 * 0.5 * x[2] ** 2)
    assert d[0, 1] == pytest.approx(2j * 0.1 * (2 * x[0] * x[1] + x[2] * x[3]))


def test_state_maps_roundtrip():
    beta = random_states(3, seed=13)
    np.testing.assert_allclose(full_to_reduced_state(reduced_to_full_state(beta, PRM), PRM), beta,
                               rtol=1e-14)


# ---------------------------------------------------------------- factorization

def test_factor_identity():
    b = factor_diffusion(np.eye(4, dtype=complex))
    np.testing.assert_allclose(b, np.eye(4), atol=1e-15)


def test_factor_vacuum_block():
    z = 1j * PRM.kappa * PRM.cross_coupling
    d = np.array([[0, z], [z, 0]])
    b = factor_diffusion(d)
    assert np.abs(b @ b.T - d).max() < 1e-12
    b4 = factor_diffusion(reduced_diffusion(np.zeros(4), PRM))
    assert np.abs(b4 @ b4.T - reduced_diffusion(np.zeros(4), PRM)).max() < 1e-12
    assert np.all(b4[:2, 2:] == 0) and np.all(b4[2:, :2] == 0)


def test_factor_random_reduced_states():
    for x in random_states(20, seed=14):
        d = reduced_diffusion(x, PRM)
        b = factor_diffusion(d)
        assert np.abs(d - b @ b.T).max() < 1e-10


def test_factor_random_full_states():
    for x in random_states(20, 8, seed=15):
        d = full_diffusion(x, 0.05)
        b = factor_diffusion(d)
        assert np.abs(d - b @ b.T).max() < 1e-10 * max(1.0, np.abs(d).max())


def test_factor_rank_deficient_and_zero():
    assert np.all(factor_diffusion(np.zeros((4, 4), dtype=complex)) == 0)
    v = np.array([1 + 1j, 2 - 0.5j, 0.3j, 1.0])
    d = np.outer(v, v)
    b = factor_diffusion(d)
    assert np.abs(b @ b.T - d).max() < 1e-12


def test_factor_rejects_asymmetric():
    d = np.eye(4, dtype=complex)
    d[0, 1] = 1.0
    with pytest.raises(FactorizationError):
        factor_diffusion(d)
    with pytest.raises(FactorizationError):
        factor_diffusion(np.ones((2, 3)))


def test_factor2_matches_multiply_back():
    rng = np.random.default_rng(16)
    cases = [(0j, 1 + 2j, 0j), (1e-20 + 0j, 1j, 0j), (1 + 0j, 0j, 0j), (0j, 0j, 2j)]
    for _ in range(50):
        x, y, z = rng.normal(size=3) + 1j * rng.normal(size=3)
        cases.append((x, y, z))
        cases.append((1e-3 * x, y, 1e-3 * z))
    for x, y, z in cases:
        b11, b12, b21, b22 = factor2(complex(x), complex(y), complex(z))
        b = np.array([[b11, b12], [b21, b22]])
        d = np.array([[x, y], [y, z]])
        assert np.abs(b @ b.T - d).max() < 1e-12 * max(1.0, np.abs(d).max())


# ---------------------------------------------------------------- random numbers

def test_philox_matches_numpy():
    for counter, key in [((0, 0, 0, 0), (0, 0)), ((5, 7, 11, 13), (123, 456)),
                         ((2 ** 63, 1, 2, 3), (2 ** 64 - 1, 9))]:
        bg = np.random.Philox(counter=np.array(counter, dtype=np.uint64), key=np.array(key, dtype=np.uint64))
        expected = bg.random_raw(4)
        c = [np.uint64(v) for v in counter]
        c[0] = c[0] + np.uint64(1)     # numpy increments before generating
        got = philox4x64(*c, np.uint64(key[0]), np.uint64(key[1]))
        assert [int(v) for v in got] == [int(v) for v in expected]


def test_standard_normals_reproducible_and_keyed():
    a = standard_normals(7, 3, 100, 8)
    assert np.array_equal(a, standard_normals(7, 3, 100, 8))
    assert not np.array_equal(a, standard_normals(7, 4, 100, 8))
    assert not np.array_equal(a, standard_normals(7, 3, 101, 8))
    assert not np.array_equal(a, standard_normals(8, 3, 100, 8))
    assert not np.array_equal(a, standard_normals(7, 3, 100, 8, tag=TAG_FULL))
    # shorter requests are prefixes
    assert np.array_equal(standard_normals(7, 3, 100, 6), a[:6])
    with pytest.raises(ValueError):
        standard_normals(-1, 0, 0, 4)


@njit(cache=True)
def _draws(seed, n_steps, out):
    for s in range(n_steps):
        z0, z1, z2, z3 = normal4(seed, 1, 0, s, 0)
        out[s, 0] = z0
        out[s, 1] = z1
        out[s, 2] = z2
        out[s, 3] = z3


def test_normal_covariance_over_a_million_draws():
    n = 250_000
    out = np.empty((n, 4))
    _draws(np.uint64(2024), n, out)
    z = out.reshape(-1, 4)
    assert z.size == 1_000_000
    mean = z.mean(axis=0)
    assert np.all(np.abs(mean) < 3 / math.sqrt(n))
    cov = np.cov(z, rowvar=False)
    for i in range(4):
        for j in range(4):
            se = math.sqrt(2.0 / n) if i == j else 1 / math.sqrt(n)
            assert abs(cov[i, j] - (i == j)) < 3 * se, (i, j, cov[i, j])
    # tails of a standard normal
    assert abs(np.mean(np.abs(z) > 2) - 0.0455) < 0.002


def test_tags_are_independent_streams():
    n = 20_000
    a = np.array([standard_normals(1, 0, s, 4, tag=TAG_REDUCED) for s in range(n // 4)]).ravel()
    b = np.array([standard_normals(1, 0, s, 4, tag=TAG_FULL) for s in range(n // 4)]).ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(n)
