import math

import numpy as np
import pytest
from scipy import integrate

from kerrsqueeze.errors import DomainError, InvalidParameterError
from kerrsqueeze.model import (ModePoint, PhysicalParams, ReducedParams, confocal_frequency,
                               coupling_constant, hermite_amplitudes, mode_value,
                               pump_parameter, quadrature, reduce, rescaling_phase, unreduce)


def physical(**kw):
    base = dict(chi3=1.0, crystal_length=1.0, waist=1.0, cavity_length=1.0, refractive_index=1.0,
                omega1=1.0, omega2=1.0, gamma_s=1.0, gamma1=1.0, gamma2=1.0,
                hbar=1.0, epsilon0=1.0, c=1.0)
    base.update(kw)
    return PhysicalParams(**base)


# ---------------------------------------------------------------- frequencies and constants

def test_confocal_frequency_examples():
    assert confocal_frequency(0, 0, math.pi, c=1.0) == pytest.approx(0.5)
    assert confocal_frequency(1, 0, 2.0, c=3.0) == pytest.approx(confocal_frequency(0, 2, 2.0, c=3.0))
    for q in range(6):
        lhs = 2 * confocal_frequency(q, 1, 1.0, c=1.0)
        rhs = confocal_frequency(q, 0, 1.0, c=1.0) + confocal_frequency(q + 1, 0, 1.0, c=1.0)
        assert lhs == pytest.approx(rhs, rel=1e-15)


def test_confocal_frequency_rejects_bad_length():
    with pytest.raises(InvalidParameterError):
        confocal_frequency(0, 0, 0.0)
    with pytest.raises(InvalidParameterError):
        confocal_frequency(-1, 0, 1.0)


def test_coupling_constant_unit_and_scaling():
    # F^2 = 1 with unit constants, so g = 6 eps0 l chi / (pi hbar w^2); chi = pi/6 gives 1
    pp = physical(chi3=math.pi / 6)
    assert coupling_constant(pp) == pytest.approx(1.0, rel=1e-14)
    assert coupling_constant(physical(chi3=math.pi / 6, waist=2.0)) == pytest.approx(0.25, rel=1e-14)
    assert coupling_constant(physical(chi3=math.pi / 6, crystal_length=2.0)) == pytest.approx(2.0, rel=1e-14)


def test_pump_parameter_examples():
    assert pump_parameter(physical(pump_power=0.0), 1) == 0.0
    e1 = pump_parameter(physical(pump_power=1.0), 1)
    e4 = pump_parameter(physical(pump_power=4.0), 1)
    assert e4 == pytest.approx(2 * e1)
    assert pump_parameter(physical(c=2.0, pump_power=1.0), 2) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        pump_parameter(physical(), 3)


def test_physical_params_validation():
    with pytest.raises(InvalidParameterError):
        physical(waist=-1.0)
    with pytest.raises(InvalidParameterError):
        physical(transmission=1.5)
    pp = physical(pump_power=(1.0, 2.0))
    assert pp.pump_power == (1.0, 2.0)


# ---------------------------------------------------------------- rescaling

def test_reduce_unit_example():
    rp = reduce(g=1.0, gamma_s=1.0, delta_phys=0.0, rho=1 / math.sqrt(2))
    assert rp.p == pytest.approx(1.0)
    assert rp.delta == 0.0 and rp.kappa == 1.0
    # at threshold the bright state needs 2 psi = pi/2
    assert rp.psi == pytest.approx(math.pi / 4, abs=1e-12)


def test_rescaling_phase_makes_bright_state_real():
    for p in (1.0, 1.2, 2.0, 10.0):
        psi = rescaling_phase(p)
        assert p * math.sin(2 * psi) == pytest.approx(1.0, abs=1e-12)
        assert p * math.cos(2 * psi) == pytest.approx(-math.sqrt(p * p - 1), abs=1e-12)


def test_rescaling_phase_monotone_limit():
    ps = np.geomspace(1.0, 1e6, 50)
    psis = np.array([rescaling_phase(p) for p in ps])
    assert np.all(np.diff(psis) > 0)
    assert psis[-1] == pytest.approx(math.pi / 2, abs=1e-6)


def test_reduce_below_threshold_raises():
    with pytest.raises(DomainError):
        reduce(g=1.0, gamma_s=1.0, delta_phys=0.0, rho=0.5)


def test_reduce_roundtrip():
    g, gs, dphys, rho = 2e-3, 0.5, 1.7, 30.0
    rp = reduce(g, gs, dphys, rho)
    g2, d2, rho_sq = unreduce(rp, gs)
    assert g2 == pytest.approx(g, rel=1e-15)
    assert d2 == pytest.approx(dphys, rel=1e-15)
    assert rho_sq == pytest.approx(rho * rho, rel=1e-14)


def test_reduced_params_validation_and_replace():
    with pytest.raises(InvalidParameterError):
        ReducedParams(p=-1.0, delta=1.0)
    with pytest.raises(InvalidParameterError):
        ReducedParams(p=1.2, delta=math.nan)
    rp = ReducedParams(1.2, 3.0)
    assert rp.psi == pytest.approx(rescaling_phase(1.2))
    assert rp.replace(p=1.5).psi == pytest.approx(rescaling_phase(1.5))
    assert rp.replace(kappa=0.5).psi == rp.psi
    assert abs(rp.cross_coupling) == pytest.approx(1.2)


# ---------------------------------------------------------------- modes

def test_laguerre_vanish_on_axis():
    for kind in ("laguerre+1", "laguerre-1"):
        assert mode_value(kind, ModePoint(0.0, 0.3), 1.0) == 0


def test_hermite_cos_lobe_peak():
    sigma = 0.4
    pt = ModePoint(1.0, sigma)
    hc = mode_value("hermite-c", pt, 1.0, sigma)
    lp = mode_value("laguerre+1", pt, 1.0)
    assert abs(hc) == pytest.approx(math.sqrt(2) * abs(lp), rel=1e-14)
    pt2 = ModePoint(0.7, sigma + 1.1)
    hc2 = mode_value("hermite-c", pt2, 1.0, sigma)
    lp2 = mode_value("laguerre+1", pt2, 1.0)
    assert abs(hc2) == pytest.approx(math.sqrt(2) * abs(lp2) * abs(math.cos(1.1)), rel=1e-13)


def _plane_integral(fun, waist=1.0):
    # r in waist units; area element waist^2 r dr dphi
    val, _ = integrate.dblquad(lambda r, phi: fun(r, phi) * r * waist ** 2,
                               0.0, 2 * math.pi, 0.0, 8.0, epsabs=1e-12, epsrel=1e-12)
    return val


def test_mode_normalization_quadrature():
    w = 1.3
    for kind in ("gauss", "laguerre+1", "hermite-s"):
        val = _plane_integral(lambda r, phi: abs(mode_value(kind, ModePoint(r, phi), w, 0.2)) ** 2, w)
        assert val == pytest.approx(1.0, abs=1e-8)


def test_hermite_modes_orthogonal():
    sigma = 0.7
    val = _plane_integral(lambda r, phi: (mode_value("hermite-c", ModePoint(r, phi), 1.0, sigma)
                                          * mode_value("hermite-s", ModePoint(r, phi), 1.0, sigma)).real)
    assert abs(val) < 1e-8


def test_mode_value_errors():
    with pytest.raises(InvalidParameterError):
        mode_value("tem22", ModePoint(1.0, 0.0), 1.0)
    with pytest.raises(InvalidParameterError):
        mode_value("gauss", ModePoint(1.0, 0.0), 0.0)
    with pytest.raises(InvalidParameterError):
        ModePoint(-1.0, 0.0)


def test_hermite_amplitudes_examples():
    mu = 0.8
    ac, as_ = hermite_amplitudes(mu, mu, 0.0)
    assert ac == pytest.approx(math.sqrt(2) * mu) and abs(as_) < 1e-15
    th = 0.37
    ac, as_ = hermite_amplitudes(mu * np.exp(-1j * th), mu * np.exp(1j * th), th)
    assert ac == pytest.approx(math.sqrt(2) * mu) and abs(as_) < 1e-15
    for sigma in (0.0, 1.0, -2.5):
        ac, as_ = hermite_amplitudes(1.0, 0.0, sigma)
        assert abs(ac) == pytest.approx(1 / math.sqrt(2)) and abs(as_) == pytest.approx(1 / math.sqrt(2))


def test_hermite_amplitudes_unitary():
    rng = np.random.default_rng(4)
    bp = rng.normal(size=100) + 1j * rng.normal(size=100)
    bm = rng.normal(size=100) + 1j * rng.normal(size=100)
    sigma = rng.uniform(-3, 3, size=100)
    ac, as_ = hermite_amplitudes(bp, bm, sigma)
    np.testing.assert_allclose(abs(ac) ** 2 + abs(as_) ** 2, abs(bp) ** 2 + abs(bm) ** 2, rtol=1e-13)


def test_hermite_partner_is_conjugate_map():
    rng = np.random.default_rng(5)
    bp, bm = rng.normal(size=2) + 1j * rng.normal(size=2)
    ac, as_ = hermite_amplitudes(bp, bm, 0.3)
    acp, asp = hermite_amplitudes(np.conj(bp), np.conj(bm), 0.3, partner=True)
    assert acp == pytest.approx(np.conj(ac)) and asp == pytest.approx(np.conj(as_))


def test_quadrature_examples():
    assert quadrature(1.0, 1.0, 0.0) == pytest.approx(2.0)
    assert quadrature(1j, -1j, math.pi / 2) == pytest.approx(2.0)
    a, ap = 0.3 + 0.2j, -0.1 + 0.5j
    assert quadrature(a, ap, 0.8 + math.pi) == pytest.approx(-quadrature(a, ap, 0.8))
