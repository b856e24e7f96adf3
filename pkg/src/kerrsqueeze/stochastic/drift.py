"""Drift vectors and diffusion matrices of the generalized-P Fokker-Planck equations.

Reduced model state layout (last axis)::

    [beta_+, beta_-, beta_+^+, beta_-^+]

Full model state layout::

    [alpha_1, alpha_2, alpha_+, alpha_-, alpha_1^+, alpha_2^+, alpha_+^+, alpha_-^+]

The ``^+`` amplitudes are independent stochastic variables, not complex
conjugates.  Every partner equation follows from the direct one by swapping
each amplitude with its partner and conjugating the constants.
All functions broadcast over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import ReducedParams


def reduced_drift(state, params: ReducedParams):
    """Deterministic part of the reduced Langevin equations, in units of ``gamma_s``."""
    state = np.asarray(state, dtype=complex)
    bp, bm, bpc, bmc = np.moveaxis(state, -1, 0)
    lin = 1.0 + 1j * params.delta
    pe = params.cross_coupling
    pec = pe.conjugate()
    two_p = 2.0 * params.p
    out = np.empty_like(state)
    out[..., 0] = -lin * bp + 1j * (bpc * bp + 2 * bmc * bm + two_p) * bp + 1j * pe * bmc
    out[..., 1] = -lin * bm + 1j * (bmc * bm + 2 * bpc * bp + two_p) * bm + 1j * pe * bpc
    out[..., 2] = -lin.conjugate() * bpc - 1j * (bp * bpc + 2 * bm * bmc + two_p) * bpc - 1j * pec * bm
    out[..., 3] = -lin.conjugate() * bmc - 1j * (bm * bmc + 2 * bp * bpc + two_p) * bmc - 1j * pec * bp
    return out


def drift_jacobian(state, params: ReducedParams) -> np.ndarray:
    """Analytic Jacobian ``dA_i / dbeta_j`` of :func:`reduced_drift` at one state."""
    bp, bm, bpc, bmc = np.asarray(state, dtype=complex)
    lin = 1.0 + 1j * params.delta
    pe = params.cross_coupling
    pec = pe.conjugate()
    two_p = 2.0 * params.p
    j = np.empty((4, 4), dtype=complex)
    j[0] = [-lin + 1j * (2 * bpc * bp + 2 * bmc * bm + two_p), 2j * bmc * bp,
            1j * bp * bp, 2j * bm * bp + 1j * pe]
    j[1] = [2j * bpc * bm, -lin + 1j * (2 * bmc * bm + 2 * bpc * bp + two_p),
            2j * bp * bm + 1j * pe, 1j * bm * bm]
    j[2] = [-1j * bpc * bpc, -2j * bmc * bpc - 1j * pec,
            -lin.conjugate() - 1j * (2 * bp * bpc + 2 * bm * bmc + two_p), -2j * bm * bpc]
    j[3] = [-2j * bpc * bmc - 1j * pec, -1j * bmc * bmc,
            -2j * bp * bmc, -lin.conjugate() - 1j * (2 * bm * bmc + 2 * bp * bpc + two_p)]
    return j


def reduced_diffusion(state, params: ReducedParams):
    """Block-diagonal 4x4 diffusion matrix of the rescaled reduced model."""
    state = np.asarray(state, dtype=complex)
    bp, bm, bpc, bmc = np.moveaxis(state, -1, 0)
    k = params.kappa
    pe = params.cross_coupling
    d = np.zeros(state.shape + (4,), dtype=complex)
    off = 1j * k * (2 * bp * bm + pe)
    d[..., 0, 0] = 1j * k * bp * bp
    d[..., 1, 1] = 1j * k * bm * bm
    d[..., 0, 1] = d[..., 1, 0] = off
    offc = -1j * k * (2 * bpc * bmc + pe.conjugate())
    d[..., 2, 2] = -1j * k * bpc * bpc
    d[..., 3, 3] = -1j * k * bmc * bmc
    d[..., 2, 3] = d[..., 3, 2] = offc
    return d


@dataclass(frozen=True)
class FullParams:
    """Physical-unit parameters of the eight-amplitude model.

    ``clamp_pumps`` freezes both pump amplitudes (and their partners) at the
    initial values, which turns the model into the reduced one expressed in
    unscaled variables.
    """

    g: float
    gamma_s: float
    gamma1: float
    gamma2: float
    delta: float
    pump1: complex
    pump2: complex
    clamp_pumps: bool = False

    @classmethod
    def from_reduced(cls, params: ReducedParams, gamma_s=1.0, gamma_pump=1.0, clamp_pumps=False):
        """Physical parameters whose pumps rest at ``rho = sqrt(p / 2 kappa)`` with no signal.

        Time is then measured in units of ``1/gamma_s``.
        """
        g = params.kappa * gamma_s
        delta = params.delta * gamma_s
        rho = pump_amplitude(params)
        # A_alpha1 = 0 at alpha_1 = alpha_2 = rho, zero signal
        e = (gamma_pump + 1j * delta) * rho - 6j * g * rho ** 3
        return cls(g=g, gamma_s=gamma_s, gamma1=gamma_pump, gamma2=gamma_pump, delta=delta,
                   pump1=e, pump2=e, clamp_pumps=clamp_pumps)

    def as_dict(self) -> dict:
        return {"g": self.g, "gamma_s": self.gamma_s, "gamma1": self.gamma1,
                "gamma2": self.gamma2, "delta": self.delta,
                "pump1": [self.pump1.real, self.pump1.imag],
                "pump2": [self.pump2.real, self.pump2.imag],
                "clamp_pumps": self.clamp_pumps}


def pump_amplitude(params: ReducedParams) -> float:
    return math.sqrt(params.p / (2.0 * params.kappa))


def reduced_to_full_state(beta, params: ReducedParams, rho=None):
    """Embed reduced amplitudes into the full layout with real pumps ``rho``."""
    beta = np.asarray(beta, dtype=complex)
    rho = pump_amplitude(params) if rho is None else rho
    scale = 1.0 / math.sqrt(params.kappa)
    rot = complex(math.cos(params.psi), math.sin(params.psi))
    out = np.empty(beta.shape[:-1] + (8,), dtype=complex)
    out[..., 0] = out[..., 1] = out[..., 4] = out[..., 5] = rho
    out[..., 2] = beta[..., 0] * rot * scale
    out[..., 3] = beta[..., 1] * rot * scale
    out[..., 6] = beta[..., 2] / rot * scale
    out[..., 7] = beta[..., 3] / rot * scale
    return out


def full_to_reduced_state(alpha, params: ReducedParams):
    """Signal amplitudes of a full-model state in the rescaled reduced variables."""
    alpha = np.asarray(alpha, dtype=complex)
    scale = math.sqrt(params.kappa)
    rot = complex(math.cos(params.psi), -math.sin(params.psi))
    out = np.empty(alpha.shape[:-1] + (4,), dtype=complex)
    out[..., 0] = alpha[..., 2] * rot * scale
    out[..., 1] = alpha[..., 3] * rot * scale
    out[..., 2] = alpha[..., 6] / rot * scale
    out[..., 3] = alpha[..., 7] / rot * scale
    return out


def _full_half(a1, a2, ap, am, c1, c2, cp, cm, e1, e2, fp: FullParams, s):
    # s = +1: equations for (a1, a2, ap, am); s = -1 gives the partner set
    ig = s * 1j * fp.g
    idel = s * 1j * fp.delta
    d1 = e1 - (fp.gamma1 + idel) * a1 + 4 * ig * c2 * a2 * a1 \
        + 2 * ig * (c1 * a1 * a1 + cp * ap * a1 + cm * am * a1 + c2 * ap * am)
    d2 = e2 - (fp.gamma2 + idel) * a2 + 4 * ig * c1 * a1 * a2 \
        + 2 * ig * (c2 * a2 * a2 + cp * ap * a2 + cm * am * a2 + c1 * ap * am)
    dp = -(fp.gamma_s + idel) * ap + ig * cp * ap * ap \
        + 2 * ig * (cm * am * ap + c1 * a1 * ap + c2 * a2 * ap + cm * a1 * a2)
    dm = -(fp.gamma_s + idel) * am + ig * cm * am * am \
        + 2 * ig * (cp * ap * am + c1 * a1 * am + c2 * a2 * am + cp * a1 * a2)
    return d1, d2, dp, dm


def full_drift(state, fp: FullParams):
    """Drift of the eight-amplitude model (physical time units).

    Pump components are zeroed when ``fp.clamp_pumps`` is set.
    """
    state = np.asarray(state, dtype=complex)
    a = np.moveaxis(state, -1, 0)
    out = np.empty_like(state)
    e1, e2 = complex(fp.pump1), complex(fp.pump2)
    direct = _full_half(*a[:4], *a[4:], e1, e2, fp, 1)
    partner = _full_half(*a[4:], *a[:4], e1.conjugate(), e2.conjugate(), fp, -1)
    for i in range(4):
        out[..., i] = direct[i]
        out[..., 4 + i] = partner[i]
    if fp.clamp_pumps:
        out[..., [0, 1, 4, 5]] = 0.0
    return out


def _dlan_block(a1, a2, ap, am):
    shape = np.shape(a1) + (4, 4)
    d = np.zeros(shape, dtype=complex)
    d[..., 0, 0] = a1 * a1
    d[..., 1, 1] = a2 * a2
    d[..., 2, 2] = 0.5 * ap * ap
    d[..., 3, 3] = 0.5 * am * am
    d[..., 0, 1] = d[..., 1, 0] = 2 * a1 * a2 + ap * am
    d[..., 0, 2] = d[..., 2, 0] = a1 * ap
    d[..., 0, 3] = d[..., 3, 0] = a1 * am
    d[..., 1, 2] = d[..., 2, 1] = a2 * ap
    d[..., 1, 3] = d[..., 3, 1] = a2 * am
    d[..., 2, 3] = d[..., 3, 2] = a1 * a2 + ap * am
    return d


def full_diffusion(state, g: float):
    """8x8 diffusion matrix ``2 i g diag(D^-, -D^+)`` of the full model."""
    state = np.asarray(state, dtype=complex)
    a = np.moveaxis(state, -1, 0)
    d = np.zeros(state.shape + (8,), dtype=complex)
    d[..., :4, :4] = 2j * g * _dlan_block(*a[:4])
    d[..., 4:, 4:] = -2j * g * _dlan_block(*a[4:])
    return d
