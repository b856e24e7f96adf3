"""Parameters, rescaling and transverse modes of the two-pump Kerr cavity.

The signal field lives in the pair of first-order Laguerre-Gauss modes
``L_{+1}``, ``L_{-1}``.  Equivalently it can be expanded on a pair of
Hermite-Gauss (TEM10) modes oriented at ``sigma`` and ``sigma + pi/2``; the
basis change between the two descriptions is implemented here and applied
both to mode functions and to (stochastic) mode amplitudes.

Dimensionless conventions
-------------------------
Time is measured in units of the signal decay rate, ``T = gamma_s t``.  The
signal amplitudes are rescaled as ``beta = sqrt(g/gamma_s) alpha exp(-i psi)``
(and ``beta_plus = sqrt(g/gamma_s) alpha_plus exp(+i psi)`` for the
generalized-P partner), which leaves four numbers:

    p     = 2 (g/gamma_s) rho**2      pump strength
    delta = detuning / gamma_s
    kappa = g / gamma_s
    psi   = phase making the bright state satisfy beta_- = conj(beta_+)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import DomainError, InvalidParameterError

SQRT2 = math.sqrt(2.0)

MODE_KINDS = ("gauss", "laguerre+1", "laguerre-1", "hermite-c", "hermite-s")


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory description of the cavity (SI units).

    ``pump_power`` and ``transmission`` accept either one value shared by
    both pumps or a pair ``(pump 1, pump 2)``.
    """

    chi3: float
    crystal_length: float
    waist: float
    cavity_length: float
    refractive_index: float
    omega1: float
    omega2: float
    gamma_s: float
    gamma1: float
    gamma2: float
    transmission: float | tuple[float, float] = 1.0
    pump_power: float | tuple[float, float] = 0.0
    hbar: float = constants.hbar
    epsilon0: float = constants.epsilon_0
    c: float = constants.c

    def __post_init__(self):
        for name in ("crystal_length", "waist", "cavity_length", "refractive_index",
                     "omega1", "omega2", "gamma_s", "gamma1", "gamma2",
                     "hbar", "epsilon0", "c"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")
        object.__setattr__(self, "transmission", _pair(self.transmission, "transmission"))
        object.__setattr__(self, "pump_power", _pair(self.pump_power, "pump_power"))
        if any(t < 0 or t > 1 for t in self.transmission):
            raise InvalidParameterError(f"transmission must lie in [0, 1], got {self.transmission}")
        if any(pw < 0 for pw in self.pump_power):
            raise InvalidParameterError(f"pump_power must be >= 0, got {self.pump_power}")

    @property
    def omega_s(self) -> float:
        return 0.5 * (self.omega1 + self.omega2)


def _pair(value, name):
    if np.ndim(value) == 0:
        value = (float(value), float(value))
    if len(value) != 2:
        raise InvalidParameterError(f"{name} must be a scalar or a pair")
    return (float(value[0]), float(value[1]))


def rescaling_phase(p: float) -> float:
    """Phase ``psi`` of the amplitude rescaling for pump strength ``p``.

    The bright (plus-branch) steady state is real, ``beta_+ = beta_- = mu``,
    only if ``p sin(2 psi) = 1`` and ``p cos(2 psi) = -sqrt(p**2 - 1)``.  This
    picks ``2 psi = pi - arcsin(1/p)``, in ``[pi/2, pi)``.
    """
    if 1.0 - 1e-12 <= p < 1.0:
        p = 1.0     # rounding at threshold
    if not p >= 1.0:
        raise DomainError(f"no real rescaling phase below threshold: p = {p} < 1")
    return 0.5 * (math.pi - math.asin(1.0 / p))


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless parameters of the reduced (undepleted pump) model.

    ``psi`` defaults to :func:`rescaling_phase`.  Below ``p = 1`` only the
    trivial state exists, whose spectrum does not depend on ``psi``; the
    default there is ``pi/4`` (the ``p -> 1`` limit).
    """

    p: float
    delta: float
    kappa: float = 1e-3
    psi: float | None = field(default=None)

    def __post_init__(self):
        if not (np.isfinite(self.p) and self.p >= 0):
            raise InvalidParameterError(f"p must be >= 0, got {self.p!r}")
        if not np.isfinite(self.delta):
            raise InvalidParameterError(f"delta must be finite, got {self.delta!r}")
        # kappa = 0 is accepted as the noiseless limit
        if not (np.isfinite(self.kappa) and self.kappa >= 0):
            raise InvalidParameterError(f"kappa must be >= 0, got {self.kappa!r}")
        if self.psi is None:
            psi = rescaling_phase(self.p) if self.p >= 1 else 0.25 * math.pi
            object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "psi", float(self.psi))

    @property
    def cross_coupling(self) -> complex:
        """``p exp(-2 i psi)``, the coefficient coupling ``beta_+`` to ``beta_-^+``."""
        return self.p * complex(math.cos(2 * self.psi), -math.sin(2 * self.psi))

    def replace(self, **changes) -> "ReducedParams":
        values = dict(p=self.p, delta=self.delta, kappa=self.kappa, psi=self.psi)
        if "p" in changes and "psi" not in changes:
            values["psi"] = None
        values.update(changes)
        return ReducedParams(**values)

    def as_dict(self) -> dict:
        return {"p": self.p, "delta": self.delta, "kappa": self.kappa, "psi": self.psi}


@dataclass(frozen=True)
class ModePoint:
    """Transverse position; ``r`` is in units of the beam waist."""

    r: float
    phi: float

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidParameterError(f"r must be >= 0, got {self.r!r}")


def confocal_frequency(q: int, f: int, cavity_length: float, c: float = constants.c) -> float:
    """Resonance of longitudinal mode ``q`` in transverse family ``f`` of a confocal cavity."""
    if q < 0 or f < 0:
        raise InvalidParameterError("mode indices must be non-negative")
    if not cavity_length > 0:
        raise InvalidParameterError(f"cavity_length must be > 0, got {cavity_length!r}")
    return math.pi * c / cavity_length * (q + 0.5 * (1 + f))


def mode_normalization_sq(params: PhysicalParams, omega: float | None = None) -> float:
    """Single-photon field amplitude squared, ``hbar omega / (eps0 n L)``."""
    omega = params.omega_s if omega is None else omega
    return params.hbar * omega / (params.epsilon0 * params.refractive_index * params.cavity_length)


def coupling_constant(params: PhysicalParams) -> float:
    """Nonlinear coupling ``g`` (1/s), single-waist equal-frequency approximation."""
    f2 = mode_normalization_sq(params)
    return (6.0 * f2 * f2 * params.epsilon0 * params.crystal_length * params.chi3
            / (math.pi * params.hbar * params.waist ** 2))


def pump_parameter(params: PhysicalParams, which: int) -> float:
    """External injection rate ``E_j`` of pump ``which`` (1 or 2), in 1/s."""
    if which not in (1, 2):
        raise InvalidParameterError(f"pump index must be 1 or 2, got {which!r}")
    omega = params.omega1 if which == 1 else params.omega2
    t = params.transmission[which - 1]
    power = params.pump_power[which - 1]
    return math.sqrt(params.c * t * power / (2.0 * omega * params.hbar * params.cavity_length))


def reduce(g: float, gamma_s: float, delta_phys: float, rho: float) -> ReducedParams:
    """Rescale physical reduced-model quantities to ``(p, delta, kappa, psi)``.

    ``rho`` is the (real) intracavity pump amplitude, common to both pumps.
    """
    if not g > 0:
        raise InvalidParameterError(f"g must be > 0, got {g!r}")
    if not gamma_s > 0:
        raise InvalidParameterError(f"gamma_s must be > 0, got {gamma_s!r}")
    kappa = g / gamma_s
    p = 2.0 * kappa * rho * rho
    psi = rescaling_phase(p)
    return ReducedParams(p=p, delta=delta_phys / gamma_s, kappa=kappa, psi=psi)


def unreduce(params: ReducedParams, gamma_s: float) -> tuple[float, float, float]:
    """Inverse of :func:`reduce`: returns ``(g, delta_phys, rho**2)``."""
    g = params.kappa * gamma_s
    return g, params.delta * gamma_s, params.p / (2.0 * params.kappa)


def mode_value(kind: str, point: ModePoint, waist: float, sigma: float = 0.0) -> complex:
    """Normalized transverse amplitude of a cavity mode at ``point``.

    ``kind`` is one of ``MODE_KINDS``; ``sigma`` orients the Hermite-Gauss
    modes.  The result has units of 1/length (same length unit as ``waist``).
    """
    if not waist > 0:
        raise InvalidParameterError(f"waist must be > 0, got {waist!r}")
    r = point.r
    envelope = math.exp(-r * r)
    if kind == "gauss":
        return complex(math.sqrt(2.0 / math.pi) / waist * envelope)
    radial = 2.0 / math.sqrt(math.pi) * r / waist * envelope
    lp = radial * complex(math.cos(point.phi), math.sin(point.phi))
    lm = radial * complex(math.cos(point.phi), -math.sin(point.phi))
    if kind == "laguerre+1":
        return lp
    if kind == "laguerre-1":
        return lm
    rot = complex(math.cos(sigma), -math.sin(sigma))   # exp(-i sigma)
    if kind == "hermite-c":
        return (rot * lp + rot.conjugate() * lm) / SQRT2
    if kind == "hermite-s":
        return (rot * lp - rot.conjugate() * lm) / (1j * SQRT2)
    raise InvalidParameterError(f"unknown mode kind {kind!r}; expected one of {MODE_KINDS}")


def hermite_amplitudes(beta_plus, beta_minus, sigma, partner=False):
    """Bright/dark (cos/sin) Hermite-Gauss amplitudes from the Laguerre pair.

    With ``partner=False`` returns ``(a_c, a_s)``::

        a_c = (e^{i sigma} beta_+ + e^{-i sigma} beta_-) / sqrt(2)
        a_s = i (e^{i sigma} beta_+ - e^{-i sigma} beta_-) / sqrt(2)

    With ``partner=True`` the inputs are the generalized-P partners
    ``beta_+^+, beta_-^+`` and the conjugate combinations ``(a_c^+, a_s^+)``
    are returned.  ``sigma`` may be complex (a stochastic frame angle).
    Works elementwise on arrays.
    """
    e = np.exp(1j * np.asarray(sigma))
    if not partner:
        u, v = e * beta_plus, beta_minus / e
        return (u + v) / SQRT2, 1j * (u - v) / SQRT2
    u, v = beta_plus / e, e * beta_minus
    return (u + v) / SQRT2, -1j * (u - v) / SQRT2


def quadrature(a, a_plus, phase):
    """Field quadrature ``e^{-i phase} a + e^{i phase} a_plus``."""
    e = np.exp(1j * np.asarray(phase))
    return a / e + e * a_plus
