"""Classical limit of the reduced model: steady states, stability and an ODE integrator.

The classical equations follow from the Langevin ones by dropping the noise
and setting ``beta^+ = conj(beta)``::

    d beta_pm/dT = -[1 + i(delta - |beta_pm|^2 - 2|beta_mp|^2 - 2p)] beta_pm
                   + i p e^{-2 i psi} conj(beta_mp)

Nontrivial states are ``beta_pm = mu e^{i chi} e^{-+ i theta}``, with ``theta``
free (the rotational Goldstone direction).  ``chi`` vanishes on the plus branch
with the default rescaling phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DivergenceError, DomainError, InvalidParameterError
from .model import ReducedParams
from .stochastic.drift import drift_jacobian

STABILITY_TOL = 1e-9
KINDS = ("trivial", "nontrivial-plus", "nontrivial-minus")


@dataclass(frozen=True)
class ClassicalSteadyState:
    """Fixed point of the classical equations.

    ``phase`` is the common phase ``chi`` of both amplitudes; ``theta`` is the
    gauge angle of the representative (0 unless asked otherwise).
    """

    kind: str
    mu_sq: float
    theta: float
    phase: float
    eigenvalues: tuple
    stable: bool

    @property
    def mu(self) -> float:
        return math.sqrt(self.mu_sq)

    def beta(self, theta=None) -> tuple[complex, complex]:
        """Classical ``(beta_+, beta_-)`` at orientation ``theta``."""
        theta = self.theta if theta is None else theta
        m = self.mu
        return (m * complex(math.cos(self.phase - theta), math.sin(self.phase - theta)),
                m * complex(math.cos(self.phase + theta), math.sin(self.phase + theta)))

    def state(self, theta=None) -> np.ndarray:
        """Four-amplitude stochastic state ``[b+, b-, conj(b+), conj(b-)]``."""
        bp, bm = self.beta(theta)
        return np.array([bp, bm, bp.conjugate(), bm.conjugate()])


@dataclass(frozen=True)
class BifurcationPoint:
    """Pump values bounding the instability window of the trivial state."""

    p_minus: float
    p_plus: float


def trivial_eigenvalues(params: ReducedParams) -> tuple[complex, complex]:
    """``lambda_pm = -1 +- sqrt(p^2 - (delta - 2p)^2)`` of the trivial state."""
    disc = params.p ** 2 - (params.delta - 2 * params.p) ** 2
    root = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    return complex(-1 + root), complex(-1 - root)


def instability_window(delta: float) -> BifurcationPoint | None:
    """Pump range where the trivial state is unstable, or None if ``delta < sqrt(3)``."""
    disc = delta * delta - 3.0
    if -1e-12 < disc < 0:
        disc = 0.0      # rounding at delta = sqrt(3)
    if disc < 0:
        return None
    root = math.sqrt(disc)
    return BifurcationPoint((2 * delta - root) / 3.0, (2 * delta + root) / 3.0)


def existence_boundary(p: float) -> float:
    """Detuning ``2p - sqrt(p^2 - 1)`` above which the plus branch exists (``p >= 1``)."""
    if p < 1:
        raise DomainError(f"no nontrivial states for p = {p} < 1")
    return 2 * p - math.sqrt(p * p - 1)


def branch_mu_sq(params: ReducedParams, sign: int) -> float:
    """``(delta - 2p + sign sqrt(p^2 - 1)) / 3``; NaN when ``p < 1``."""
    p = params.p
    if p < 1:
        return math.nan
    return (params.delta - 2 * p + sign * math.sqrt(p * p - 1)) / 3.0


def _branch_phase(params: ReducedParams, sign: int) -> float:
    # the coupling phase 2(psi + chi) must equal pi - asin(1/p) (plus) or asin(1/p) (minus)
    a = math.asin(1.0 / params.p)
    target = math.pi - a if sign > 0 else a
    return 0.5 * (target - 2 * params.psi)


def _is_stable(eigs, goldstone):
    re = np.sort(np.real(eigs))[::-1]
    if goldstone:
        # drop the eigenvalue closest to zero
        i = int(np.argmin(np.abs(eigs)))
        if abs(eigs[i].real) >= STABILITY_TOL:
            return False
        re = np.delete(np.real(eigs), i)
    return bool(np.all(re < -STABILITY_TOL))


def _state_eigenvalues(params, state_vec):
    return np.linalg.eigvals(drift_jacobian(state_vec, params))


def steady_states(params: ReducedParams) -> list[ClassicalSteadyState]:
    """Trivial state plus every nontrivial branch with real positive ``mu^2``.

    At ``p = 1`` both branches coincide and only ``nontrivial-plus`` is returned.
    """
    zero = np.zeros(4, dtype=complex)
    eigs = _state_eigenvalues(params, zero)
    out = [ClassicalSteadyState("trivial", 0.0, 0.0, 0.0, tuple(eigs), _is_stable(eigs, False))]
    if params.p < 1:
        return out
    seen = []
    for sign, kind in ((1, "nontrivial-plus"), (-1, "nontrivial-minus")):
        mu_sq = branch_mu_sq(params, sign)
        if not mu_sq > 0 or any(abs(mu_sq - s) < 1e-14 for s in seen):
            continue
        seen.append(mu_sq)
        chi = _branch_phase(params, sign)
        probe = ClassicalSteadyState(kind, mu_sq, 0.0, chi, (), False)
        eigs = _state_eigenvalues(params, probe.state())
        out.append(ClassicalSteadyState(kind, mu_sq, 0.0, chi, tuple(eigs), _is_stable(eigs, True)))
    return out


def plus_state(params: ReducedParams) -> ClassicalSteadyState:
    """The plus-branch state, or DomainError if it does not exist."""
    for s in steady_states(params):
        if s.kind == "nontrivial-plus":
            return s
    raise DomainError(f"no plus-branch state at p = {params.p}, delta = {params.delta}")


def classical_field_amplitude(params: ReducedParams, branch: str = "plus") -> float:
    """Bright-mode amplitude ``sqrt(2 mu^2)`` multiplying ``H_c^theta``."""
    if branch != "plus":
        raise InvalidParameterError(f"only the plus branch is supported, got {branch!r}")
    mu_sq = branch_mu_sq(params, 1)
    if not mu_sq > 0:
        raise DomainError(f"no plus-branch state at p = {params.p}, delta = {params.delta}")
    return math.sqrt(2.0 * mu_sq)


def classical_rhs(beta, params: ReducedParams):
    """Right side of the classical equations for ``beta = (beta_+, beta_-)``."""
    bp, bm = beta[..., 0], beta[..., 1]
    pe = params.cross_coupling
    out = np.empty_like(np.asarray(beta, dtype=complex))
    np_, nm = abs(bp) ** 2, abs(bm) ** 2
    out[..., 0] = -(1 + 1j * (params.delta - np_ - 2 * nm - 2 * params.p)) * bp + 1j * pe * np.conj(bm)
    out[..., 1] = -(1 + 1j * (params.delta - nm - 2 * np_ - 2 * params.p)) * bm + 1j * pe * np.conj(bp)
    return out


@njit(cache=True)
def _rhs(bp, bm, delta, p, pe):
    np_ = bp.real * bp.real + bp.imag * bp.imag
    nm = bm.real * bm.real + bm.imag * bm.imag
    fp = -(1 + 1j * (delta - np_ - 2 * nm - 2 * p)) * bp + 1j * pe * bm.conjugate()
    fm = -(1 + 1j * (delta - nm - 2 * np_ - 2 * p)) * bm + 1j * pe * bp.conjugate()
    return fp, fm


@njit(cache=True)
def _rk4(bp, bm, delta, p, pe, dt, n_steps, stride, out):
    h = 0.5 * dt
    out[0, 0] = bp
    out[0, 1] = bm
    for n in range(1, n_steps + 1):
        k1p, k1m = _rhs(bp, bm, delta, p, pe)
        k2p, k2m = _rhs(bp + h * k1p, bm + h * k1m, delta, p, pe)
        k3p, k3m = _rhs(bp + h * k2p, bm + h * k2m, delta, p, pe)
        k4p, k4m = _rhs(bp + dt * k3p, bm + dt * k3m, delta, p, pe)
        bp = bp + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        bm = bm + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        if not (math.isfinite(bp.real) and math.isfinite(bp.imag)
                and math.isfinite(bm.real) and math.isfinite(bm.imag)):
            return n
        if n % stride == 0:
            out[n // stride, 0] = bp
            out[n // stride, 1] = bm
    return -1


def integrate_classical(params: ReducedParams, initial, t_end: float, dt: float = 1e-3,
                        record_stride: int = 1):
    """Fixed-step RK4 integration of the classical equations.

    Returns
    -------
    times : ndarray
    beta : ndarray, shape (n_samples, 2)
        ``(beta_+, beta_-)`` every ``record_stride`` steps, including ``T = 0``.

    Raises
    ------
    DivergenceError
        On a non-finite state, with the failure time attached.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt!r}")
    if not t_end >= 0:
        raise InvalidParameterError(f"t_end must be >= 0, got {t_end!r}")
    if record_stride < 1:
        raise InvalidParameterError("record_stride must be >= 1")
    n_steps = int(round(t_end / dt))
    out = np.empty((n_steps // record_stride + 1, 2), dtype=complex)
    bp, bm = (complex(x) for x in initial)
    fail = _rk4(bp, bm, params.delta, params.p, params.cross_coupling, dt, n_steps,
                record_stride, out)
    if fail >= 0:
        raise DivergenceError(f"classical trajectory diverged at T = {fail * dt:g}", time=fail * dt)
    times = np.arange(out.shape[0]) * dt * record_stride
    return times, out
