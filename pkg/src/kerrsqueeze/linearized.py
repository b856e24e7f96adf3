"""Linearized fluctuations around the bright (plus-branch) steady state.

Fluctuations are written in the co-rotating frame
``beta_pm = e^{i chi} (mu + b_pm) e^{-+ i theta}`` (partners conjugate phases),
so the linear operator ``L`` does not depend on ``theta``.  Its spectrum is
``{0, -2, lambda_2, -2 - lambda_2}``: the zero mode is the orientation
(Goldstone) direction, the ``-2`` mode the perfectly squeezed one.

Eigenvectors follow the normalization ``v0 = col(-1, 1, 1, -1) / N0`` and
``v1 = col(e^{i phi0}, -e^{i phi0}, e^{-i phi0}, -e^{-i phi0}) / N0`` with
``N0 = -4 cos(phi0)``; the left vectors are then fixed by ``w_m^* . v_n = delta_mn``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .classical import ClassicalSteadyState, plus_state
from .errors import DegeneracyError, DomainError, FactorizationError, InconsistencyError
from .model import ReducedParams
from .stochastic.drift import drift_jacobian, reduced_diffusion

COND_LIMIT = 1e12
ROUTE_TOL = 1e-9
EIG_GAP = 1e-7


@dataclass
class SpectrumResult:
    """Noise spectrum ``V_out`` on a non-negative frequency grid."""

    omega: np.ndarray
    v_out: np.ndarray
    quadrature_phase: float
    mode: str = "dark"
    source: str = "analytic"
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"omega": np.asarray(self.omega).tolist(), "v_out": np.asarray(self.v_out).tolist(),
                "stderr": None if self.stderr is None else np.asarray(self.stderr).tolist(),
                "quadrature_phase": self.quadrature_phase, "mode": self.mode,
                "source": self.source, "metadata": self.metadata}


@dataclass
class LinearAnalysis:
    params: ReducedParams
    state: ClassicalSteadyState
    theta: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    right_vectors: np.ndarray      # columns v_0..v_3
    left_vectors: np.ndarray       # columns w_0..w_3
    n0: float
    phi0: float
    d_bar: np.ndarray
    b_bar: np.ndarray
    k_matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def mu(self) -> float:
        return self.state.mu

    def biorthonormality_residual(self) -> float:
        g = self.left_vectors.conj().T @ self.right_vectors
        return float(np.abs(g - np.eye(4)).max())


def _require_nontrivial(state):
    if state.kind == "trivial":
        raise DomainError("the trivial state has no Goldstone structure; use trivial_eigenvalues")


def k_matrix(state: ClassicalSteadyState, theta: float | None = None) -> np.ndarray:
    """Diagonal co-rotation matrix ``diag(e^{i(theta-chi)}, e^{-i(theta+chi)}, c.c.)``."""
    theta = state.theta if theta is None else theta
    chi = state.phase
    e = [cmath.exp(1j * (theta - chi)), cmath.exp(-1j * (theta + chi))]
    return np.diag([e[0], e[1], e[0].conjugate(), e[1].conjugate()])


def jacobian(params: ReducedParams, state: ClassicalSteadyState, theta: float = 0.0) -> np.ndarray:
    """Jacobian of the reduced drift in the co-rotating fluctuation variables.

    Built as ``K J K^{-1}`` from the drift Jacobian ``J`` at ``beta(theta)``;
    the result does not depend on ``theta``.
    """
    _require_nontrivial(state)
    k = k_matrix(state, theta)
    j = drift_jacobian(state.state(theta), params)
    return k @ j @ k.conj()


def _order(eigs):
    rest = list(range(4))
    i0 = min(rest, key=lambda i: abs(eigs[i]))
    rest.remove(i0)
    i1 = min(rest, key=lambda i: abs(eigs[i] + 2))
    rest.remove(i1)
    a, b = rest
    if abs(eigs[a].imag - eigs[b].imag) < 1e-12:
        pair = sorted(rest, key=lambda i: -eigs[i].real)
    else:
        pair = sorted(rest, key=lambda i: eigs[i].imag)
    return [i0, i1] + pair


def _phi0_from_v1(v1):
    # v1 entries are proportional to (e^{i phi0}, -e^{i phi0}, e^{-i phi0}, -e^{-i phi0})
    phi0 = 0.5 * cmath.phase(v1[0] / v1[2])
    if phi0 <= -0.5 * math.pi:
        phi0 += math.pi
    return phi0


def eigensystem(jac) -> dict:
    """Labeled, biorthonormal eigensystem of a linearized operator.

    ``lambda_0`` is the eigenvalue of smallest modulus, ``lambda_1`` the one
    nearest ``-2``; the remaining pair is ordered by imaginary part.  Right
    vectors of the first two follow the ``N0`` normalization; the others
    have unit norm.

    Returns a dict with ``eigenvalues``, ``right_vectors``, ``left_vectors``
    (columns), ``phi0`` and ``n0``.

    Raises
    ------
    DegeneracyError
        If two eigenvalues coincide or the eigenvector matrix is numerically
        defective (as at the saddle-node p = 1).
    """
    jac = np.asarray(jac, dtype=complex)
    eigs, vl, vr = scipy.linalg.eig(jac, left=True, right=True)
    gap = min(abs(eigs[i] - eigs[j]) for i in range(4) for j in range(i + 1, 4))
    if gap < EIG_GAP:
        raise DegeneracyError(f"coincident eigenvalues (gap {gap:.2e}); eigenbasis is ill-defined")
    cond = np.linalg.cond(vr)
    if not cond < COND_LIMIT:
        raise DegeneracyError(f"eigenvector matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    idx = _order(eigs)
    eigs, vl, vr = eigs[idx], vl[:, idx], vr[:, idx]
    phi0 = _phi0_from_v1(vr[:, 1])
    cos0 = math.cos(phi0)
    if abs(cos0) < 1e-12:
        raise DegeneracyError("cos(phi0) vanishes; N0 normalization is degenerate")
    n0 = -4.0 * cos0
    vr = vr.copy()
    vr[:, 0] *= (1.0 / n0) / vr[1, 0]
    vr[:, 1] *= (cmath.exp(1j * phi0) / n0) / vr[0, 1]
    for m in (2, 3):
        vr[:, m] /= np.linalg.norm(vr[:, m])
    vl = vl.copy()
    for m in range(4):
        s = np.vdot(vl[:, m], vr[:, m])
        vl[:, m] /= np.conj(s)
    return {"eigenvalues": eigs, "right_vectors": vr, "left_vectors": vl, "phi0": phi0, "n0": n0}


def phi0_closed_forms(params: ReducedParams, state: ClassicalSteadyState) -> dict:
    """Closed-form expressions for ``e^{2 i phi0}`` and their diagnostics.

    ``verbatim`` uses the numerator ``mu^2 + p e^{-i psi}``; ``corrected`` uses
    ``mu^2 + p e^{-2 i psi}`` (the phase carried by every coupling term), which
    reproduces the eigenvector.
    """
    mu2, p, psi, delta = state.mu_sq, params.p, params.psi, params.delta
    den = 2 * (mu2 + p) - (delta + 1j)
    verbatim = (mu2 + p * cmath.exp(-1j * psi)) / den
    corrected = (mu2 + p * cmath.exp(-2j * psi)) / den
    return {"verbatim": verbatim, "corrected": corrected,
            "verbatim_modulus": abs(verbatim), "corrected_modulus": abs(corrected),
            "verbatim_phi0": 0.5 * cmath.phase(verbatim), "corrected_phi0": 0.5 * cmath.phase(corrected)}


def _wrap_half_pi(x):
    # distance modulo pi
    return abs((x + 0.5 * math.pi) % math.pi - 0.5 * math.pi)


def phi0_and_n0(params: ReducedParams, state: ClassicalSteadyState | None = None):
    """``(phi0, N0)`` from the numerical ``v1``, plus closed-form diagnostics.

    Returns
    -------
    phi0 : float
        In ``(-pi/2, pi/2]``.
    n0 : float
        ``-4 cos(phi0)``.
    diagnostics : dict
        Closed-form values and their discrepancy with the eigenvector phase.
    """
    state = plus_state(params) if state is None else state
    es = eigensystem(jacobian(params, state))
    diag = phi0_closed_forms(params, state)
    diag["verbatim_discrepancy"] = _wrap_half_pi(diag["verbatim_phi0"] - es["phi0"])
    diag["corrected_discrepancy"] = _wrap_half_pi(diag["corrected_phi0"] - es["phi0"])
    return es["phi0"], es["n0"], diag


def noise_coefficients(params: ReducedParams, state: ClassicalSteadyState):
    """``(a, b, c, d)`` of the steady-state noise matrix with ``b = 0``."""
    _require_nontrivial(state)
    k = params.kappa
    mu2 = state.mu_sq
    off = 1j * k * (2 * mu2 + params.cross_coupling * cmath.exp(-2j * state.phase))
    a = cmath.sqrt(1j * k * mu2)
    if a == 0:
        return 0j, 0j, 0j, 0j
    c = off / a
    d = cmath.sqrt(1j * k * mu2 - c * c)
    return a, 0j, c, d


def noise_matrices(params: ReducedParams, state: ClassicalSteadyState, theta: float = 0.0):
    """Steady-state diffusion ``D_bar`` and noise matrix ``B_bar`` at orientation ``theta``.

    ``B_bar`` has rows ``(a, b) e^{i(chi-theta)}`` and ``(c, d) e^{i(chi+theta)}``
    in the direct block and the complex conjugate in the partner block.
    """
    d_bar = reduced_diffusion(state.state(theta), params)
    a, b, c, d = noise_coefficients(params, state)
    ep = cmath.exp(1j * (state.phase - theta))
    em = cmath.exp(1j * (state.phase + theta))
    blk = np.array([[a * ep, b * ep], [c * em, d * em]])
    b_bar = np.zeros((4, 4), dtype=complex)
    b_bar[:2, :2] = blk
    b_bar[2:, 2:] = blk.conj()
    scale = max(float(np.abs(d_bar).max()), 1e-300)
    resid = float(np.abs(b_bar @ b_bar.T - d_bar).max())
    if resid > 1e-10 * max(scale, 1.0):
        raise FactorizationError(f"steady-state factorization residual {resid:.3e}")
    return d_bar, b_bar


def analyze(params: ReducedParams, theta: float = 0.0, state: ClassicalSteadyState | None = None) -> LinearAnalysis:
    """Full linear analysis of the plus-branch state at orientation ``theta``."""
    state = plus_state(params) if state is None else state
    jac = jacobian(params, state, theta)
    es = eigensystem(jac)
    d_bar, b_bar = noise_matrices(params, state, theta)
    diag = phi0_closed_forms(params, state)
    diag["verbatim_discrepancy"] = _wrap_half_pi(diag["verbatim_phi0"] - es["phi0"])
    diag["corrected_discrepancy"] = _wrap_half_pi(diag["corrected_phi0"] - es["phi0"])
    out = LinearAnalysis(params=params, state=state, theta=theta, jacobian=jac,
                         eigenvalues=es["eigenvalues"], right_vectors=es["right_vectors"],
                         left_vectors=es["left_vectors"], n0=es["n0"], phi0=es["phi0"],
                         d_bar=d_bar, b_bar=b_bar, k_matrix=k_matrix(state, theta), diagnostics=diag)
    diag["biorthonormality_residual"] = out.biorthonormality_residual()
    return out


def kd_contraction(analysis: LinearAnalysis, which: str = "w1") -> complex:
    """Quadratic form ``w^* . (K D_bar K) . w^*`` for ``w0`` or ``w1``."""
    col = {"w0": 0, "w1": 1}.get(which)
    if col is None:
        raise ValueError(f"which must be 'w0' or 'w1', got {which!r}")
    wc = analysis.left_vectors[:, col].conj()
    k = analysis.k_matrix
    return complex(wc @ k @ analysis.d_bar @ k @ wc)


def diffusion_closed_form(params: ReducedParams, mu_sq: float, phi0: float) -> float:
    """``kappa [mu^2 sin 2phi0 + p sin 2(phi0 + psi)] / (4 mu^2 cos^2 phi0)``."""
    num = mu_sq * math.sin(2 * phi0) + params.p * math.sin(2 * (phi0 + params.psi))
    return params.kappa * num / (4 * mu_sq * math.cos(phi0) ** 2)


def diffusion_constant(params: ReducedParams, state: ClassicalSteadyState | None = None,
                       analysis: LinearAnalysis | None = None) -> float:
    """Orientation diffusion constant ``d_theta``.

    Evaluated both by projection, ``-w0^* K D K w0^* / (N0^2 mu^2)``, and by the
    closed form at the eigenvector ``phi0``; the projection value is returned.

    Raises
    ------
    InconsistencyError
        If the two routes differ by more than ``1e-9`` relative.
    """
    if analysis is None:
        analysis = analyze(params, state=state)
    proj = -kd_contraction(analysis, "w0") / (analysis.n0 ** 2 * analysis.state.mu_sq)
    closed = diffusion_closed_form(params, analysis.state.mu_sq, analysis.phi0)
    scale = max(abs(proj), abs(closed), 1e-300)
    if abs(proj - closed) > ROUTE_TOL * scale or abs(proj.imag) > ROUTE_TOL * scale:
        raise InconsistencyError("projection and closed-form d_theta disagree",
                                 values={"projection": proj, "closed_form": closed})
    return float(proj.real)


def c1_spectrum(kappa: float, omega):
    """Correlation spectrum of the squeezed projection, ``-kappa / (4 + omega^2)``.

    This normalization is the one entering ``V_out(omega; pi/2) = 1 + 4 C1(omega) / kappa``;
    the plain Fourier transform of ``<c1(T) c1(T+tau)>`` is four times larger.
    """
    omega = np.asarray(omega, dtype=float)
    return -kappa / (4.0 + omega * omega)


def _lorentzian(omega):
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (1.0 + 0.25 * omega * omega)


def analytic_vout(params: ReducedParams, phi: float, omega_grid, state=None, phi0=None,
                  form: str = "closed") -> SpectrumResult:
    """Dark-mode noise spectrum of the quadrature at phase ``phi``.

    ``form="closed"`` evaluates

        [cos^2 phi + sin^2(phi - phi0)] / cos^2 phi0 - sin^2(phi - phi0) / cos^2 phi0 * L(omega)

    with ``L = 1 / (1 + (omega/2)^2)``.  ``form="gauge"`` gives
    ``1 - sin^2(phi - phi0) / cos^2 phi0 * L(omega)``, the spectrum of the
    quadrature measured in the frame that carries the Goldstone projection
    (the estimator convention); that frame is not a homodyne observable, so
    this form may dip below zero.  Both coincide at ``phi = pi/2`` and ``phi = phi0``.
    """
    if phi0 is None:
        state = plus_state(params) if state is None else state
        phi0, _, _ = phi0_and_n0(params, state)
    c2 = math.cos(phi0) ** 2
    if c2 < 1e-24:
        raise DegeneracyError("cos(phi0) vanishes; spectrum normalization is degenerate")
    omega = np.asarray(omega_grid, dtype=float)
    s2 = math.sin(phi - phi0) ** 2
    lor = _lorentzian(omega)
    if form == "closed":
        v = (math.cos(phi) ** 2 + s2) / c2 - s2 / c2 * lor
    elif form == "gauge":
        v = 1.0 - s2 / c2 * lor
    else:
        raise ValueError(f"unknown form {form!r}")
    return SpectrumResult(omega=omega, v_out=np.asarray(v, dtype=float), quadrature_phase=float(phi),
                          mode="dark", source="analytic", metadata={"phi0": phi0, "form": form})
