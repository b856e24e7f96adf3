"""Euler-Maruyama (Ito) integration of trajectory ensembles.

Each trajectory draws its noise from ``normal4(seed, tag, trajectory, step, block)``,
so a trajectory is the same whether it runs alone, inside any batch, or on
any number of threads.  Trajectories run in parallel with ``numba.prange``;
the thread count comes from ``KERRSQUEEZE_NUM_WORKERS`` (default: all).
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np
from numba import njit, prange

from ..errors import ConfigError, EnsembleError, InvalidParameterError
from ..model import ReducedParams
from .drift import (FullParams, full_diffusion, full_drift, reduced_diffusion, reduced_drift,
                    reduced_to_full_state)
from .factor import _factor_into, factor2, factor_diffusion
from .rng import TAG_FULL, TAG_REDUCED, normal4

DIVERGENCE_BOUND = 1e6
MAX_DIVERGED_FRACTION = 0.1
WORKERS_ENV = "KERRSQUEEZE_NUM_WORKERS"
MODELS = ("reduced", "full")


@dataclass
class ReducedState:
    """Four independent amplitudes; the ``_conj`` ones are generalized-P partners."""

    beta_plus: complex
    beta_minus: complex
    beta_plus_conj: complex
    beta_minus_conj: complex

    def to_array(self) -> np.ndarray:
        return np.array([self.beta_plus, self.beta_minus, self.beta_plus_conj, self.beta_minus_conj])

    @classmethod
    def from_array(cls, a):
        return cls(*(complex(x) for x in a))


@dataclass
class FullState:
    alpha1: complex
    alpha2: complex
    alpha_plus: complex
    alpha_minus: complex
    alpha1_conj: complex
    alpha2_conj: complex
    alpha_plus_conj: complex
    alpha_minus_conj: complex

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.__dataclass_fields__])

    @classmethod
    def from_array(cls, a):
        return cls(*(complex(x) for x in a))


@dataclass(frozen=True)
class EnsembleConfig:
    """Integration settings.

    ``initial`` is ``"steady"`` (plus-branch state at ``theta0``), ``"vacuum"``
    (zero signal; pumps at rest in the full model) or an explicit state array.
    ``max_samples`` bounds the number of complex values held in memory by one
    ensemble or batch.  ``first_trajectory`` offsets trajectory ids.
    """

    n_trajectories: int
    dt: float = 1e-3
    t_end: float = 1.0
    seed: int = 0
    record_stride: int = 1
    initial: object = "steady"
    noise: bool = True
    theta0: float = 0.0
    max_samples: int = 50_000_000
    first_trajectory: int = 0

    def __post_init__(self):
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise ConfigError(f"n_trajectories must be a positive integer, got {self.n_trajectories!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt!r}")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be > 0, got {self.t_end!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError(f"record_stride must be an integer >= 1, got {self.record_stride!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.first_trajectory < 0:
            raise ConfigError("first_trajectory must be >= 0")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise ConfigError(f"t_end = {self.t_end} is not a whole number of steps dt = {self.dt}")
        if round(n) % self.record_stride:
            raise ConfigError(f"{round(n)} steps are not a multiple of record_stride = {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    @property
    def dt_sample(self) -> float:
        return self.dt * self.record_stride

    def as_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.initial, np.ndarray) or not isinstance(self.initial, str):
            init = np.asarray(self.initial, dtype=complex)
            d["initial"] = {"real": init.real.tolist(), "imag": init.imag.tolist()}
        return d


@dataclass
class Ensemble:
    """Recorded trajectories ``states[trajectory, sample, component]``.

    Diverged trajectories are NaN from the first non-finite sample onwards.
    """

    model: str
    times: np.ndarray
    states: np.ndarray
    trajectory_ids: np.ndarray
    divergence_time: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def diverged(self) -> np.ndarray:
        return np.isfinite(self.divergence_time)

    @property
    def n_diverged(self) -> int:
        return int(self.diverged.sum())

    def good(self) -> np.ndarray:
        """States of the trajectories that never diverged."""
        return self.states[~self.diverged]


def configure_workers(n: int | None = None) -> int:
    """Set the numba thread count from ``n`` or the environment; returns the count used."""
    if n is None:
        env = os.environ.get(WORKERS_ENV)
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
    return n


# ---------------------------------------------------------------- kernels

@njit(inline="always")
def _reduced_drift4(bp, bm, bpc, bmc, lin, linc, pe, pec, two_p):
    a0 = -lin * bp + 1j * (bpc * bp + 2 * bmc * bm + two_p) * bp + 1j * pe * bmc
    a1 = -lin * bm + 1j * (bmc * bm + 2 * bpc * bp + two_p) * bm + 1j * pe * bpc
    a2 = -linc * bpc - 1j * (bp * bpc + 2 * bm * bmc + two_p) * bpc - 1j * pec * bm
    a3 = -linc * bmc - 1j * (bm * bmc + 2 * bp * bpc + two_p) * bmc - 1j * pec * bp
    return a0, a1, a2, a3


@njit(inline="always")
def _bad(z):
    return not (abs(z.real) < DIVERGENCE_BOUND and abs(z.imag) < DIVERGENCE_BOUND)


@njit(parallel=True, cache=True)
def _run_reduced(init, delta, p, kappa, pe, dt, n_steps, stride, seed, first, noise, out, div_step):
    n_traj = init.shape[0]
    lin = 1.0 + 1j * delta
    linc = 1.0 - 1j * delta
    pec = pe.conjugate()
    two_p = 2.0 * p
    ik = 1j * kappa
    sq = math.sqrt(dt)
    for j in prange(n_traj):
        bp = init[j, 0]
        bm = init[j, 1]
        bpc = init[j, 2]
        bmc = init[j, 3]
        out[j, 0, 0] = bp
        out[j, 0, 1] = bm
        out[j, 0, 2] = bpc
        out[j, 0, 3] = bmc
        div_step[j] = -1
        traj = first + j
        for n in range(n_steps):
            a0, a1, a2, a3 = _reduced_drift4(bp, bm, bpc, bmc, lin, linc, pe, pec, two_p)
            nbp = bp + a0 * dt
            nbm = bm + a1 * dt
            nbpc = bpc + a2 * dt
            nbmc = bmc + a3 * dt
            if noise:
                z0, z1, z2, z3 = normal4(seed, TAG_REDUCED, traj, n, 0)
                u11, u12, u21, u22 = factor2(ik * bp * bp, ik * (2 * bp * bm + pe), ik * bm * bm)
                l11, l12, l21, l22 = factor2(-ik * bpc * bpc, -ik * (2 * bpc * bmc + pec),
                                             -ik * bmc * bmc)
                nbp += (u11 * z0 + u12 * z1) * sq
                nbm += (u21 * z0 + u22 * z1) * sq
                nbpc += (l11 * z2 + l12 * z3) * sq
                nbmc += (l21 * z2 + l22 * z3) * sq
            bp, bm, bpc, bmc = nbp, nbm, nbpc, nbmc
            if _bad(bp) or _bad(bm) or _bad(bpc) or _bad(bmc):
                div_step[j] = n + 1
                break
            if (n + 1) % stride == 0:
                r = (n + 1) // stride
                out[j, r, 0] = bp
                out[j, r, 1] = bm
                out[j, r, 2] = bpc
                out[j, r, 3] = bmc
        if div_step[j] >= 0:
            for r in range((div_step[j] - 1) // stride + 1, out.shape[1]):
                for c in range(4):
                    out[j, r, c] = np.nan


@njit(inline="always")
def _full_half(a1, a2, ap, am, c1, c2, cp, cm, e1, e2, g, g1, g2, gs, delta, s):
    ig = s * 1j * g
    idel = s * 1j * delta
    d1 = e1 - (g1 + idel) * a1 + 4 * ig * c2 * a2 * a1 \
        + 2 * ig * (c1 * a1 * a1 + cp * ap * a1 + cm * am * a1 + c2 * ap * am)
    d2 = e2 - (g2 + idel) * a2 + 4 * ig * c1 * a1 * a2 \
        + 2 * ig * (c2 * a2 * a2 + cp * ap * a2 + cm * am * a2 + c1 * ap * am)
    dp = -(gs + idel) * ap + ig * cp * ap * ap \
        + 2 * ig * (cm * am * ap + c1 * a1 * ap + c2 * a2 * ap + cm * a1 * a2)
    dm = -(gs + idel) * am + ig * cm * am * am \
        + 2 * ig * (cp * ap * am + c1 * a1 * am + c2 * a2 * am + cp * a1 * a2)
    return d1, d2, dp, dm


@njit(inline="always")
def _dlan_fill(d, a1, a2, ap, am, f):
    d[0, 0] = f * a1 * a1
    d[1, 1] = f * a2 * a2
    d[2, 2] = f * 0.5 * ap * ap
    d[3, 3] = f * 0.5 * am * am
    d[0, 1] = d[1, 0] = f * (2 * a1 * a2 + ap * am)
    d[0, 2] = d[2, 0] = f * a1 * ap
    d[0, 3] = d[3, 0] = f * a1 * am
    d[1, 2] = d[2, 1] = f * a2 * ap
    d[1, 3] = d[3, 1] = f * a2 * am
    d[2, 3] = d[3, 2] = f * (a1 * a2 + ap * am)


@njit(parallel=True, cache=True)
def _run_full(init, g, g1, g2, gs, delta, e1, e2, clamp, dt, n_steps, stride, seed, first,
              noise, out, div_step):
    n_traj = init.shape[0]
    sq = math.sqrt(dt)
    e1c = e1.conjugate()
    e2c = e2.conjugate()
    for j in prange(n_traj):
        x = init[j].copy()
        nx = np.empty(8, dtype=np.complex128)
        d = np.empty((4, 4), dtype=np.complex128)
        bm_ = np.empty((4, 4), dtype=np.complex128)
        bp_ = np.empty((4, 4), dtype=np.complex128)
        work = np.empty((4, 4), dtype=np.complex128)
        lower = np.empty((4, 4), dtype=np.complex128)
        q = np.empty((4, 4))
        z = np.empty(8)
        for c in range(8):
            out[j, 0, c] = x[c]
        div_step[j] = -1
        traj = first + j
        for n in range(n_steps):
            d1, d2, dp, dm = _full_half(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7],
                                        e1, e2, g, g1, g2, gs, delta, 1.0)
            f1, f2, fp, fm = _full_half(x[4], x[5], x[6], x[7], x[0], x[1], x[2], x[3],
                                        e1c, e2c, g, g1, g2, gs, delta, -1.0)
            nx[0] = x[0] + d1 * dt
            nx[1] = x[1] + d2 * dt
            nx[2] = x[2] + dp * dt
            nx[3] = x[3] + dm * dt
            nx[4] = x[4] + f1 * dt
            nx[5] = x[5] + f2 * dt
            nx[6] = x[6] + fp * dt
            nx[7] = x[7] + fm * dt
            if noise:
                z[0], z[1], z[2], z[3] = normal4(seed, TAG_FULL, traj, n, 0)
                z[4], z[5], z[6], z[7] = normal4(seed, TAG_FULL, traj, n, 1)
                _dlan_fill(d, x[0], x[1], x[2], x[3], 2j * g)
                _factor_into(d, bm_, work, lower, q)
                _dlan_fill(d, x[4], x[5], x[6], x[7], -2j * g)
                _factor_into(d, bp_, work, lower, q)
                for r in range(4):
                    s1 = 0.0j
                    s2 = 0.0j
                    for c in range(4):
                        s1 += bm_[r, c] * z[c]
                        s2 += bp_[r, c] * z[4 + c]
                    nx[r] += s1 * sq
                    nx[4 + r] += s2 * sq
            if clamp:
                nx[0] = x[0]
                nx[1] = x[1]
                nx[4] = x[4]
                nx[5] = x[5]
            bad = False
            for c in range(8):
                x[c] = nx[c]
                if _bad(x[c]):
                    bad = True
            if bad:
                div_step[j] = n + 1
                break
            if (n + 1) % stride == 0:
                r = (n + 1) // stride
                for c in range(8):
                    out[j, r, c] = x[c]
        if div_step[j] >= 0:
            for r in range((div_step[j] - 1) // stride + 1, out.shape[1]):
                for c in range(8):
                    out[j, r, c] = np.nan


# ---------------------------------------------------------------- drivers

def step_ito(state, params, dt: float, normals) -> np.ndarray:
    """One Euler-Maruyama step ``x + A dt + B(x) normals sqrt(dt)``.

    ``params`` is ReducedParams (4 amplitudes) or FullParams (8 amplitudes).
    """
    from ..errors import DivergenceError
    x = np.asarray(state, dtype=complex)
    normals = np.asarray(normals, dtype=float)
    if not isinstance(params, (ReducedParams, FullParams)):
        raise InvalidParameterError(f"unsupported parameter type {type(params).__name__}")
    if normals.shape != (x.shape[-1],):
        raise InvalidParameterError(f"need {x.shape[-1]} normals, got shape {normals.shape}")
    # overflow shows up as a non-finite state and is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        if isinstance(params, ReducedParams):
            a = reduced_drift(x, params)
            b = factor_diffusion(reduced_diffusion(x, params), check=False)
        else:
            a = full_drift(x, params)
            b = factor_diffusion(full_diffusion(x, params.g), check=False)
        new = x + a * dt + b @ normals * math.sqrt(dt)
    if isinstance(params, FullParams) and params.clamp_pumps:
        new[[0, 1, 4, 5]] = x[[0, 1, 4, 5]]
    if not np.all(np.isfinite(new)):
        raise DivergenceError("non-finite state after Ito step", time=dt)
    return new


def _initial_states(model, params, config: EnsembleConfig, full_params=None):
    from ..classical import plus_state
    n_comp = 4 if model == "reduced" else 8
    init = config.initial
    if isinstance(init, str):
        if init == "steady":
            beta = plus_state(params).state(config.theta0)
        elif init == "vacuum":
            beta = np.zeros(4, dtype=complex)
        else:
            raise ConfigError(f"unknown initial condition {init!r}; use 'steady', 'vacuum' or an array")
        x = beta if model == "reduced" else reduced_to_full_state(beta, params)
    else:
        x = np.asarray(init, dtype=complex)
    if x.shape[-1] != n_comp:
        raise ConfigError(f"initial state must have {n_comp} components, got shape {x.shape}")
    x = np.broadcast_to(x, (config.n_trajectories, n_comp)) if x.ndim == 1 else x
    if x.shape[0] != config.n_trajectories:
        raise ConfigError("initial state array does not match n_trajectories")
    return np.ascontiguousarray(x, dtype=complex)


def _simulate(model, params, config, full_params, init):
    n = init.shape[0]
    n_comp = init.shape[1]
    out = np.empty((n, config.n_records, n_comp), dtype=complex)
    div_step = np.empty(n, dtype=np.int64)
    args = (config.dt, config.n_steps, config.record_stride, np.uint64(config.seed),
            np.int64(config.first_trajectory), bool(config.noise), out, div_step)
    if model == "reduced":
        _run_reduced(init, params.delta, params.p, params.kappa, params.cross_coupling, *args)
    else:
        fp = full_params
        _run_full(init, fp.g, fp.gamma1, fp.gamma2, fp.gamma_s, fp.delta, complex(fp.pump1),
                  complex(fp.pump2), bool(fp.clamp_pumps), *args)
    div_time = np.where(div_step >= 0, div_step * config.dt, np.nan)
    return out, div_time


def _resolve_full(params, full_params):
    if full_params is None:
        if not isinstance(params, ReducedParams):
            raise InvalidParameterError("full model needs ReducedParams or explicit FullParams")
        full_params = FullParams.from_reduced(params)
    return full_params


def _metadata(model, params, config, full_params):
    # worker count deliberately absent: results must not depend on it
    meta = {"model": model, "config": config.as_dict(),
            "numba_version": numba.__version__, "rng": "philox4x64-10",
            "params": params.as_dict() if hasattr(params, "as_dict") else None}
    if full_params is not None:
        meta["full_params"] = full_params.as_dict()
    return meta


def _pump_depletion(states):
    sig = np.maximum(np.abs(states[..., 2]), np.abs(states[..., 3]))
    pump = np.abs(states[..., 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sig / pump
    return float(np.nanmax(r)) if np.isfinite(r).any() else math.nan


def iter_ensemble(model: str, params, config: EnsembleConfig, full_params=None, batch_size=None):
    """Yield consecutive batches (as Ensemble objects) of the requested ensemble.

    Batches respect ``config.max_samples``.  Raises EnsembleError as soon as
    the running fraction of diverged trajectories can no longer stay below 10%.
    """
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    full_params = _resolve_full(params, full_params) if model == "full" else None
    n_comp = 4 if model == "reduced" else 8
    per_traj = config.n_records * n_comp
    fit = max(1, config.max_samples // per_traj)
    if batch_size is None:
        batch_size = fit
    batch_size = int(min(batch_size, fit, config.n_trajectories))
    configure_workers()
    init_all = _initial_states(model, params, config, full_params)
    times = np.arange(config.n_records) * config.dt_sample
    n_div = 0
    limit = MAX_DIVERGED_FRACTION * config.n_trajectories
    for start in range(0, config.n_trajectories, batch_size):
        stop = min(start + batch_size, config.n_trajectories)
        cfg = replace(config, n_trajectories=stop - start,
                      first_trajectory=config.first_trajectory + start, initial="steady")
        out, div_time = _simulate(model, params, cfg, full_params,
                                  np.ascontiguousarray(init_all[start:stop]))
        n_div += int(np.isfinite(div_time).sum())
        if n_div > limit:
            raise EnsembleError(f"{n_div} of {config.n_trajectories} trajectories diverged (> 10%)")
        ids = np.arange(start, stop) + config.first_trajectory
        meta = _metadata(model, params, config, full_params)
        meta["batch"] = (start, stop)
        if model == "full":
            meta["pump_depletion_ratio"] = _pump_depletion(out)
        yield Ensemble(model, times, out, ids, div_time, meta)


def run_ensemble(model: str, params, config: EnsembleConfig, full_params=None) -> Ensemble:
    """Integrate ``config.n_trajectories`` trajectories and keep them all in memory.

    Raises
    ------
    EnsembleError
        If more than 10% of the trajectories diverge or the ensemble would
        exceed ``config.max_samples`` (use :func:`iter_ensemble` then).
    """
    n_comp = 4 if model == "reduced" else 8
    total = config.n_trajectories * config.n_records * n_comp
    if total > config.max_samples:
        raise EnsembleError(f"ensemble needs {total} samples > max_samples = {config.max_samples}; "
                            "use iter_ensemble or a larger record_stride")
    batch = next(iter_ensemble(model, params, config, full_params, batch_size=config.n_trajectories))
    batch.metadata.pop("batch", None)
    batch.metadata["n_diverged"] = batch.n_diverged
    if model == "full":
        ratio = batch.metadata["pump_depletion_ratio"]
        batch.metadata["reduced_comparison_reliable"] = bool(ratio <= 0.1)
    return batch


def run_trajectory(model: str, params, config: EnsembleConfig, trajectory: int, full_params=None) -> Ensemble:
    """Single trajectory ``trajectory`` of the ensemble defined by ``config``."""
    cfg = replace(config, n_trajectories=1, first_trajectory=config.first_trajectory + trajectory)
    return run_ensemble(model, params, cfg, full_params)
