"""Observables estimated from stochastic ensembles.

Generalized-P amplitudes are complex and their partners are not conjugates,
so every estimator here is built from analytic (holomorphic) functions of
the amplitudes: the orientation angle is the complex number

    theta_beta = (log beta_- - log beta_+) / (2i),

whose real part is ``(arg beta_- - arg beta_+) / 2``, and second moments use
products ``x * y`` rather than ``x * conj(y)``.  Stochastic averages of such
analytic functions equal normally ordered quantum averages; non-analytic ones
(``|x|^2``) depend on the arbitrary choice of noise matrix.

With ``phi0`` supplied, the orientation is taken in the frame where the
Goldstone projection ``c0`` vanishes,

    theta = (e^{-i phi0} theta_beta + e^{i phi0} theta_beta^+) / (2 cos phi0),

which is the angle whose increments are pure orientation noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import InsufficientDataError
from .linearized import SpectrumResult
from .model import hermite_amplitudes, quadrature

MIN_TRACKS = 100
MIN_SPECTRUM_SAMPLES = 2 ** 14
SEGMENT = 2 ** 10
STATIONARITY_SIGMAS = 5.0


@dataclass
class ThetaTrack:
    """Unwrapped orientation of one trajectory.

    ``theta`` is the real orientation; ``theta_complex`` the analytic angle
    used by the estimators.  ``indices`` locate the retained samples in the
    original record (indeterminate samples are dropped).
    """

    times: np.ndarray
    theta: np.ndarray
    trajectory_id: int = 0
    theta_complex: np.ndarray | None = None
    indices: np.ndarray | None = None
    n_samples: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta_complex is None:
            self.theta_complex = self.theta.astype(complex)
        if self.indices is None:
            self.indices = np.arange(len(self.times))
        if self.n_samples is None:
            self.n_samples = len(self.times)


@dataclass
class DiffusionFit:
    d_theta_hat: float
    stderr: float
    window: tuple
    n_used: int
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"d_theta_hat": self.d_theta_hat, "stderr": self.stderr,
                "window": list(self.window), "n_used": self.n_used, "metadata": self.metadata}


def _unwrap_half(angle):
    # angle defined modulo pi: unwrap twice the angle with period 2 pi
    return 0.5 * np.unwrap(2.0 * angle)


def _complex_angle(num, den):
    # (log num - log den) / (2i), real part unwrapped modulo pi
    re = _unwrap_half(0.5 * (np.angle(num) - np.angle(den)))
    im = -0.5 * (np.log(np.abs(num)) - np.log(np.abs(den)))
    return re + 1j * im


def extract_theta(samples, times=None, trajectory_id: int = 0, phi0: float | None = None,
                  threshold: float | None = None) -> ThetaTrack:
    """Orientation track of one trajectory.

    Parameters
    ----------
    samples : array, shape (n, 4)
        ``[beta_+, beta_-, beta_+^+, beta_-^+]`` per sample.
    times : array, optional
        Sample times; defaults to the sample index.
    phi0 : float, optional
        Eigenvector phase; selects the frame with vanishing Goldstone projection.
        Without it the track is ``theta_beta`` alone.
    threshold : float, optional
        Samples with any amplitude modulus below it are indeterminate and
        dropped.  Defaults to ``1e-6`` times the median amplitude.
    """
    x = np.asarray(samples, dtype=complex)
    if x.ndim != 2 or x.shape[1] != 4:
        raise ValueError(f"expected samples of shape (n, 4), got {x.shape}")
    n = x.shape[0]
    times = np.arange(n, dtype=float) if times is None else np.asarray(times, dtype=float)
    mags = np.abs(x)
    if threshold is None:
        finite = mags[np.isfinite(mags)]
        threshold = 1e-6 * float(np.median(finite)) if finite.size else 0.0
    ok = np.all(np.isfinite(x), axis=1) & np.all(mags > threshold, axis=1)
    idx = np.flatnonzero(ok)
    x = x[idx]
    th = _complex_angle(x[:, 1], x[:, 0])
    if phi0 is not None and len(idx):
        th_p = _complex_angle(x[:, 2], x[:, 3])
        # align the partner angle to the direct one by a multiple of pi
        th_p -= math.pi * np.round((th_p[0].real - th[0].real) / math.pi)
        e = complex(math.cos(phi0), -math.sin(phi0))
        th = (e * th + e.conjugate() * th_p) / (2.0 * math.cos(phi0))
    return ThetaTrack(times=times[idx], theta=th.real, trajectory_id=int(trajectory_id),
                      theta_complex=th, indices=idx, n_samples=n)


def extract_thetas(states, times, trajectory_ids=None, phi0=None) -> list[ThetaTrack]:
    """:func:`extract_theta` for every trajectory of a ``(n_traj, n, 4)`` array."""
    ids = range(len(states)) if trajectory_ids is None else trajectory_ids
    return [extract_theta(s, times, i, phi0) for s, i in zip(states, ids)]


def fit_diffusion(tracks, window, min_tracks: int = MIN_TRACKS) -> DiffusionFit:
    """Fit ``<delta theta(T)^2> = d T`` through the origin on ``window``.

    ``delta theta(T) = theta(T) - theta(0)`` with ``T`` counted from each
    track's first sample.  The variance uses the analytic square of the
    complex track.  Each track gives a slope ``d_k = sum T x_k / sum T^2``
    with ``x_k`` its (mean-subtracted) squared increment; the estimate is the
    mean of the ``d_k`` and its standard error their spread over ``sqrt(N)``.
    Tracks missing a sample inside the window are skipped.
    """
    t_min, t_max = window
    if not t_max > t_min:
        raise ValueError(f"empty window {window}")
    if len(tracks) < min_tracks:
        raise InsufficientDataError(f"need at least {min_tracks} tracks, got {len(tracks)}")
    ref = tracks[0]
    lag = ref.times - ref.times[0]
    sel = (lag >= t_min) & (lag <= t_max) & (lag > 0)
    grid = lag[sel]
    if grid.size == 0:
        raise InsufficientDataError(f"no samples inside the window {window}")
    rows = []
    for tr in tracks:
        tl = tr.times - tr.times[0]
        if len(tl) != len(lag) or not np.allclose(tl, lag):
            continue
        rows.append(tr.theta_complex[sel] - tr.theta_complex[0])
    if len(rows) < min_tracks:
        raise InsufficientDataError(f"only {len(rows)} complete tracks in the window, need {min_tracks}")
    inc = np.array(rows)
    inc = inc - inc.mean(axis=0)
    x = (inc * inc).real
    n = len(rows)
    slopes = x @ grid / np.dot(grid, grid)
    d = float(slopes.mean()) * n / (n - 1)
    se = float(slopes.std(ddof=1) / math.sqrt(n)) * n / (n - 1)
    var = x.mean(axis=0) * n / (n - 1)
    return DiffusionFit(d_theta_hat=d, stderr=se, window=(float(t_min), float(t_max)), n_used=n,
                        metadata={"lags": grid.tolist(), "variance": var.tolist()})


def dark_quadrature_series(samples, track: ThetaTrack, phi: float) -> np.ndarray:
    """Dark-mode quadrature ``e^{-i phi} a_s + e^{i phi} a_s^+`` in the co-rotating frame.

    The frame angle is the track's complex orientation, so the series is a
    complex (generalized-P) sample path.  Indeterminate samples are NaN.
    """
    x = np.asarray(samples, dtype=complex)
    out = np.full(x.shape[0], np.nan + 0j)
    idx = track.indices
    sigma = track.theta_complex
    _, a_s = hermite_amplitudes(x[idx, 0], x[idx, 1], sigma)
    _, a_s_p = hermite_amplitudes(x[idx, 2], x[idx, 3], sigma, partner=True)
    out[idx] = quadrature(a_s, a_s_p, phi)
    return out


def dark_quadrature_ensemble(states, times, phi, phi0=None) -> np.ndarray:
    """Dark quadrature series for every trajectory of a ``(n_traj, n, 4)`` array."""
    out = np.empty(states.shape[:2], dtype=complex)
    for k, s in enumerate(states):
        out[k] = dark_quadrature_series(s, extract_theta(s, times, k, phi0), phi)
    return out


class SpectrumAccumulator:
    """Streaming estimate of ``V_out`` from batches of quadrature series.

    Each trajectory gives a segment-averaged (Hann window, 50% overlap)
    estimate of the analytic spectrum ``<X(omega) X(-omega)>``; ``V_out = 1 +
    (2/kappa) S``.  Within a batch the cross-trajectory mean at each time is
    removed (with the ``n/(n-1)`` correction).
    """

    def __init__(self, dt_sample: float, kappa: float, nperseg: int = SEGMENT):
        if not dt_sample > 0:
            raise ValueError("dt_sample must be > 0")
        if not kappa > 0:
            raise ValueError("kappa must be > 0")
        self.dt = float(dt_sample)
        self.kappa = float(kappa)
        self.nperseg = int(nperseg)
        self.n = 0
        self.n_dropped = 0
        self.n_samples = 0
        self.sum = None
        self.sumsq = None
        self.freq = None
        self.seg_means = []

    def add(self, series) -> None:
        x = np.atleast_2d(np.asarray(series, dtype=complex))
        good = np.all(np.isfinite(x), axis=1)
        self.n_dropped += int((~good).sum())
        x = x[good]
        if x.shape[0] == 0:
            return
        if x.shape[1] < self.nperseg:
            raise InsufficientDataError(f"series of {x.shape[1]} samples shorter than one segment ({self.nperseg})")
        m = x.shape[0]
        nseg = x.shape[1] // self.nperseg
        self.seg_means.append(x[:, :nseg * self.nperseg].reshape(m, nseg, self.nperseg).mean(axis=2))
        if m > 1:
            x = (x - x.mean(axis=0)) * math.sqrt(m / (m - 1))
        else:
            x = x - x.mean()
        f, s = signal.csd(np.conj(x), x, fs=1.0 / self.dt, window="hann", nperseg=self.nperseg,
                          noverlap=self.nperseg // 2, detrend=False, return_onesided=False,
                          scaling="density", axis=-1)
        keep = f >= 0
        order = np.argsort(f[keep])
        v = 1.0 + 2.0 / self.kappa * s[:, keep][:, order].real
        if self.sum is None:
            self.freq = f[keep][order]
            self.sum = np.zeros_like(v[0])
            self.sumsq = np.zeros_like(v[0])
        self.sum += v.sum(axis=0)
        self.sumsq += (v * v).sum(axis=0)
        self.n += m
        self.n_samples += x.size

    def result(self, phi: float = math.nan, mode: str = "dark") -> SpectrumResult:
        if self.n_samples < MIN_SPECTRUM_SAMPLES or self.n == 0:
            raise InsufficientDataError(f"{self.n_samples} samples < {MIN_SPECTRUM_SAMPLES} required")
        mean = self.sum / self.n
        if self.n > 1:
            var = np.maximum(self.sumsq / self.n - mean * mean, 0.0) * self.n / (self.n - 1)
            stderr = np.sqrt(var / self.n)
        else:
            stderr = np.full_like(mean, np.nan)
        meta = {"n_trajectories": self.n, "n_dropped": self.n_dropped, "n_samples": self.n_samples,
                "nperseg": self.nperseg, "dt_sample": self.dt, "kappa": self.kappa,
                "window": "hann", "overlap": 0.5}
        meta.update(_stationarity(np.concatenate(self.seg_means, axis=0), self.nperseg))
        return SpectrumResult(omega=2 * math.pi * self.freq, v_out=mean, quadrature_phase=phi,
                              mode=mode, source="monte-carlo", stderr=stderr, metadata=meta)


def _stationarity(seg_means, nperseg):
    # compare the ensemble mean of the first and last segments
    if seg_means.shape[1] < 2:
        return {"stationarity_warning": False, "stationarity_z": 0.0}
    if seg_means.shape[0] > 1:
        first, last = seg_means[:, 0], seg_means[:, -1]
        diff = abs(last.mean() - first.mean())
        se = math.sqrt((np.var(first, ddof=1) + np.var(last, ddof=1)) / seg_means.shape[0])
    else:
        m = seg_means[0]
        diff = abs(m[-1] - m[0])
        se = math.sqrt(2.0) * float(np.std(m, ddof=1))
    z = diff / se if se > 0 else 0.0
    return {"stationarity_warning": bool(z > STATIONARITY_SIGMAS), "stationarity_z": float(z)}


def noise_spectrum(series, dt_sample: float, kappa: float, phi: float = math.nan,
                   nperseg: int = SEGMENT) -> SpectrumResult:
    """``V_out(omega) = 1 + (2/kappa) S(omega)`` from stationary quadrature series.

    ``series`` is one series or an array ``(n_traj, n)``; the transient must
    already be discarded.  ``omega`` is the angular frequency (``>= 0``).

    Raises
    ------
    InsufficientDataError
        Fewer than ``2**14`` usable samples in total.
    """
    acc = SpectrumAccumulator(dt_sample, kappa, nperseg)
    acc.add(series)
    return acc.result(phi)


def transient_time(eigenvalues, n_times: float = 10.0) -> float:
    """``n_times`` correlation times of the slowest damped mode (``|Re lambda_2|`` or 2)."""
    rates = [abs(complex(l).real) for l in eigenvalues[2:]] + [2.0]
    return n_times / min(r for r in rates if r > 0)


def autocorrelation(series, dt_sample: float, max_lag: float):
    """Analytic autocorrelation ``<dX(T) dX(T + tau)>`` averaged over time and trajectories.

    Returns ``(tau, C)`` with complex ``C``.
    """
    x = np.atleast_2d(np.asarray(series, dtype=complex))
    x = x[np.all(np.isfinite(x), axis=1)]
    m = x.shape[0]
    x = (x - x.mean(axis=0)) * math.sqrt(m / (m - 1)) if m > 1 else x - x.mean()
    n = x.shape[1]
    nl = int(round(max_lag / dt_sample)) + 1
    if nl >= n:
        raise InsufficientDataError("max_lag exceeds the series length")
    c = np.array([np.mean(x[:, : n - k] * x[:, k:]) for k in range(nl)])
    return np.arange(nl) * dt_sample, c


def fit_decay_rate(tau, corr, window=(0.02, 0.5)) -> float:
    """Exponential decay rate of ``|Re C(tau)|`` by a log-linear fit on ``window``."""
    tau = np.asarray(tau)
    sel = (tau >= window[0]) & (tau <= window[1])
    y = np.abs(np.real(np.asarray(corr)[sel]))
    slope, _ = np.polyfit(tau[sel], np.log(y), 1)
    return float(-slope)
