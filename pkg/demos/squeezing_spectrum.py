"""Dark-mode squeezing spectrum: linearized Lorentzian versus a small Monte Carlo ensemble.

Run: python demos/squeezing_spectrum.py  (about 20 seconds)
"""
import math

import numpy as np

from kerrsqueeze.estimators import SpectrumAccumulator, dark_quadrature_ensemble, transient_time
from kerrsqueeze.linearized import analytic_vout, analyze
from kerrsqueeze.model import ReducedParams
from kerrsqueeze.stochastic.integrate import EnsembleConfig, iter_ensemble


def main():
    prm = ReducedParams(1.5, 4.0, 1e-3)
    an = analyze(prm)
    omega = np.linspace(0, 6, 7)
    for phi in (math.pi / 2, 0.3, an.phi0):
        v = analytic_vout(prm, phi, omega, phi0=an.phi0).v_out
        print(f"phi={phi:+.3f}: " + " ".join(f"{x:.3f}" for x in v))

    cfg = EnsembleConfig(200, dt=1e-3, t_end=200.0, seed=3, record_stride=50)
    acc = SpectrumAccumulator(cfg.dt_sample, prm.kappa)
    k0 = int(math.ceil(transient_time(an.eigenvalues) / cfg.dt_sample))
    for batch in iter_ensemble("reduced", prm, cfg, batch_size=100):
        acc.add(dark_quadrature_ensemble(batch.good(), batch.times, math.pi / 2, an.phi0)[:, k0:])
    r = acc.result(math.pi / 2)
    ref = analytic_vout(prm, math.pi / 2, r.omega, phi0=an.phi0).v_out
    print("\nomega   V_mc    stderr  V_analytic")
    for i in np.searchsorted(r.omega, omega):
        print(f"{r.omega[i]:5.2f}  {r.v_out[i]:6.3f}  {r.stderr[i]:6.3f}  {ref[i]:6.3f}")


if __name__ == "__main__":
    main()
