"""Steady states, linear stability and orientation diffusion of the reduced model.

Run: python demos/linear_analysis.py
"""
import numpy as np

from kerrsqueeze.classical import instability_window, steady_states
from kerrsqueeze.linearized import analyze, diffusion_constant
from kerrsqueeze.model import ReducedParams


def main():
    for delta in (2.0, 3.0, 4.0):
        w = instability_window(delta)
        print(f"delta={delta}: trivial state unstable for {w.p_minus:.4f} < p < {w.p_plus:.4f}")

    prm = ReducedParams(1.5, 4.0, 1e-3)
    print("\nsteady states at p=1.5, delta=4")
    for s in steady_states(prm):
        print(f"  {s.kind:16s} mu^2={s.mu_sq:.5f} stable={s.stable}")

    a = analyze(prm)
    print("\neigenvalues:", np.round(a.eigenvalues, 6))
    print(f"phi0={a.phi0:.6f}  N0={a.n0:.6f}  biorthonormality residual={a.biorthonormality_residual():.1e}")

    print("\nD = d_theta / kappa along delta=4")
    for p in np.linspace(1.1, 3.8, 10):
        d = diffusion_constant(ReducedParams(p, 4.0, 1e-3)) / 1e-3
        print(f"  p={p:.2f}  D={d:.4f}")


if __name__ == "__main__":
    main()
