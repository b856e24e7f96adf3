"""Command-line interface: ``kerrsqueeze <command> [options]``.

Every command reads an optional JSON config (``--config``), overlays the
flags given on the command line, writes its data files into ``--output-dir``
and a ``<command>.json`` summary embedding the resolved config.  Running a
command again from that embedded config reproduces its files byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 insufficient data.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classical import instability_window, steady_states
from .errors import (ConfigError, DegeneracyError, DivergenceError, DomainError, EnsembleError,
                     FactorizationError, InconsistencyError, InsufficientDataError,
                     InvalidParameterError)
from .model import ModePoint, ReducedParams, mode_value

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4

DEFAULTS = {
    "params": {"p": 1.2, "delta": 3.0, "kappa": 1e-3, "psi": None},
    "model": "reduced",
    "ensemble": {"n_trajectories": 100, "dt": 1e-3, "t_end": 20.0, "seed": 0,
                 "record_stride": 50, "initial": "steady", "noise": True, "theta0": 0.0,
                 "max_samples": 20_000_000},
    "delta_list": [2.0, 3.0, 4.0],
    "p_range": [0.5, 3.0, 251],
    "phi_list": ["pi/2", "phi0"],
    "omega_max": 6.0,
    "n_omega": 61,
    "monte_carlo": False,
    "transient": None,
    "theta": 0.0,
    "grid_n": 101,
    "extent": 3.0,
    "clamp_pumps": False,
}

COMMAND_KEYS = {
    "bifurcation": ["delta_list", "p_range"],
    "diffusion-curve": ["delta_list", "p_range", "params"],
    "spectrum": ["params", "phi_list", "omega_max", "n_omega", "monte_carlo", "transient", "ensemble"],
    "simulate": ["params", "model", "ensemble", "clamp_pumps"],
    "field-map": ["params", "theta", "grid_n", "extent"],
    "eigen": ["params", "theta"],
}


# ---------------------------------------------------------------- output helpers

def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header, rows) -> None:
    """CSV with a header row, 17 significant digits and ``\\n`` line endings."""
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(command: str, args) -> dict:
    """Defaults, then the config file, then explicit flags.

    The config file may also be the ``<command>.json`` summary of an earlier
    run, whose embedded config is then replayed.
    """
    cfg = {k: DEFAULTS[k] for k in COMMAND_KEYS[command]}
    if args.config:
        data = load_config(args.config)
        if isinstance(data.get("config"), dict) and "version" in data:
            data = dict(data["config"])     # a previous run's summary
        if data.get("command", command) != command:
            raise ConfigError(f"config was written by '{data['command']}', not '{command}'")
        data.pop("command", None)
        data.pop("output_dir", None)
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config field(s) for '{command}': {sorted(unknown)}")
        cfg = _merge(cfg, data)
    flags = {}
    for key in ("p", "delta", "kappa", "psi"):
        if getattr(args, key, None) is not None:
            flags.setdefault("params", {})[key] = getattr(args, key)
    for key in ("n_trajectories", "dt", "t_end", "seed", "record_stride", "initial"):
        if getattr(args, key, None) is not None:
            flags.setdefault("ensemble", {})[key] = getattr(args, key)
    if getattr(args, "no_noise", False):
        flags.setdefault("ensemble", {})["noise"] = False
    for key in ("delta_list", "p_range", "phi_list", "omega_max", "n_omega", "transient",
                "theta", "grid_n", "extent", "model"):
        if getattr(args, key, None) is not None:
            flags[key] = getattr(args, key)
    if getattr(args, "monte_carlo", False):
        flags["monte_carlo"] = True
    if getattr(args, "clamp_pumps", False):
        flags["clamp_pumps"] = True
    flags = {k: v for k, v in flags.items() if k in cfg}
    return _merge(cfg, flags)


def _params(cfg) -> ReducedParams:
    d = cfg["params"]
    unknown = set(d) - {"p", "delta", "kappa", "psi"}
    if unknown:
        raise ConfigError(f"unknown field(s) in params: {sorted(unknown)}")
    try:
        return ReducedParams(p=float(d["p"]), delta=float(d["delta"]), kappa=float(d.get("kappa", 1e-3)),
                             psi=None if d.get("psi") is None else float(d["psi"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from exc


def _ensemble(cfg):
    from .stochastic.integrate import EnsembleConfig
    d = dict(cfg["ensemble"])
    try:
        return EnsembleConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"ensemble: {exc}") from exc


def _p_grid(cfg):
    try:
        start, stop, steps = cfg["p_range"]
        steps = int(steps)
    except (TypeError, ValueError) as exc:
        raise ConfigError("p_range must be [start, stop, steps]") from exc
    if steps < 1 or not stop >= start:
        raise ConfigError("p_range needs stop >= start and steps >= 1")
    return np.linspace(float(start), float(stop), steps)


def _phi_value(token, phi0):
    if isinstance(token, (int, float)):
        return float(token)
    t = str(token).strip().lower()
    if t == "phi0":
        return phi0
    table = {"pi/2": math.pi / 2, "0": 0.0, "pi/4": math.pi / 4, "pi": math.pi}
    if t in table:
        return table[t]
    try:
        return float(t)
    except ValueError as exc:
        raise ConfigError(f"cannot parse quadrature phase {token!r}") from exc


# ---------------------------------------------------------------- commands

def cmd_bifurcation(cfg, out: Path) -> dict:
    rows = []
    for delta in cfg["delta_list"]:
        for p in _p_grid(cfg):
            states = {s.kind: s for s in steady_states(ReducedParams(p=float(p), delta=float(delta)))}
            plus = states.get("nontrivial-plus")
            minus = states.get("nontrivial-minus")
            triv = states["trivial"]
            rows.append([delta, p,
                         plus.mu_sq if plus else None, minus.mu_sq if minus else None,
                         plus.stable if plus else None, minus.stable if minus else None,
                         triv.stable, bool(plus and plus.stable and triv.stable)])
    header = ["delta", "p", "mu_sq_plus", "mu_sq_minus", "stable_plus", "stable_minus",
              "trivial_stable", "bistable"]
    write_csv(out / "bifurcation.csv", header, rows)
    windows = {}
    for delta in cfg["delta_list"]:
        w = instability_window(float(delta))
        windows[str(delta)] = None if w is None else [w.p_minus, w.p_plus]
    return {"files": ["bifurcation.csv"], "instability_windows": windows, "rows": len(rows)}


def cmd_diffusion_curve(cfg, out: Path) -> dict:
    from .linearized import diffusion_constant
    base = _params(cfg)
    rows = []
    skipped = 0
    for delta in cfg["delta_list"]:
        grid = _p_grid(cfg)
        values = []
        for p in grid:
            d = None
            prm = ReducedParams(p=float(p), delta=float(delta), kappa=base.kappa)
            try:
                d = diffusion_constant(prm) / prm.kappa
            except (DomainError, DegeneracyError):
                skipped += 1
            values.append(d)
        inside = [v is not None for v in values]
        for i, (p, d) in enumerate(zip(grid, values)):
            if d is None:
                continue
            edge = (i > 0 and not inside[i - 1]) or (i + 1 < len(grid) and not inside[i + 1])
            rows.append([delta, p, d, edge])
    write_csv(out / "diffusion_curve.csv", ["delta", "p", "D", "domain_edge"], rows)
    return {"files": ["diffusion_curve.csv"], "rows": len(rows), "skipped": skipped}


def cmd_spectrum(cfg, out: Path) -> dict:
    from .linearized import analyze, analytic_vout
    params = _params(cfg)
    an = analyze(params)
    phis = [_phi_value(t, an.phi0) for t in cfg["phi_list"]]
    summary = {"phi0": an.phi0, "files": ["spectrum.csv"]}
    if not cfg["monte_carlo"]:
        omega = np.linspace(0.0, float(cfg["omega_max"]), int(cfg["n_omega"]))
        rows = []
        for phi in phis:
            v = analytic_vout(params, phi, omega, phi0=an.phi0).v_out
            rows += [[phi, w, x] for w, x in zip(omega, v)]
        write_csv(out / "spectrum.csv", ["phi", "omega", "v_analytic"], rows)
        return summary
    from .estimators import SpectrumAccumulator, dark_quadrature_ensemble, transient_time
    from .stochastic.integrate import iter_ensemble
    ens = _ensemble(cfg)
    t_skip = cfg["transient"]
    t_skip = transient_time(an.eigenvalues) if t_skip is None else float(t_skip)
    k0 = int(math.ceil(t_skip / ens.dt_sample - 1e-9))
    accs = [SpectrumAccumulator(ens.dt_sample, params.kappa) for _ in phis]
    n_div = 0
    for batch in iter_ensemble("reduced", params, ens):
        n_div += batch.n_diverged
        good = batch.good()
        for phi, acc in zip(phis, accs):
            acc.add(dark_quadrature_ensemble(good, batch.times, phi, an.phi0)[:, k0:])
    rows = []
    worst = 0.0
    for phi, acc in zip(phis, accs):
        r = acc.result(phi)
        sel = r.omega <= float(cfg["omega_max"]) + 1e-12
        ref = analytic_vout(params, phi, r.omega[sel], phi0=an.phi0).v_out
        disc = r.v_out[sel] - ref
        worst = max(worst, float(np.abs(disc).max()))
        rows += [[phi, w, a, v, s, d] for w, a, v, s, d in
                 zip(r.omega[sel], ref, r.v_out[sel], r.stderr[sel], disc)]
        summary.setdefault("monte_carlo", []).append(
            {"phi": phi, "v0": float(r.v_out[0]), **{k: v for k, v in r.metadata.items()}})
    write_csv(out / "spectrum.csv", ["phi", "omega", "v_analytic", "v_monte_carlo", "stderr",
                                     "discrepancy"], rows)
    summary.update({"max_discrepancy": worst, "n_diverged": n_div, "transient": t_skip})
    return summary


def cmd_simulate(cfg, out: Path) -> dict:
    from numpy.lib.format import open_memmap
    from .stochastic.drift import FullParams
    from .stochastic.integrate import iter_ensemble
    params = _params(cfg)
    ens = _ensemble(cfg)
    model = cfg["model"]
    if model not in ("reduced", "full"):
        raise ConfigError(f"model must be 'reduced' or 'full', got {model!r}")
    full = FullParams.from_reduced(params, clamp_pumps=bool(cfg["clamp_pumps"])) if model == "full" else None
    n_comp = 4 if model == "reduced" else 8
    states = open_memmap(out / "trajectories.npy", mode="w+", dtype=np.complex128,
                         shape=(ens.n_trajectories, ens.n_records, n_comp))
    div = np.empty(ens.n_trajectories)
    depletion = 0.0
    times = None
    for batch in iter_ensemble(model, params, ens, full_params=full):
        a, b = batch.metadata["batch"]
        states[a:b] = batch.states
        div[a:b] = batch.divergence_time
        times = batch.times
        if model == "full":
            depletion = max(depletion, batch.metadata["pump_depletion_ratio"])
    states.flush()
    del states
    np.save(out / "times.npy", times)
    good = np.load(out / "trajectories.npy", mmap_mode="r")
    good = good[~np.isfinite(div)]
    sig = (0, 1) if model == "reduced" else (2, 3)
    part = (2, 3) if model == "reduced" else (6, 7)
    moments = {}
    last = np.asarray(good[:, -1, :])
    for name, i, j in (("n_plus", sig[0], part[0]), ("n_minus", sig[1], part[1]),
                       ("plus_minus", sig[0], sig[1])):
        prod = last[:, i] * last[:, j]
        moments[name] = {"mean": prod.mean(), "stderr": prod.std(ddof=1) / math.sqrt(len(prod))
                         if len(prod) > 1 else None}
    summary = {"files": ["trajectories.npy", "times.npy"], "n_diverged": int(np.isfinite(div).sum()),
               "divergence_time": div, "seed": ens.seed, "final_moments": moments,
               "trajectory_layout": "states[trajectory, sample, component]"}
    if model == "full":
        summary["pump_depletion_ratio"] = depletion
        summary["reduced_comparison_reliable"] = bool(depletion <= 0.1)
        summary["full_params"] = full.as_dict()
    return summary


def cmd_field_map(cfg, out: Path) -> dict:
    from .classical import classical_field_amplitude
    params = _params(cfg)
    amp = classical_field_amplitude(params)
    theta = float(cfg["theta"])
    n = int(cfg["grid_n"])
    extent = float(cfg["extent"])
    if n < 2 or not extent > 0:
        raise ConfigError("grid_n must be >= 2 and extent > 0")
    axis = np.linspace(-extent, extent, n)
    rows = []
    total = 0.0
    for y in axis:
        for x in axis:
            pt = ModePoint(math.hypot(x, y), math.atan2(y, x))
            val = amp * mode_value("hermite-c", pt, 1.0, sigma=theta)
            inten = abs(val) ** 2
            total += inten
            rows.append([x, y, inten])
    write_csv(out / "field_map.csv", ["x", "y", "intensity"], rows)
    step = axis[1] - axis[0]
    return {"files": ["field_map.csv"], "amplitude": amp, "integrated_intensity": total * step * step,
            "two_mu_sq": amp * amp, "units": "lengths in waists"}


def cmd_eigen(cfg, out: Path) -> dict:
    from .linearized import analyze, diffusion_constant, kd_contraction
    params = _params(cfg)
    an = analyze(params, theta=float(cfg["theta"]))
    data = {"params": params.as_dict(), "mu_sq": an.state.mu_sq, "theta": an.theta,
            "eigenvalues": an.eigenvalues, "right_vectors": an.right_vectors.T,
            "left_vectors": an.left_vectors.T, "n0": an.n0, "phi0": an.phi0,
            "jacobian": an.jacobian, "d_bar": an.d_bar, "b_bar": an.b_bar,
            "kd_w0": kd_contraction(an, "w0"), "kd_w1": kd_contraction(an, "w1"),
            "d_theta": diffusion_constant(params, analysis=an), "diagnostics": an.diagnostics,
            "complex_encoding": "[real, imag]"}
    write_json(out / "eigen_analysis.json", data)
    return {"files": ["eigen_analysis.json"], "phi0": an.phi0, "d_theta": data["d_theta"]}


COMMANDS = {"bifurcation": cmd_bifurcation, "diffusion-curve": cmd_diffusion_curve,
            "spectrum": cmd_spectrum, "simulate": cmd_simulate, "field-map": cmd_field_map,
            "eigen": cmd_eigen}


# ---------------------------------------------------------------- argparse

def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _p_range(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected start,stop,steps")
    try:
        return [float(parts[0]), float(parts[1]), int(parts[2])]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad p range {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrsqueeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, params=True):
        sp.add_argument("--config", help="JSON config file; flags take precedence")
        sp.add_argument("--output-dir", default=".", help="directory for output files")
        if params:
            sp.add_argument("--p", type=float)
            sp.add_argument("--delta", type=float)
            sp.add_argument("--kappa", type=float)
            sp.add_argument("--psi", type=float)

    def ensemble(sp):
        sp.add_argument("--trajectories", dest="n_trajectories", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--t-end", dest="t_end", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--record-stride", dest="record_stride", type=int)
        sp.add_argument("--initial", choices=["steady", "vacuum"])
        sp.add_argument("--no-noise", action="store_true", help="switch the noise off (deterministic run)")

    sp = sub.add_parser("bifurcation", help="steady-state branches and stability over a p grid")
    common(sp, params=False)
    sp.add_argument("--delta-list", type=_floats)
    sp.add_argument("--p-range", type=_p_range, help="start,stop,steps")

    sp = sub.add_parser("diffusion-curve", help="normalized orientation diffusion D(p)")
    common(sp)
    sp.add_argument("--delta-list", type=_floats)
    sp.add_argument("--p-range", type=_p_range, help="start,stop,steps")

    sp = sub.add_parser("spectrum", help="dark-mode squeezing spectra")
    common(sp)
    ensemble(sp)
    sp.add_argument("--phi-list", type=lambda s: [x.strip() for x in s.split(",")],
                    help="quadrature phases, e.g. pi/2,phi0,0.3")
    sp.add_argument("--omega-max", type=float)
    sp.add_argument("--n-omega", type=int)
    sp.add_argument("--monte-carlo", action="store_true")
    sp.add_argument("--transient", type=float, help="discarded initial time (default: 10 correlation times)")

    sp = sub.add_parser("simulate", help="integrate a trajectory ensemble")
    common(sp)
    ensemble(sp)
    sp.add_argument("--model", choices=["reduced", "full"])
    sp.add_argument("--clamp-pumps", action="store_true")

    sp = sub.add_parser("field-map", help="classical intensity pattern on a square grid")
    common(sp)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--grid-n", type=int)
    sp.add_argument("--extent", type=float, help="half width in waists")

    sp = sub.add_parser("eigen", help="dump the linear analysis as JSON")
    common(sp)
    sp.add_argument("--theta", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, out)
        summary["config"] = dict(cfg, command=args.command)
        summary["version"] = __version__
        write_json(out / f"{args.command}.json", summary)
    except (ConfigError, InvalidParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FactorizationError, EnsembleError, DegeneracyError,
            InconsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
