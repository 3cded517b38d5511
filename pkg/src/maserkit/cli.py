"""Command-line front end.

One subcommand per analysis or simulation operation.  Every run writes
a JSON result document embedding a RunManifest (validated against the
shipped schema); trace outputs are plot-ready CSV.  Exit codes: 0 on
success, 1 on user error (arguments, files, units), 2 on numerical
failure (integration, non-convergence, missing oscillation).
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

import jsonschema

from . import __version__, cavity, cqed, fitting, spectro, synthetic, triplet, units
from .errors import MaserkitError, NumericalError, UserInputError
from .trace import read_trace_csv, write_trace_csv

OUTPUT_DIR_ENV = "MASERKIT_OUTPUT_DIR"

SUBCOMMANDS = (
    "simulate-triplet", "fit-trepr", "qcircle", "thermal-photons",
    "convert-power", "simulate-maser", "fit-maser", "cooperativity",
    "rabi", "svd-tas", "fit-tcspc", "quantum-yield", "gen-synthetic",
)


@dataclass
class RunManifest:
    subcommand: str
    inputs: list
    parameter_file: str | None
    output_dir: str
    seed: int | None
    version: str


class _CliParser(argparse.ArgumentParser):
    """argparse parser that reports usage problems as exit code 1."""

    def error(self, message):
        raise UserInputError(message)


def _load_schema():
    ref = resources.files("maserkit").joinpath("schemas/result.schema.json")
    return json.loads(ref.read_text())


_SCHEMA = None


def write_result_json(path, manifest, results):
    """Emit {manifest, results}, validated against the shipped schema."""
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = _load_schema()
    document = {"manifest": asdict(manifest), "results": results}
    jsonschema.validate(document, _SCHEMA)
    with open(path, "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_plot_script(csv_path, columns, logscale=False):
    """Emit a minimal gnuplot script next to a CSV file."""
    gp_path = os.path.splitext(csv_path)[0] + ".gp"
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'time (us)'",
    ]
    if logscale:
        lines.append("set logscale y")
    plot_parts = ", ".join(
        f"'{os.path.basename(csv_path)}' using 1:{i + 2} with lines"
        for i in range(columns))
    lines.append("plot " + plot_parts)
    with open(gp_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return gp_path


def _angular_rate(value, is_angular_quoted):
    """Internal rate from a CLI number; the flag marks 2 pi x quoting."""
    return units.ordinary_to_angular(value) if is_angular_quoted else value


def _load_json_file(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UserInputError(f"parameter file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UserInputError(f"{path}: invalid JSON ({exc})") from exc


def _require_keys(params, keys, where):
    missing = [k for k in keys if k not in params]
    if missing:
        raise UserInputError(f"{where}: missing keys {missing}")


def _out_path(args, default_name):
    name = args.out if getattr(args, "out", None) else default_name
    return os.path.join(args.output_dir, name)


# ---------------------------------------------------------------------------
# subcommand handlers: each returns (results dict, headline string or None)


def _cmd_simulate_triplet(args, manifest):
    params = _load_json_file(args.params)
    _require_keys(params, ("k_x", "k_z", "w_xz", "n_x0", "n_y0", "n_z0"),
                  args.params)
    model = triplet.TripletRateModel(
        n_x0=params["n_x0"], n_y0=params["n_y0"], n_z0=params["n_z0"],
        k_x=params["k_x"], k_z=params["k_z"], w_xz=params["w_xz"])
    t = np.linspace(0.0, args.t_max_us * 1e-6, args.points)
    n_x, n_z = triplet.evolve_populations(model, t)
    am, ap = triplet.eigenrates(model)

    csv_path = os.path.join(args.output_dir, "triplet_trajectory.csv")
    data = np.column_stack([t * 1e6, n_x, n_z, n_x - n_z])
    np.savetxt(csv_path, data, fmt="%.17g", delimiter=",",
               header="t_us,n_x,n_z,difference", comments="")
    if args.plot_script:
        _write_plot_script(csv_path, 3)

    rate, tau = triplet.combined_rate_from_eigen(am, ap)
    results = {
        "alpha_minus": am,
        "alpha_plus": ap,
        "combined_rate_per_s": rate,
        "combined_decay_time_s": tau,
        "trajectory_csv": csv_path,
    }
    return results, f"wrote {csv_path}"


def _cmd_fit_trepr(args, manifest):
    trace = read_trace_csv(args.trace, unit=args.unit)
    init = tuple(args.init) if args.init else None
    fit = fitting.fit_biexponential(trace, init=init)
    crossing = triplet.zero_crossing_time(fit)
    results = {
        "A": fit.A, "B": fit.B,
        "alpha_minus": fit.alpha_minus, "alpha_plus": fit.alpha_plus,
        "A_err": fit.A_err, "B_err": fit.B_err,
        "alpha_minus_err": fit.alpha_minus_err,
        "alpha_plus_err": fit.alpha_plus_err,
        "zero_crossing_us": None if crossing is None else crossing * 1e6,
        "combined_rate_per_s": -(fit.alpha_minus + fit.alpha_plus) / 2.0,
    }
    head = (f"A={fit.A:.6g}  B={fit.B:.6g}  "
            f"alpha-={fit.alpha_minus:.6g}  alpha+={fit.alpha_plus:.6g}")
    return results, head


def _cmd_qcircle(args, manifest):
    results = {}
    if args.s11:
        raw = np.loadtxt(args.s11, delimiter=",", skiprows=1, ndmin=2)
        if raw.shape[1] != 3:
            raise UserInputError(f"{args.s11}: expected columns f_Hz,re_S11,im_S11")
        center, radius, diameter = cavity.fit_reflection_circle(raw[:, 1], raw[:, 2])
        d = diameter
        results["circle_center"] = list(center)
        results["circle_radius"] = radius
        manifest.inputs.append(args.s11)
    elif args.d is not None:
        d = args.d
    else:
        raise UserInputError("provide --d or --s11")
    geom = cavity.QCircleGeometry(d=d, d2=args.d2)
    k1 = cavity.coupling_from_qcircle(geom)
    results.update({"d": d, "d2": args.d2, "coupling_k1": k1})
    headline = f"K = {k1:.6g}"
    if args.f0 is not None:
        if args.f_low is None or args.f_high is None:
            raise UserInputError("--f0 requires --f-low and --f-high")
        q_l = cavity.loaded_q(args.f0, args.f_low, args.f_high)
        q_u = cavity.unloaded_q(q_l, k1, args.k2)
        kappa_c = cavity.cavity_decay_rate(args.f0, q_l)
        results.update({
            "q_loaded": q_l, "q_unloaded": q_u,
            "kappa_c_per_s": kappa_c, "k2": args.k2,
        })
        headline += f"  Q_L = {q_l:.6g}  Q_u = {q_u:.6g}  kappa_c = {kappa_c:.6g} 1/s"
    return results, headline


def _cmd_thermal_photons(args, manifest):
    n_bar = cavity.thermal_photons(args.f, args.temp)
    return {"f_hz": args.f, "temperature_k": args.temp, "n_bar": n_bar}, f"{n_bar:.6g}"


def _cmd_convert_power(args, manifest):
    kappa_c = _angular_rate(args.kappa_c, args.kappa_c_angular)
    results = {"coupling": args.coupling, "kappa_c_per_s": kappa_c, "f_hz": args.f}
    headline = None
    if args.trace:
        trace = read_trace_csv(args.trace, unit=args.unit)
        if args.unit == "dBm":
            watts = np.array([units.dbm_to_watts(v) for v in trace.y])
            trace = trace.with_values(watts, unit="watts")
        trace.require_unit("watts")
        photons = cavity.power_trace_to_photons(trace, args.coupling, kappa_c, args.f)
        csv_path = os.path.join(args.output_dir, "photon_trace.csv")
        write_trace_csv(csv_path, photons)
        if args.plot_script:
            _write_plot_script(csv_path, 1, logscale=True)
        results["photon_trace_csv"] = csv_path
        results["peak_photons"] = float(np.max(photons.y))
        headline = f"wrote {csv_path}"
    else:
        if args.dbm is not None:
            p_watts = units.dbm_to_watts(args.dbm)
        elif args.watts is not None:
            p_watts = args.watts
        else:
            raise UserInputError("provide --dbm, --watts, or --trace")
        photons = cavity.power_to_photons(p_watts, args.coupling, kappa_c, args.f)
        results.update({"power_watts": p_watts, "photons": photons})
        headline = f"{photons:.6g}"
    return results, headline


def _maser_params_from_args(args):
    values = dict(synthetic.BURST_DEFAULTS)
    if args.params:
        file_values = _load_json_file(args.params)
        unknown = set(file_values) - set(values) - {"t_max_us", "n_points", "photon0"}
        if unknown:
            raise UserInputError(f"{args.params}: unknown keys {sorted(unknown)}")
        values.update(file_values)
    if args.ge_hz is not None:
        values["g_e"] = _angular_rate(args.ge_hz, args.ge_angular)
    if args.kappa_s_hz is not None:
        values["kappa_s"] = _angular_rate(args.kappa_s_hz, args.kappa_s_angular)
    if args.kappa_c is not None:
        values["kappa_c"] = _angular_rate(args.kappa_c, args.kappa_c_angular)
    if args.gamma is not None:
        values["gamma"] = args.gamma
    if args.n_spins is not None:
        values["n_spins"] = args.n_spins
    if args.n_bar is not None:
        values["n_bar"] = args.n_bar
    if args.inversion0 is not None:
        values["inversion0"] = args.inversion0
    if args.delta is not None:
        values["delta"] = args.delta
    return values


def _cmd_simulate_maser(args, manifest):
    values = _maser_params_from_args(args)
    params = cqed.MaserSystemParams(
        g_e=values["g_e"], kappa_c=values["kappa_c"], kappa_s=values["kappa_s"],
        gamma=values["gamma"], delta=values["delta"],
        n_spins=values["n_spins"], n_bar=values["n_bar"])
    init = cqed.MaserState(
        photon_number=values.get("photon0", values["n_bar"]),
        coherence=0.0, inversion=values["inversion0"], spin_correlation=0.0)
    # explicit flags take precedence over the parameter file
    t_max_us = args.t_max_us if args.t_max_us is not None else values.get("t_max_us", 15.0)
    t_max = t_max_us * 1e-6
    n_points = int(args.points if args.points is not None
                   else values.get("n_points", cqed.DEFAULT_NPOINTS))
    traj = cqed.simulate_maser(params, init, (0.0, t_max),
                               rtol=args.rtol, atol=args.atol, n_points=n_points)

    csv_path = os.path.join(args.output_dir, "maser_trajectory.csv")
    data = np.column_stack([
        traj.t * 1e6, traj.photon_number,
        traj.coherence.real, traj.coherence.imag,
        traj.inversion, traj.spin_correlation / params.n_spins,
    ])
    np.savetxt(csv_path, data, fmt="%.17g", delimiter=",",
               header="t_us,photon_number,re_coherence,im_coherence,"
                      "inversion,spin_correlation_per_N", comments="")
    if args.plot_script:
        _write_plot_script(csv_path, 1, logscale=True)

    i_peak = int(np.argmax(traj.photon_number))
    results = {
        "trajectory_csv": csv_path,
        "peak_photon_number": float(traj.photon_number[i_peak]),
        "peak_time_us": float(traj.t[i_peak] * 1e6),
        "oscillation_count": cqed.count_oscillations(traj.photon_trace()),
        "predicted_rabi_hz": units.angular_to_ordinary(cqed.predicted_rabi(params.g_e)),
        "parameters": values,
    }
    try:
        results["extracted_rabi_hz"] = cqed.extract_rabi_frequency(traj.photon_trace())
    except MaserkitError:
        results["extracted_rabi_hz"] = None
    return results, f"wrote {csv_path}"


def _cmd_fit_maser(args, manifest):
    trace = read_trace_csv(args.trace, unit="photons")
    fixed = {
        "kappa_c": synthetic.BURST_DEFAULTS["kappa_c"],
        "gamma": synthetic.BURST_DEFAULTS["gamma"],
        "n_bar": synthetic.BURST_DEFAULTS["n_bar"],
        "inversion0": synthetic.BURST_DEFAULTS["inversion0"],
        "delta": 0.0,
    }
    if args.fixed:
        fixed.update(_load_json_file(args.fixed))
    if args.baseline_correct:
        corrected = cavity.baseline_correct(trace, fixed["n_bar"])
        trace = corrected.trace
    init = args.init if args.init else [
        synthetic.BURST_DEFAULTS["g_e"],
        synthetic.BURST_DEFAULTS["kappa_s"],
        synthetic.BURST_DEFAULTS["n_spins"],
    ]
    result = fitting.fit_maser_parameters(trace, fixed, init, loss_space=args.loss)
    g_e, kappa_s, n_spins = result.params
    c = cqed.cooperativity(g_e, fixed["kappa_c"], kappa_s)
    results = {
        "g_e_per_s": g_e,
        "kappa_s_per_s": kappa_s,
        "n_spins": n_spins,
        "uncertainties": {
            "g_e_per_s": result.param_uncertainties[0],
            "kappa_s_per_s": result.param_uncertainties[1],
            "n_spins": result.param_uncertainties[2],
        },
        "residual_norm": result.residual_norm,
        "jacobian_condition": result.jacobian_condition,
        "iterations": result.iterations,
        "converged": result.converged,
        "cooperativity": c,
        "loss_space": args.loss,
    }
    head = (f"g_e = {g_e:.6g} 1/s  kappa_s = {kappa_s:.6g} 1/s  "
            f"N = {n_spins:.6g}  C = {c:.6g}")
    return results, head


def _cmd_cooperativity(args, manifest):
    if args.ge_hz is None or args.kappa_s_hz is None:
        raise UserInputError("cooperativity needs --ge-hz and --kappa-s-hz")
    g_e = _angular_rate(args.ge_hz, args.ge_angular)
    kappa_c = _angular_rate(args.kappa_c, args.kappa_c_angular)
    kappa_s = _angular_rate(args.kappa_s_hz, args.kappa_s_angular)
    c = cqed.cooperativity(g_e, kappa_c, kappa_s)
    results = {
        "g_e_per_s": g_e, "kappa_c_per_s": kappa_c, "kappa_s_per_s": kappa_s,
        "cooperativity": c,
    }
    return results, f"{c:.6g}"


def _cmd_rabi(args, manifest):
    results = {}
    if args.trace:
        trace = read_trace_csv(args.trace, unit="photons")
        if (args.window_lo_us is None) != (args.window_hi_us is None):
            raise UserInputError("--window-lo-us and --window-hi-us go together")
        window = None
        if args.window_lo_us is not None:
            window = (args.window_lo_us * 1e-6, args.window_hi_us * 1e-6)
        f = cqed.extract_rabi_frequency(trace, burst_window=window)
        results["extracted_rabi_hz"] = f
        headline = f"{f:.6g}"
    elif args.ge_hz is not None:
        g_e = _angular_rate(args.ge_hz, args.ge_angular)
        omega = cqed.predicted_rabi(g_e)
        results.update({
            "g_e_per_s": g_e,
            "predicted_rabi_per_s": omega,
            "predicted_rabi_hz": units.angular_to_ordinary(omega),
        })
        headline = f"{units.angular_to_ordinary(omega):.6g}"
    else:
        raise UserInputError("provide --trace or --ge-hz")
    return results, headline


def _cmd_svd_tas(args, manifest):
    matrix = spectro.read_matrix_csv(args.matrix)
    result = spectro.svd_global_analysis(matrix, args.threshold)
    component_files = []
    for i in range(result.significant_count):
        spec_path = os.path.join(args.output_dir, f"component_{i + 1}_spectrum.csv")
        with open(spec_path, "w") as fh:
            fh.write("lambda_nm,value\n")
            for w, v in zip(matrix.wavelengths, result.spectral_components[i]):
                fh.write(f"{w:.17g},{v:.17g}\n")
        time_path = os.path.join(args.output_dir, f"component_{i + 1}_time.csv")
        with open(time_path, "w") as fh:
            fh.write("delay_ps,value\n")
            for d, v in zip(matrix.delays, result.time_profiles[i]):
                fh.write(f"{d:.17g},{v:.17g}\n")
        component_files.extend([spec_path, time_path])
    results = {
        "singular_values": [float(s) for s in result.singular_values],
        "significant_count": result.significant_count,
        "component_lifetimes_ps": [float(v) for v in result.component_lifetimes],
        "component_files": component_files,
    }
    head = (f"{result.significant_count} significant components; lifetimes (ps): "
            + ", ".join(f"{v:.4g}" for v in result.component_lifetimes))
    return results, head


def _cmd_fit_tcspc(args, manifest):
    trace = read_trace_csv(args.trace, unit=args.unit)
    fit = spectro.fit_tcspc(trace, args.components)
    results = {
        "lifetimes_ns": list(fit.lifetimes_ns),
        "amplitudes": list(fit.amplitudes),
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
    }
    pairs = ", ".join(f"tau={tau:.4g} ns (A={a:.3g})"
                      for tau, a in zip(fit.lifetimes_ns, fit.amplitudes))
    return results, pairs


def _cmd_quantum_yield(args, manifest):
    rates = spectro.rates_from_lifetimes(args.tau_f_ns, args.tau_isc_ns)
    results = {
        "kappa_f_per_ns": rates.kappa_f,
        "kappa_isc_per_ns": rates.kappa_isc,
        "kappa_ic_plus_rad_per_ns": rates.kappa_ic_plus_rad,
        "theta_t": rates.theta_t,
    }
    return results, f"theta_T = {rates.theta_t:.4g}"


def _cmd_gen_synthetic(args, manifest):
    manifest.seed = args.seed
    overrides = _load_json_file(args.params) if args.params else None
    prefix = args.prefix or args.kind.replace("-", "_")
    written = []
    if args.kind == "biexp-trepr":
        noise = args.noise if args.noise is not None else 0.0
        trace, meta = synthetic.biexp_trepr(overrides, noise_rms=noise, seed=args.seed)
        data_path = os.path.join(args.output_dir, f"{prefix}.csv")
        write_trace_csv(data_path, trace)
        written.append(data_path)
    elif args.kind == "maser-burst":
        noise = args.noise if args.noise is not None else 0.0
        trace, meta = synthetic.maser_burst(overrides, noise_rms_log10=noise,
                                            seed=args.seed)
        data_path = os.path.join(args.output_dir, f"{prefix}.csv")
        write_trace_csv(data_path, trace)
        written.append(data_path)
    elif args.kind == "rank2-tas":
        noise = args.noise if args.noise is not None else 0.01
        matrix, meta = synthetic.rank2_tas(overrides, noise_frac=noise, seed=args.seed)
        data_path = os.path.join(args.output_dir, f"{prefix}.csv")
        spectro.write_matrix_csv(data_path, matrix)
        written.append(data_path)
    elif args.kind == "tcspc":
        poisson = args.noise is None or args.noise > 0
        trace, meta = synthetic.tcspc_decay(overrides, poisson=poisson, seed=args.seed)
        data_path = os.path.join(args.output_dir, f"{prefix}.csv")
        write_trace_csv(data_path, trace)
        written.append(data_path)
    else:
        raise UserInputError(f"unknown kind {args.kind!r}")
    if args.plot_script:
        _write_plot_script(written[0], 1, logscale=(args.kind == "maser-burst"))
    results = {"kind": args.kind, "files": written, "generating_parameters": meta}
    return results, f"wrote {', '.join(written)}"


# ---------------------------------------------------------------------------
# parser construction


def _add_angular_pair(parser, stem, help_base, value_flag=None):
    value_flag = value_flag or f"--{stem}-hz"
    parser.add_argument(value_flag, type=float, default=None, help=help_base)
    parser.add_argument(f"--{stem}-angular", action="store_true",
                        help=f"the {stem} value is quoted as 2 pi x that number")


def build_parser():
    parser = _CliParser(prog="maserkit",
                        description="Triplet maser analysis toolkit")
    parser.add_argument("--version", action="version",
                        version=f"maserkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand")

    common = _CliParser(add_help=False)
    common.add_argument("--output-dir", default=None,
                        help=f"output directory (default: ${OUTPUT_DIR_ENV} or '.')")
    common.add_argument("--out", default=None,
                        help="result JSON filename (default: <subcommand>.json)")
    common.add_argument("--plot-script", action="store_true",
                        help="also write a gnuplot script for CSV outputs")

    def add(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--version", action="version",
                       version=f"maserkit {__version__}")
        return p

    p = add("simulate-triplet", "closed-form triplet sublevel trajectory")
    p.add_argument("--params", required=True, help="JSON with rates and populations")
    p.add_argument("--t-max-us", type=float, default=20.0)
    p.add_argument("--points", type=int, default=800)

    p = add("fit-trepr", "biexponential fit of an EPR difference trace")
    p.add_argument("trace", help="two-column CSV (t_us,value)")
    p.add_argument("--unit", default="dimensionless")
    p.add_argument("--init", type=float, nargs=4, default=None,
                   metavar=("A", "B", "ALPHA_MINUS", "ALPHA_PLUS"))

    p = add("qcircle", "coupling and Q factors from Q-circle geometry")
    p.add_argument("--d", type=float, default=None, help="Q-circle diameter")
    p.add_argument("--d2", type=float, default=None,
                   help="auxiliary circle diameter (lossy case)")
    p.add_argument("--s11", default=None,
                   help="CSV of f_Hz,re_S11,im_S11 to circle-fit for d")
    p.add_argument("--f0", type=float, default=None, help="mode frequency Hz")
    p.add_argument("--f-low", type=float, default=None)
    p.add_argument("--f-high", type=float, default=None)
    p.add_argument("--k2", type=float, default=0.0, help="second port coupling")

    p = add("thermal-photons", "Bose-Einstein occupancy of a mode")
    p.add_argument("--f", type=float, required=True, help="frequency Hz")
    p.add_argument("--temp", type=float, required=True, help="temperature K")

    p = add("convert-power", "emitted power to intracavity photon number")
    p.add_argument("--dbm", type=float, default=None)
    p.add_argument("--watts", type=float, default=None)
    p.add_argument("--trace", default=None, help="CSV trace to convert")
    p.add_argument("--unit", default="watts", choices=("watts", "dBm"),
                   help="unit of the trace values")
    p.add_argument("--coupling", type=float, required=True)
    p.add_argument("--kappa-c", type=float, required=True)
    p.add_argument("--kappa-c-angular", action="store_true")
    p.add_argument("--f", type=float, required=True)

    p = add("simulate-maser", "mean-field maser burst simulation")
    p.add_argument("--params", default=None, help="JSON parameter file")
    _add_angular_pair(p, "ge", "spin-photon coupling")
    _add_angular_pair(p, "kappa-s", "spin dephasing rate")
    p.add_argument("--kappa-c", type=float, default=None)
    p.add_argument("--kappa-c-angular", action="store_true")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--n-spins", type=float, default=None)
    p.add_argument("--n-bar", type=float, default=None)
    p.add_argument("--inversion0", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--t-max-us", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--rtol", type=float, default=cqed.DEFAULT_RTOL)
    p.add_argument("--atol", type=float, default=cqed.DEFAULT_ATOL)

    p = add("fit-maser", "fit (g_e, kappa_s, N) to a photon burst")
    p.add_argument("trace", help="photon-number CSV")
    p.add_argument("--fixed", default=None,
                   help="JSON with kappa_c, gamma, n_bar, inversion0, delta")
    p.add_argument("--init", type=float, nargs=3, default=None,
                   metavar=("GE", "KAPPA_S", "N_SPINS"),
                   help="starting point, internal angular units")
    p.add_argument("--loss", default="log10", choices=("log10", "linear"))
    p.add_argument("--baseline-correct", action="store_true",
                   help="shift the pre-burst level to n_bar before fitting")

    p = add("cooperativity", "C = 4 g_e^2/(kappa_c kappa_s)")
    _add_angular_pair(p, "ge", "spin-photon coupling")
    p.add_argument("--kappa-c", type=float, required=True)
    p.add_argument("--kappa-c-angular", action="store_true")
    _add_angular_pair(p, "kappa-s", "spin dephasing rate")

    p = add("rabi", "predict (from g_e) or extract (from a trace) the Rabi frequency")
    _add_angular_pair(p, "ge", "spin-photon coupling")
    p.add_argument("--trace", default=None, help="photon-number CSV")
    p.add_argument("--window-lo-us", type=float, default=None)
    p.add_argument("--window-hi-us", type=float, default=None)

    p = add("svd-tas", "SVD global analysis of a transient-absorption matrix")
    p.add_argument("matrix", help="CSV: first row wavelengths, first column delays")
    p.add_argument("--threshold", type=float, default=spectro.DEFAULT_SIGNIFICANCE)

    p = add("fit-tcspc", "multi-exponential tail fit of a counting decay")
    p.add_argument("trace", help="two-column CSV (t_us,value)")
    p.add_argument("--components", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--unit", default="photons")

    p = add("quantum-yield", "triplet yield from fluorescence and ISC lifetimes")
    p.add_argument("--tau-f-ns", type=float, required=True)
    p.add_argument("--tau-isc-ns", type=float, required=True)

    p = add("gen-synthetic", "deterministic synthetic datasets")
    p.add_argument("--kind", required=True,
                   choices=("biexp-trepr", "maser-burst", "rank2-tas", "tcspc"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=None,
                   help="noise level; meaning depends on kind")
    p.add_argument("--params", default=None, help="JSON overriding generator defaults")
    p.add_argument("--prefix", default=None, help="output filename stem")

    return parser


_HANDLERS = {
    "simulate-triplet": _cmd_simulate_triplet,
    "fit-trepr": _cmd_fit_trepr,
    "qcircle": _cmd_qcircle,
    "thermal-photons": _cmd_thermal_photons,
    "convert-power": _cmd_convert_power,
    "simulate-maser": _cmd_simulate_maser,
    "fit-maser": _cmd_fit_maser,
    "cooperativity": _cmd_cooperativity,
    "rabi": _cmd_rabi,
    "svd-tas": _cmd_svd_tas,
    "fit-tcspc": _cmd_fit_tcspc,
    "quantum-yield": _cmd_quantum_yield,
    "gen-synthetic": _cmd_gen_synthetic,
}


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UserInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:   # --help / --version
        return 0 if exc.code in (0, None) else 1

    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 1

    if args.output_dir is None:
        args.output_dir = os.environ.get(OUTPUT_DIR_ENV, ".")
    os.makedirs(args.output_dir, exist_ok=True)

    manifest = RunManifest(
        subcommand=args.subcommand,
        inputs=[],
        parameter_file=getattr(args, "params", None) or getattr(args, "fixed", None),
        output_dir=args.output_dir,
        seed=None,
        version=__version__,
    )
    for attr in ("trace", "matrix"):
        value = getattr(args, attr, None)
        if value:
            manifest.inputs.append(value)

    handler = _HANDLERS[args.subcommand]
    try:
        results, headline = handler(args, manifest)
    except UserInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except MaserkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    json_path = _out_path(args, f"{args.subcommand}.json")
    write_result_json(json_path, manifest, results)
    if headline:
        print(headline)
    return 0


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
