"""Command-line entry point: ``cryospdc <command> [<subcommand>] [options]``.

Data go to ``--out`` (or stdout when omitted); a one-line JSON summary goes
to stdout when writing a file, to stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, load_run_config
from .counts import (
    IDLER,
    SIGNAL,
    SIGNAL2,
    brightness,
    car,
    count_coincidences,
    default_window,
    heralded_g2,
    klyshko_efficiency,
    simulate_tag_source,
)
from .dispersion import refractive_index
from .fit import fit_effective_length
from .formats import (
    atomic_write,
    grid_bytes,
    parse_grid,
    parse_tags,
    read_bytes,
    report_bytes,
    spectrum_bytes,
    sweep_bytes,
    table_bytes,
    tags_bytes,
)
from .jsa import JsiGrid, marginal_spectrum, simulate_jsi
from .phasematch import PhasematchSolution, design_poling_period, solve_phasematch, temperature_sweep

CHANNEL_NAMES = {SIGNAL: "signal", IDLER: "idler", SIGNAL2: "signal2"}


class CliError(Exception):
    pass


# --- helpers ----------------------------------------------------------------


def _load(args):
    cfg = load_run_config(args.config, material=args.material)
    pump = cfg.pump
    crystal = cfg.crystal
    if getattr(args, "pump_nm", None) is not None:
        pump = replace(pump, central_wavelength=args.pump_nm * 1e-9)
    if getattr(args, "period", None) is not None:
        crystal = crystal.with_period(args.period)
    return cfg, crystal, pump


def _params(args) -> dict:
    skip = {"func", "out", "verbosity", "threads", "plot"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, data: bytes, summary: dict) -> None:
    atomic_write(args.out or "-", data)
    line = json.dumps({"command": args.command_name, **summary}, sort_keys=True)
    print(line, file=sys.stdout if args.out and args.out != "-" else sys.stderr)


def _solution_dict(sol: PhasematchSolution) -> dict:
    return {
        "temperature_K": sol.temperature,
        "pump_wavelength_nm": sol.pump_wavelength * 1e9,
        "lambda_s_nm": sol.signal_wavelength * 1e9,
        "lambda_i_nm": sol.idler_wavelength * 1e9,
        "residual_rad_per_m": sol.residual_mismatch,
        "n_roots": sol.n_roots,
    }


def _maybe_plot(path, draw) -> None:
    if not path:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


# --- commands ---------------------------------------------------------------


def cmd_index(args):
    cfg, crystal, _ = _load(args)
    model = crystal.model(args.polarization)
    rows = [
        (args.polarization, wl, args.temperature, float(refractive_index(model, wl * 1e-9, args.temperature)))
        for wl in args.wavelength_nm
    ]
    digest = cfg.hash(command="index", params=_params(args))
    body = table_bytes("index", digest, ["polarization", "wavelength_nm", "temperature_K", "n"], rows)
    _emit(args, body, {"config_hash": digest})


def cmd_pm_solve(args):
    cfg, crystal, pump = _load(args)
    sol = solve_phasematch(crystal, pump.central_wavelength, args.temperature, cfg.solver)
    digest = cfg.hash(command="pm solve", params=_params(args))
    _emit(args, report_bytes(_solution_dict(sol), digest), {"config_hash": digest, **_solution_dict(sol)})


def cmd_pm_sweep(args):
    cfg, crystal, pump = _load(args)
    points = temperature_sweep(crystal, pump.central_wavelength, args.tmin, args.tmax, args.steps, cfg.solver)
    digest = cfg.hash(command="pm sweep", params=_params(args))
    extra = {"pump_wavelength_nm": pump.central_wavelength * 1e9, "poling_period_ref_m": crystal.poling_period_ref}
    _emit(args, sweep_bytes(points, digest, extra), {
        "config_hash": digest,
        "rows": len(points),
        "gaps": sum(1 for p in points if not isinstance(p, PhasematchSolution)),
    })

    def draw(ax):
        ok = [p for p in points if isinstance(p, PhasematchSolution)]
        t = [p.temperature for p in ok]
        ax.plot(t, [p.signal_wavelength * 1e9 for p in ok], label="signal (TE)")
        ax.plot(t, [p.idler_wavelength * 1e9 for p in ok], label="idler (TM)")
        ax.set_xlabel("temperature [K]")
        ax.set_ylabel("wavelength [nm]")
        ax.legend()

    _maybe_plot(args.plot, draw)


def cmd_pm_design(args):
    cfg, crystal, pump = _load(args)
    period_ref = design_poling_period(crystal, pump.central_wavelength, args.signal_nm * 1e-9, args.temperature)
    designed = crystal.with_period(period_ref)
    report = {
        "temperature_K": args.temperature,
        "pump_wavelength_nm": pump.central_wavelength * 1e9,
        "lambda_s_nm": args.signal_nm,
        "poling_period_ref_m": period_ref,
        "poling_period_at_T_m": designed.poling_period(args.temperature),
    }
    digest = cfg.hash(command="pm design", params=_params(args))
    _emit(args, report_bytes(report, digest), {"config_hash": digest, "poling_period_ref_m": period_ref})


def _axis(center_nm, span_nm, step_nm):
    n = int(round(span_nm / step_nm))
    start = round(center_nm / step_nm) * step_nm - (n // 2) * step_nm
    return (start + step_nm * np.arange(n + 1)) * 1e-9


def cmd_jsi_simulate(args):
    cfg, crystal, pump = _load(args)
    if args.signal_center_nm is None or args.idler_center_nm is None:
        sol = solve_phasematch(crystal, pump.central_wavelength, args.temperature, cfg.solver)
        sc = args.signal_center_nm or sol.signal_wavelength * 1e9
        ic = args.idler_center_nm or sol.idler_wavelength * 1e9
    else:
        sc, ic = args.signal_center_nm, args.idler_center_nm
    s_axis = _axis(sc, args.signal_span_nm, args.step_nm)
    i_axis = _axis(ic, args.idler_span_nm, args.step_nm)
    grid = simulate_jsi(crystal, pump, args.length, args.temperature, s_axis, i_axis, args.normalization)
    if args.counts:
        rng = np.random.default_rng(args.seed)
        grid = JsiGrid(grid.signal_axis, grid.idler_axis,
                          rng.poisson(args.counts * grid.normalized("peak_one").intensity).astype(float),
                          "raw_counts", dict(grid.metadata))
    digest = cfg.hash(command="jsi simulate", params=_params(args))
    _emit(args, grid_bytes(grid, digest, args.format), {"config_hash": digest, "shape": list(grid.intensity.shape)})

    def draw(ax):
        ax.pcolormesh(grid.idler_axis * 1e9, grid.signal_axis * 1e9, grid.intensity, shading="nearest")
        ax.set_xlabel("idler wavelength [nm]")
        ax.set_ylabel("signal wavelength [nm]")

    _maybe_plot(args.plot, draw)


def cmd_jsi_marginal(args):
    grid, header = parse_grid(read_bytes(args.grid))
    spec = marginal_spectrum(grid, args.axis)
    digest = header.get("config_hash", "")
    _emit(args, spectrum_bytes(spec.wavelength, spec.intensity, digest, args.axis),
          {"config_hash": digest, "points": int(spec.wavelength.size)})


def cmd_fit_length(args):
    cfg, crystal, pump = _load(args)
    grid, header = parse_grid(read_bytes(args.measured))
    temperature = args.temperature if args.temperature is not None else header.get("temperature_K")
    if temperature is None:
        raise CliError("temperature unknown: pass --temperature or use a grid with a temperature_K header")
    lo, hi = (float(v) for v in args.bounds.split(","))
    result = fit_effective_length(
        grid, crystal, pump, float(temperature), (lo, hi), args.points,
        refine=not args.no_refine,
        response_fwhm=args.response_fwhm_nm * 1e-9,
        fit_background=args.background,
        scale=args.scale,
        threads=args.threads,
    )
    report = {
        "effective_length_m": result.effective_length,
        "grid_minimum_m": result.grid_minimum,
        "at_bound": result.at_bound,
        "bounds_m": list(result.bounds),
        "objective": result.objective,
        "fit_hash": result.config_hash,
        "temperature_K": float(temperature),
        "length_grid_m": result.length_grid,
        "objective_values": result.objective_values,
    }
    digest = cfg.hash(command="fit length", params=_params(args), measured=header.get("config_hash"))
    _emit(args, report_bytes(report, digest), {
        "config_hash": digest, "effective_length_m": result.effective_length, "at_bound": result.at_bound,
    })


def cmd_counts_simulate(args):
    cfg, _, pump = _load(args)
    streams = simulate_tag_source(
        args.mean_pairs,
        (args.eta_s, args.eta_i),
        (args.dark_s, args.dark_i),
        pump.repetition_rate,
        args.duration,
        splitter=args.splitter,
        statistics=args.statistics,
        correlated=not args.uncorrelated,
        seed=args.seed,
    )
    digest = cfg.hash(command="counts simulate", params=_params(args))
    _emit(args, tags_bytes(streams, digest, CHANNEL_NAMES, args.format),
          {"config_hash": digest, "singles": {str(s.channel): s.counts for s in streams}})


def cmd_counts_analyze(args):
    cfg, _, pump = _load(args)
    if args.power_mw is not None:
        pump = replace(pump, transmitted_power=args.power_mw * 1e-3)
    streams, header = parse_tags(read_bytes(args.tags))
    channels = {s.channel for s in streams}
    window = args.window or default_window(pump.repetition_rate)
    combos = [(SIGNAL, IDLER)]
    if SIGNAL2 in channels:
        combos += [(SIGNAL2, IDLER), (SIGNAL, SIGNAL2, IDLER)]
    stats = count_coincidences(streams, window, combos)
    wanted = {"brightness", "klyshko", "car", "g2"} if args.metrics == "all" else set(args.metrics.split(","))
    metrics = {}
    if "brightness" in wanted:
        metrics["brightness_pairs_per_s_mW"] = brightness(stats, pump)
    if "klyshko" in wanted:
        metrics["klyshko"] = klyshko_efficiency(stats)
    if "car" in wanted:
        metrics["car"] = car(stats, pump)
    if "g2" in wanted and SIGNAL2 in channels:
        metrics["heralded_g2"] = heralded_g2(stats)
    report = {
        "window_s": stats.window,
        "duration_s": stats.duration,
        "singles": {str(k): v for k, v in sorted(stats.singles.items())},
        "coincidences": {"-".join(map(str, k)): v for k, v in sorted(stats.coincidences.items())},
        "metrics": {k: {"value": m.value, "error": m.error, "upper_limit": m.upper_limit} for k, m in metrics.items()},
    }
    digest = cfg.hash(command="counts analyze", params=_params(args), tags=header.get("config_hash"))
    _emit(args, report_bytes(report, digest),
          {"config_hash": digest, **{k: m.value for k, m in metrics.items()}})


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="ti_ppln_8p98", help="crystal config file or bundled name")
    common.add_argument("--material", default=None, help="override the material named by the crystal config")
    common.add_argument("--out", default=None, help="output file ('-' or omitted: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "bin"), default="csv")
    common.add_argument("-v", "--verbose", dest="verbosity", action="count", default=0)

    parser = argparse.ArgumentParser(prog="cryospdc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="effective refractive index")
    p.add_argument("--polarization", choices=("TE", "TM"), required=True)
    p.add_argument("--wavelength-nm", type=float, nargs="+", required=True)
    p.add_argument("--temperature", type=float, required=True, help="K")
    p.set_defaults(func=cmd_index, command_name="index")

    pm = sub.add_parser("pm", help="phase matching").add_subparsers(dest="sub", required=True)
    p = pm.add_parser("solve", parents=[common])
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--period", type=float, help="reference poling period [m]")
    p.add_argument("--pump-nm", type=float)
    p.set_defaults(func=cmd_pm_solve, command_name="pm solve")

    p = pm.add_parser("sweep", parents=[common])
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--period", type=float)
    p.add_argument("--pump-nm", type=float)
    p.add_argument("--plot", help="also render a PNG tuning curve")
    p.set_defaults(func=cmd_pm_sweep, command_name="pm sweep")

    p = pm.add_parser("design", parents=[common])
    p.add_argument("--signal-nm", type=float, required=True)
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--pump-nm", type=float)
    p.set_defaults(func=cmd_pm_design, command_name="pm design")

    jsi = sub.add_parser("jsi", help="joint spectral intensity").add_subparsers(dest="sub", required=True)
    p = jsi.add_parser("simulate", parents=[common])
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--length", type=float, required=True, help="effective length [m]")
    p.add_argument("--period", type=float)
    p.add_argument("--pump-nm", type=float)
    p.add_argument("--signal-center-nm", type=float)
    p.add_argument("--idler-center-nm", type=float)
    p.add_argument("--signal-span-nm", type=float, default=30.0)
    p.add_argument("--idler-span-nm", type=float, default=80.0)
    p.add_argument("--step-nm", type=float, default=1.0)
    p.add_argument("--normalization", choices=("peak_one", "sum_one", "raw_counts"), default="peak_one")
    p.add_argument("--counts", type=float, default=0.0, help="draw Poisson counts with this peak (uses --seed)")
    p.add_argument("--plot", help="also render a PNG heatmap")
    p.set_defaults(func=cmd_jsi_simulate, command_name="jsi simulate")

    p = jsi.add_parser("marginal", parents=[common])
    p.add_argument("--grid", required=True)
    p.add_argument("--axis", choices=("signal", "idler"), required=True)
    p.set_defaults(func=cmd_jsi_marginal, command_name="jsi marginal")

    fit = sub.add_parser("fit", help="model fitting").add_subparsers(dest="sub", required=True)
    p = fit.add_parser("length", parents=[common])
    p.add_argument("--measured", required=True, help="grid file ('-' for stdin)")
    p.add_argument("--bounds", default="1e-3,24.4e-3", help="lo,hi in metres")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--temperature", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--response-fwhm-nm", type=float, default=0.0)
    p.add_argument("--background", action="store_true")
    p.add_argument("--scale", choices=("fit", "peak"), default="fit")
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(func=cmd_fit_length, command_name="fit length")

    counts = sub.add_parser("counts", help="coincidence statistics").add_subparsers(dest="sub", required=True)
    p = counts.add_parser("simulate", parents=[common])
    p.add_argument("--mean-pairs", type=float, required=True)
    p.add_argument("--eta-s", type=float, default=1.0)
    p.add_argument("--eta-i", type=float, default=1.0)
    p.add_argument("--dark-s", type=float, default=0.0, help="1/s")
    p.add_argument("--dark-i", type=float, default=0.0, help="1/s")
    p.add_argument("--duration", type=float, default=1e-3, help="s")
    p.add_argument("--splitter", action="store_true")
    p.add_argument("--statistics", choices=("poisson", "thermal", "fixed"), default="poisson")
    p.add_argument("--uncorrelated", action="store_true")
    p.set_defaults(func=cmd_counts_simulate, command_name="counts simulate")

    p = counts.add_parser("analyze", parents=[common])
    p.add_argument("--tags", default="-", help="tag file ('-' for stdin)")
    p.add_argument("--window", type=float, help="coincidence window [s] (default: period/4)")
    p.add_argument("--metrics", default="all")
    p.add_argument("--power-mw", type=float, help="transmitted pump power override")
    p.set_defaults(func=cmd_counts_analyze, command_name="counts analyze")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbosity, 2), format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (CliError, ConfigError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"cryospdc: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
