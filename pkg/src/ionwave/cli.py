"""Command-line front end.

    ionwave single-ion | chain | sweep-phase | sweep-blockade [--config FILE] [flags]
    ionwave reproduce fig1b | fig2c [--output-dir DIR]

Flag values override the config file, which overrides the defaults.
Exit codes: 0 success, 1 run failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import FIELD_HELP, ConfigError, RunConfig, build_config, parse_config
from .integrate import IntegratorSettings
from .model import ChainParams
from .oracle import FockConfig, fock_single_ion
from .output import (column_name, emit_plot, write_scenario_table, write_snapshots,
                     write_timeseries)

log = logging.getLogger("ionwave")

# flag name -> RunConfig field
FLAGS = {
    "--scenario": "scenario",
    "--n-ions": "n_ions",
    "--hop": "hop",
    "--coupling": "coupling",
    "--delta-phi": "phase",
    "--alpha0": "alpha0",
    "--driven-site": "driven_site",
    "--jt-max": "jt_max",
    "--gt-max": "gt_max",
    "--samples": "samples",
    "--rtol": "rtol",
    "--atol": "atol",
    "--method": "method",
    "--output": "output",
    "--n-phases": "n_phases",
    "--ratio-min": "ratio_min",
    "--ratio-max": "ratio_max",
    "--n-ratios": "n_ratios",
    "--sweep-samples": "sweep_samples",
}
INT_FIELDS = {"n_ions", "driven_site", "samples", "n_phases", "n_ratios", "sweep_samples"}
FLOAT_FIELDS = {"hop", "coupling", "jt_max", "gt_max", "rtol", "atol", "ratio_min", "ratio_max"}
SUBCOMMAND_EXPERIMENT = {
    "single-ion": "single_ion",
    "chain": "chain",
    "sweep-phase": "phase_sweep",
    "sweep-blockade": "blockade_sweep",
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    defaults = RunConfig()
    p.add_argument("--config", metavar="FILE", help="TOML run configuration (see docs/config.md)")
    for flag, name in FLAGS.items():
        kind = int if name in INT_FIELDS else float if name in FLOAT_FIELDS else str
        default = getattr(defaults, name)
        p.add_argument(flag, dest=name, type=kind, default=argparse.SUPPRESS,
                       help=f"{FIELD_HELP[name]} (default: {default})")
    p.add_argument("--plot", dest="emit_plot", action="store_true", default=argparse.SUPPRESS,
                   help="also write an SVG plot (default: off)")
    p.add_argument("--wide", dest="wide", action="store_true", default=argparse.SUPPRESS,
                   help="also write per-site amplitudes (default: off)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionwave",
        description="Light/phonon interference in a driven trapped-ion chain.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log integrator statistics to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "single-ion": "one ion under JC + carrier drive (time axis gt)",
        "chain": "driven N-ion chain (time axis Jt)",
        "sweep-phase": "max P_e and transmission versus interference phase",
        "sweep-blockade": "JC-only transmission versus g/J",
    }
    for name, text in helps.items():
        _add_run_flags(sub.add_parser(name, help=text, description=text))
    rep = sub.add_parser("reproduce", help="regenerate a figure's data and plot with pinned parameters")
    rep.add_argument("figure", choices=("fig1b", "fig2c"))
    rep.add_argument("--output-dir", default=".", help="directory for CSV and SVG (default: .)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = parse_config(Path(args.config).read_text(encoding="utf-8"))
    overrides = {name: getattr(args, name) for name in list(FLAGS.values()) + ["emit_plot", "wide"]
                 if hasattr(args, name)}
    overrides["experiment"] = SUBCOMMAND_EXPERIMENT[args.command]
    return build_config(overrides, base)


# --- commands ---------------------------------------------------------------

def _write_csv(path: Path, writer, *a, **kw) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        return writer(*a, fh, **kw)


def run_single_ion(cfg: RunConfig) -> None:
    res = ex.run_single_ion(cfg.resolved_scenario(), cfg.alpha0, cfg.coupling, cfg.gt_max,
                            cfg.samples, cfg.settings())
    out = Path(cfg.output)
    _write_csv(out, write_timeseries, res)
    _report(res)
    if cfg.emit_plot:
        label = cfg.resolved_scenario().label
        emit_plot({label: (res.series.times, res.series["P_e"])}, out.with_suffix(".svg"), xlabel="gt")


def run_chain(cfg: RunConfig) -> None:
    res = ex.run_chain(cfg.resolved_scenario(), cfg.chain_params(), cfg.jt_max, cfg.samples,
                       cfg.settings())
    out = Path(cfg.output)
    _write_csv(out, write_timeseries, res)
    if cfg.wide:
        _write_csv(out.with_suffix(".sites.csv"), write_snapshots, res)
    _report(res)
    if cfg.emit_plot:
        label = cfg.resolved_scenario().label
        emit_plot({}, out.with_suffix(".svg"), xlabel="Jt", panels={
            "P_e": {label: (res.series.times, res.series["P_e"])},
            "|alpha_next|^2": {label: (res.series.times, res.series["alpha_next_sq"])},
        })


def _write_rows(path: Path, header: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[h]:.17g}" if isinstance(r[h], float) else str(r[h])
                              for h in header) + "\n")


def run_phase_sweep(cfg: RunConfig) -> None:
    phases = np.linspace(0, 2 * math.pi, cfg.n_phases, endpoint=False)
    rows = ex.phase_sweep(cfg.chain_params(), phases, cfg.jt_max, cfg.sweep_samples, cfg.settings())
    _write_rows(Path(cfg.output), ["phase", "max_P_e", "transmission", "error"], rows)
    failed = [r for r in rows if r["error"]]
    log.info("phase sweep: %d points, %d failed", len(rows), len(failed))
    if cfg.emit_plot:
        emit_plot({"max P_e": ([r["phase"] for r in rows], [r["max_P_e"] for r in rows])},
                  Path(cfg.output).with_suffix(".svg"), xlabel="phase", ylabel="max P_e")


def run_blockade_sweep(cfg: RunConfig) -> None:
    ratios = np.logspace(math.log10(cfg.ratio_min), math.log10(cfg.ratio_max), cfg.n_ratios)
    rows = ex.blockade_sweep(cfg.chain_params(), ratios, cfg.jt_max, cfg.sweep_samples, cfg.settings())
    _write_rows(Path(cfg.output), ["ratio", "transmission", "error"], rows)
    if cfg.emit_plot:
        emit_plot({"JC": ([math.log10(r["ratio"]) for r in rows], [r["transmission"] for r in rows])},
                  Path(cfg.output).with_suffix(".svg"), xlabel="log10 g/J", ylabel="transmission")


def _report(res) -> None:
    for key, value in res.metrics.items():
        log.info("%s = %.6g", key, value)


# --- pinned reproductions ---------------------------------------------------

FIG1B = dict(alpha=1.0, g=1.0, gt_max=10.0, samples=2001)
FIG2C = dict(n_ions=100, coupling=1.0, hop=1.0, alpha0=1.0, jt_max=30.0, samples=2001)


def reproduce_fig1b(out_dir: Path) -> tuple[Path, Path]:
    settings = IntegratorSettings()
    results = {s.label: ex.run_single_ion(s, FIG1B["alpha"], FIG1B["g"], FIG1B["gt_max"],
                                          FIG1B["samples"], settings)
               for s in ex.SINGLE_ION_SCENARIOS}
    times = next(iter(results.values())).series.times
    exact = fock_single_ion(FockConfig(alpha=FIG1B["alpha"]), FIG1B["g"], 0.0,
                            (0.0, FIG1B["gt_max"]), times)
    gap = float(np.max(np.abs(exact["P_e"] - results["JC"].series["P_e"])))
    provenance = {"figure": "fig1b", **FIG1B, "method": settings.method, "rtol": settings.rtol,
                  "atol": settings.atol, "jc_exact_fock_dim": FockConfig(alpha=1.0).resolved_dim(),
                  "jc_semiclassical_vs_exact_max_gap": gap}
    csv_path, svg_path = out_dir / "fig1b.csv", out_dir / "fig1b.svg"
    _write_csv(csv_path, write_scenario_table, results, provenance=provenance,
               extra={column_name("P_e", "JC exact"): exact["P_e"]})
    curves = {label: (times, r.series["P_e"]) for label, r in results.items()}
    curves["JC exact"] = (times, exact["P_e"])
    emit_plot(curves, svg_path, xlabel="gt", ylabel="P_e")
    log.info("fig1b: semiclassical vs exact JC max |dP_e| = %.6g", gap)
    return csv_path, svg_path


def reproduce_fig2c(out_dir: Path) -> tuple[Path, Path]:
    settings = IntegratorSettings()
    params = ChainParams(n_ions=FIG2C["n_ions"], hop=FIG2C["hop"], coupling=FIG2C["coupling"],
                         alpha0=FIG2C["alpha0"])
    results = {s.label: ex.run_chain(s, params, FIG2C["jt_max"], FIG2C["samples"], settings)
               for s in ex.CHAIN_SCENARIOS}
    provenance = {"figure": "fig2c", **FIG2C, "driven_site": params.driven_site,
                  "method": settings.method, "rtol": settings.rtol, "atol": settings.atol}
    for label, r in results.items():
        provenance[f"transmitted_energy[{label}]"] = r.metrics["transmitted_energy"]
        provenance[f"max_P_e[{label}]"] = r.metrics["max_P_e"]
    csv_path, svg_path = out_dir / "fig2c.csv", out_dir / "fig2c.svg"
    _write_csv(csv_path, write_scenario_table, results, quantities=("P_e", "alpha_next_sq"),
               provenance=provenance)
    times = next(iter(results.values())).series.times
    emit_plot({}, svg_path, xlabel="Jt", panels={
        f"P_e^({params.driven_site})": {k: (times, r.series["P_e"]) for k, r in results.items()},
        f"|alpha_{params.driven_site + 1}|^2": {k: (times, r.series["alpha_next_sq"])
                                                for k, r in results.items()},
    })
    return csv_path, svg_path


# --- entry point ------------------------------------------------------------

COMMANDS = {
    "single_ion": run_single_ion,
    "chain": run_chain,
    "phase_sweep": run_phase_sweep,
    "blockade_sweep": run_blockade_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    try:
        if args.command == "reproduce":
            out_dir = Path(args.output_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            paths = (reproduce_fig1b if args.figure == "fig1b" else reproduce_fig2c)(out_dir)
            for p in paths:
                print(p)
        else:
            try:
                cfg = resolve_config(args)
            except ConfigError as exc:
                parser.print_usage(sys.stderr)
                print(f"ionwave: error: {exc}", file=sys.stderr)
                return 2
            COMMANDS[cfg.experiment](cfg)
            print(cfg.output)
    except Exception as exc:
        print(f"ionwave: error: {type(exc).__name__}: {exc}".splitlines()[0], file=sys.stderr)
        return 1
    log.info("done in %.2f s", time.perf_counter() - start)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
