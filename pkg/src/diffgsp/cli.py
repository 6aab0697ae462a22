"""``diffgsp`` command line: run scenarios from config files.

Exit codes: 0 ok, 2 configuration or I/O error, 3 invariant violation,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import ScenarioSpec, load_spec
from .errors import (
    ConfigError,
    DiffGSPError,
    DimensionCap,
    EigendecompositionFailure,
    InvariantViolation,
    NonConvergent,
    UnstableH,
)
from .scenarios import compare_strategies, generate_psd_scenario, run_scenario, run_selection, run_theory

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4
NUMERICAL = (UnstableH, NonConvergent, EigendecompositionFailure, DimensionCap)

MANIFEST = "manifest.cfg"

PSD_NOTE = ("PSD region read as a square of the given side in meters; RAP link radius is the "
            "smallest value of psd.radius_grid giving a connected graph")


def write_manifest(spec: ScenarioSpec, out: Path, command: str) -> Path:
    header = f"resolved scenario, command: {command}"
    if spec.kind == "psd" or command == "psd":
        header += "\n" + PSD_NOTE
    path = out / MANIFEST
    path.write_text(spec.to_text(header))
    return path


def _spec(args) -> ScenarioSpec:
    spec = load_spec(args.spec)
    if getattr(args, "seed", None) is not None:
        spec = spec.with_overrides(run__seed=args.seed)
    return spec


def cmd_simulate(args) -> int:
    spec = _spec(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out, "simulate")
    run_scenario(spec, out)
    return EXIT_OK


def cmd_select(args) -> int:
    spec = _spec(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out, "select")
    run_selection(spec, out)
    return EXIT_OK


def cmd_theory(args) -> int:
    spec = _spec(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out, "theory")
    for row in run_theory(spec, out):
        budget, mu, rho, *_, stable, _, msd_db = row
        print(f"budget={budget} mu={mu:g} rho(B)={rho:.6f} stable={bool(stable)} msd={msd_db:.2f} dB")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _spec(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out, "compare")
    for strategy, budget, _, db, unstable, _ in compare_strategies(spec, out):
        print(f"{strategy:>12} |S|={budget:<3} {db:8.2f} dB  unstable={unstable}")
    return EXIT_OK


def cmd_psd(args) -> int:
    spec = _spec(args)
    if spec.kind != "psd":
        raise ConfigError("the psd command needs scenario.kind = psd")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out, "psd")
    if args.layout_only:
        sc = generate_psd_scenario(spec)
        print(f"{sc.graph.n_nodes} RAPs, link radius {sc.radius:g} m, {len(sc.pu_positions)} PUs")
        return EXIT_OK
    run_scenario(spec, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diffgsp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, out_required=False):
        p = sub.add_parser(name, help=help_)
        p.add_argument("spec", help="scenario config file")
        p.add_argument("-o", "--output", required=out_required, default=None if out_required else ".",
                       help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.set_defaults(func=fn)
        return p

    add("simulate", cmd_simulate, "run a scenario and write CSVs plus a manifest", out_required=True)
    add("select", cmd_select, "centralized and protocol-level sampling-set selection")
    add("theory", cmd_theory, "stability report and steady-state MSD predictions")
    add("compare", cmd_compare, "steady-state MSD per sampling strategy and budget")
    p = add("psd", cmd_psd, "spectrum cartography scenario")
    p.add_argument("--layout-only", action="store_true", help="only generate and summarise the layout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DiffGSPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
