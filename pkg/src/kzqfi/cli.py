"""Command-line entry point (``kzqfi``)."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import runner
from .dmrg import ground_state
from .errors import KZQFIError, SchemaError
from .model import ModelParams, antiperiodic_momenta, spectrum_epsilon_k
from .oracles import dense_ground_state

log = logging.getLogger("kzqfi")

EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _global_args(p):
    p.add_argument("--config", help="JSON run config (flat dotted keys or nested)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--engine", choices=["mps", "dense", "ff"])
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. --set tebd.chi_max=64")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kzqfi", description="QFI after slow quenches of the transverse-field Ising chain")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ground-state", help="ground state energy at field g")
    _global_args(p)
    p.add_argument("--g", type=float, help="field (default: schedule.g_start)")

    p = sub.add_parser("quench", help="single quench run: record, profile, trace, manifest")
    _global_args(p)

    p = sub.add_parser("oracle", help="single run with a reference engine (dense or ff)")
    _global_args(p)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep")
    _global_args(p)
    p.add_argument("--axis", action="append", default=[], metavar="KEY=JSON_LIST",
                   help='sweep axis, e.g. --axis tau_q=[1,2,4] (adds to the config file axes)')
    p.add_argument("--max-concurrency", type=int)

    p = sub.add_parser("fit", help="fit an aggregate records CSV")
    p.add_argument("mode", choices=["finite-size", "power-law", "kz-predict"])
    p.add_argument("records", nargs="?", help="records CSV (not needed for kz-predict)")
    p.add_argument("--value", default="f_q", help="column to fit (default f_q)")
    p.add_argument("--extrapolate", action="store_true", help="extrapolate each rate over N first")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau-q", type=float)
    p.add_argument("--engine", choices=["mps", "dense", "ff"])
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--report", help="also write the JSON report here")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("spectrum", help="quasiparticle energies on the antiperiodic momentum grid")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("predict", help="Kibble-Zurek exponents")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise SchemaError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = runner.parse_value(val)
    if args.out:
        out["output_dir"] = args.out
    if args.seed is not None:
        out["seed"] = args.seed
    if args.engine:
        out["engine"] = args.engine
    return out


def _file_config(args) -> dict:
    return runner.load_config_file(args.config) if args.config else {}


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _cmd_run(args, engine_default=None):
    layers = [{"engine": engine_default} if engine_default else {}, _file_config(args), _overrides(args)]
    cfg = runner.resolve_config(*layers)
    if engine_default and cfg["engine"] == "mps":
        raise SchemaError("engine: the oracle subcommand runs dense or ff, not mps")
    if args.print_config:
        _print_json(cfg)
        return 0
    rec = runner.run_single(cfg)
    row = rec.row()
    row["output_dir"] = cfg["output_dir"]
    _print_json(row)
    return 0


def _cmd_ground_state(args):
    cfg = runner.resolve_config(_file_config(args), _overrides(args))
    if args.print_config:
        _print_json(cfg)
        return 0
    g = cfg["schedule.g_start"] if args.g is None else args.g
    params = ModelParams(cfg["model.N"])
    if cfg["engine"] == "dense":
        _, energy = dense_ground_state(params, g)
        report = {"engine": "dense", "N": params.N, "g": g, "energy": energy}
    else:
        res = ground_state(params, g, runner.dmrg_config(cfg))
        report = {"engine": "mps", "N": params.N, "g": g, "energy": res.energy,
                  "sweeps": len(res.sweep_energies), "truncation_error": res.truncation_error,
                  "max_bond_dim": res.state.max_bond_dim}
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        res.state.save(out / "ground_state.npz")
        report["state"] = str(out / "ground_state.npz")
    _print_json(report)
    return 0


def _cmd_sweep(args):
    sweep_def = _file_config(args)
    if "axes" not in sweep_def:
        sweep_def = {"base": sweep_def, "axes": {}}
    axes = dict(sweep_def.get("axes", {}))
    for item in args.axis:
        if "=" not in item:
            raise SchemaError(f"--axis expects KEY=JSON_LIST, got {item!r}")
        key, val = item.split("=", 1)
        vals = runner.parse_value(val)
        if not isinstance(vals, list) or not vals:
            raise SchemaError(f"--axis {key}: expected a non-empty JSON list")
        axes[key.strip()] = vals
    if not axes:
        raise SchemaError("sweep needs at least one axis")
    base = {**runner.flatten(sweep_def.get("base", {})), **_overrides(args)}
    out_dir = base.pop("output_dir", None) or sweep_def.get("output_dir") or "runs/sweep"
    sweep = runner.SweepConfig(base, axes, args.max_concurrency or sweep_def.get("max_concurrency"), out_dir)
    cells = runner.enumerate_cells(sweep)
    if args.print_config:
        _print_json({"base": runner.resolve_config(base), "axes": axes, "cells": [c for c, _ in cells]})
        return 0
    print(f"sweep: {len(cells)} cells -> {out_dir}", file=sys.stderr)

    def progress(name, result):
        status = "ok" if result["ok"] else f"FAILED ({result['error']})"
        print(f"  {name}: {status}", file=sys.stderr)

    res = runner.run_sweep(sweep, out_dir, progress)
    _print_json({"records": str(res.records_csv), "completed": len(res.rows), "skipped": res.skipped,
                 "failed": res.failed})
    return 3 if res.failed else 0


def _cmd_fit(args):
    if args.mode != "kz-predict" and not args.records:
        raise SchemaError("fit: a records CSV is required for this mode")
    report = runner.fit_command(args.records, args.mode, value=args.value, extrapolate=args.extrapolate,
                                alpha=args.alpha, tau_q=args.tau_q, engine=args.engine,
                                d=args.d, nu=args.nu, z=args.z)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default))
    _print_json(report)
    return 0


def _cmd_spectrum(args):
    ks = antiperiodic_momenta(args.N)
    w = csv.writer(sys.stdout)
    w.writerow(["k", "epsilon_k"])
    for k in ks:
        w.writerow([repr(float(k)), repr(spectrum_epsilon_k(args.g, float(k)))])
    return 0


def _cmd_predict(args):
    _print_json(runner.fit_command(None, "kz-predict", alpha=args.alpha, d=args.d, nu=args.nu, z=args.z))
    return 0


_COMMANDS = {
    "ground-state": _cmd_ground_state,
    "quench": _cmd_run,
    "oracle": lambda a: _cmd_run(a, engine_default="dense"),
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "spectrum": _cmd_spectrum,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except KZQFIError as exc:
        print(f"kzqfi: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"kzqfi: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"kzqfi: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
