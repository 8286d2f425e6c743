"""Command-line experiment runner.

Subcommands: run-sim, run-trunk, run-tabular, report. Failures print a
machine-readable JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ConfigError
from .forest import ForestConfig
from .harness import (
    ExperimentConfig,
    emit_report,
    load_report,
    report_to_csv,
    run_simulation_experiment,
    run_tabular_experiment,
    run_trunk_sweep,
)
from .network import NetConfig
from .simulations import KINDS, SimulationSpec


def _csv_of(cast):
    def parse(text):
        return tuple(cast(v) for v in text.split(",") if v)

    return parse


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--methods", type=_csv_of(str), default=None, help="comma list of rf,kdf,dn,kdn")
    p.add_argument("--sample-sizes", type=_csv_of(int), default=None)
    p.add_argument("--radii", type=_csv_of(float), default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--distance", choices=("euclidean", "geodesic"), default=None)
    p.add_argument("--fit-fraction", type=float, default=None)
    p.add_argument("--k-grid", type=_csv_of(float), default=None)
    p.add_argument("--trees", type=int, default=None, help="forest tree count")
    p.add_argument("--hidden", type=_csv_of(int), default=None, help="net hidden widths")
    p.add_argument("--paper-scale", action="store_true", help="use the full-scale parent presets")
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--ood-samples", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file; flags override its values")
    p.add_argument("--out", required=True, help="output report path")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _build_config(args, simulation: SimulationSpec | None) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig()
    updates = {}
    if simulation is not None:
        updates["simulation"] = simulation
    if args.methods is not None:
        updates["methods"] = args.methods
    if args.sample_sizes is not None:
        updates["sample_sizes"] = args.sample_sizes
    if args.radii is not None:
        updates["ood_radii"] = args.radii
    if args.reps is not None:
        updates["repetitions"] = args.reps
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.distance is not None:
        updates["distance_mode"] = args.distance
    if args.fit_fraction is not None:
        updates["fit_fraction"] = args.fit_fraction
    if args.k_grid is not None:
        updates["k_grid"] = args.k_grid
    if args.test_size is not None:
        updates["test_size"] = args.test_size
    if args.ood_samples is not None:
        updates["ood_sample_count"] = args.ood_samples
    if args.paper_scale:
        updates["forest"] = ForestConfig()
        updates["net"] = NetConfig()
    if args.trees is not None:
        forest = updates.get("forest", config.forest)
        updates["forest"] = dataclasses.replace(forest, tree_count=args.trees)
    if args.hidden is not None:
        net = updates.get("net", config.net)
        updates["net"] = dataclasses.replace(net, hidden_widths=args.hidden)
    return dataclasses.replace(config, **updates)


def _cmd_run_sim(args) -> int:
    spec = SimulationSpec(
        kind=args.simulation,
        n=2,
        turns=args.turns,
        class_count=args.classes,
    )
    config = _build_config(args, spec)
    report = run_simulation_experiment(config)
    emit_report(report, args.format, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def _cmd_run_trunk(args) -> int:
    spec = SimulationSpec(kind="trunk", n=2)
    config = _build_config(args, spec)
    if args.dims is not None:
        config = dataclasses.replace(config, dimensions=args.dims)
    if args.sample_sizes is None and not args.config:
        config = dataclasses.replace(config, sample_sizes=(5000,))
    if args.radii is None and not args.config:
        config = dataclasses.replace(config, ood_radii=(20.0,))
    report = run_trunk_sweep(config)
    emit_report(report, args.format, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def _cmd_run_tabular(args) -> int:
    config = _build_config(args, None)
    report = run_tabular_experiment(args.csv, config)
    emit_report(report, args.format, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def _cmd_report(args) -> int:
    report = load_report(args.input)
    if args.out:
        emit_report(report, args.format, args.out)
        print(f"wrote {args.format} report to {args.out}")
    else:
        if args.format == "csv":
            sys.stdout.write(report_to_csv(report))
        else:
            sys.stdout.write(report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("run-sim", help="sample-size sweep on a synthetic recipe")
    p_sim.add_argument("--simulation", choices=KINDS, required=True)
    p_sim.add_argument("--turns", type=float, default=2.5, help="spiral turns")
    p_sim.add_argument("--classes", type=int, default=2, help="spiral class count")
    _add_common(p_sim)
    p_sim.set_defaults(fn=_cmd_run_sim)

    p_trunk = sub.add_parser("run-trunk", help="dimension sweep on the trunk recipe")
    p_trunk.add_argument("--dims", type=_csv_of(int), default=None)
    _add_common(p_trunk)
    p_trunk.set_defaults(fn=_cmd_run_trunk)

    p_tab = sub.add_parser("run-tabular", help="run the pipeline on a local CSV")
    p_tab.add_argument("--csv", required=True)
    _add_common(p_tab)
    p_tab.set_defaults(fn=_cmd_run_tabular)

    p_rep = sub.add_parser("report", help="convert or print an existing report")
    p_rep.add_argument("--input", required=True)
    p_rep.add_argument("--format", choices=("json", "csv"), default="json")
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(fn=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
