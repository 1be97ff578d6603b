"""Command line entry point: ``simulate``, ``sweep`` and ``bound``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from ehfl import __version__
from ehfl.bound import BoundParams, figure3_params, scenario_traces
from ehfl.config import RunConfig, apply_pairs, dump_config, parse_config, split_overrides
from ehfl.trainer import SCENARIOS, RoundRecord, run_experiment

log = logging.getLogger("ehfl")


def fmt(value) -> str:
    """17 significant digits for floats; ints and bools as plain text."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_rounds(path: Path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RoundRecord.CSV_COLUMNS)
        for r in records:
            w.writerow([fmt(getattr(r, c)) for c in RoundRecord.CSV_COLUMNS])


def write_manifest(out_dir: Path, cfg: RunConfig, scenarios, files) -> None:
    manifest = {
        "version": __version__,
        "seed": cfg.scenario.seed,
        "scenarios": list(scenarios),
        "files": [str(f.name) for f in files],
        "config": cfg.to_dict(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    (out_dir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")


def run(cfg: RunConfig, scenarios=None) -> list:
    """Run each scenario with the same seed; one CSV per scenario plus a manifest."""
    scenarios = [cfg.scenario.scenario] if scenarios is None else list(scenarios)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name in scenarios:
        sc = replace(cfg.scenario, scenario=name)
        log.info("running %s for %d rounds", name, sc.rounds)
        records = run_experiment(sc)
        path = out_dir / f"{name}.csv"
        write_rounds(path, records)
        files.append(path)
    write_manifest(out_dir, cfg, scenarios, files)
    return files


def write_bound(path: Path, traces: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "t", "X", "Y", "bound_dist", "bound_loss"])
        for name, trace in traces.items():
            for row in trace.rows():
                w.writerow([name] + [fmt(v) for v in row])


def run_bound(overrides: dict, out_dir: Path) -> Path:
    params = apply_pairs(figure3_params(), overrides)
    traces = scenario_traces(params)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "bound.csv"
    write_bound(path, traces)
    resolved = {k: v for k, v in asdict(params).items()}
    (out_dir / "bound_manifest.json").write_text(
        json.dumps({"version": __version__, "params": resolved}, indent=2, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehfl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("simulate", help="run one scenario")
    common(p)
    p.add_argument("--scenario", choices=SCENARIOS)

    p = sub.add_parser("sweep", help="run every scenario with one seed")
    common(p)

    p = sub.add_parser("bound", help="evaluate the convergence bound for three scenarios")
    p.add_argument("--out-dir", default="results")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = split_overrides(args.override)
        if args.command == "bound":
            path = run_bound(overrides, Path(args.out_dir))
            print(path)
            return 0
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out_dir is not None:
            overrides["out_dir"] = args.out_dir
        if getattr(args, "scenario", None):
            overrides["scenario"] = args.scenario
        cfg = parse_config(args.config, overrides)
        scenarios = SCENARIOS if args.command == "sweep" else None
        for path in run(cfg, scenarios):
            print(path)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
