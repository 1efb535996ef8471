"""Command-line entry points: simulate, replay, orderings, serve."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .casestudy import bundled_source_data, change_summary, generate_sequences, load_source_data, replay
from .engine import DesignConfig
from .inference import PriorSpec, indifference_skeleton
from .orderings import DoseGrid, dump_orderings_file, standard_orderings
from .simulator import OC_CSV_COLUMNS, compare_methods, load_scenario, starter_scenarios

METHODS = ("selection", "averaging")


def _load_config(path: str | None, fallback: DesignConfig) -> DesignConfig:
    if path is None:
        return fallback
    return DesignConfig.from_json_file(path)


def _collect_scenarios(args_paths: list[str]):
    if not args_paths:
        return starter_scenarios()
    scenarios = []
    for raw in args_paths:
        path = Path(raw)
        if path.is_dir():
            files = sorted(path.glob("*.json"))
            if not files:
                raise ValueError(f"no scenario files in {path}")
            scenarios.extend(load_scenario(f) for f in files)
        else:
            scenarios.append(load_scenario(path))
    return scenarios


def _default_simulate_config(n_doses_rows: int = 4, n_doses_cols: int = 4) -> DesignConfig:
    # A narrow indifference interval keeps a 16-dose skeleton away from the
    # degenerate tails; the wider 0.05 default suits smaller grids.
    grid = DoseGrid(n_doses_rows, n_doses_cols)
    return DesignConfig(
        grid=grid,
        theta=0.3,
        cohort_size=1,
        n_cohorts=20,
        method="averaging",
        skeleton=indifference_skeleton(grid.n_doses, 0.3, halfwidth=0.02),
        prior=PriorSpec(),
        orderings=standard_orderings(grid),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.reps < 1:
        raise ValueError("--reps must be at least 1")
    base = _load_config(args.config, _default_simulate_config())
    methods = METHODS if args.method == "both" else (args.method,)
    configs = [replace(base, method=m) for m in methods]
    scenarios = _collect_scenarios(args.scenarios)
    table = compare_methods(configs, scenarios, n_reps=args.reps, seed=args.seed, jobs=args.jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "oc.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OC_CSV_COLUMNS)
        for row in table.rows:
            writer.writerow(row.csv_row())
    (out / "oc.json").write_text(json.dumps(table.to_json_dict(), indent=2) + "\n")
    for row in table.rows:
        print(
            f"{row.scenario} {row.method}: PCS={row.pcs:.3f} PAS={row.pas:.3f} "
            f"POTS={row.pots:.3f} incoherent={row.incoherent_proportion:.3f}"
        )
    print(f"wrote {csv_path} and {out / 'oc.json'}")
    return 0


def _default_replay_config(data) -> DesignConfig:
    grid = data.grid
    return DesignConfig(
        grid=grid,
        theta=data.theta,
        cohort_size=1,
        n_cohorts=20,
        method="averaging",
        skeleton=indifference_skeleton(grid.n_doses, data.theta),
        prior=PriorSpec(),
        orderings=standard_orderings(grid),
    )


def cmd_replay(args: argparse.Namespace) -> int:
    data = bundled_source_data() if args.data is None else load_source_data(args.data)
    sequences = generate_sequences(data, args.seed)
    base = _load_config(args.config, _default_replay_config(data))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"label": data.label, "seed": args.seed, "methods": {}}
    for method in METHODS:
        record = replay(replace(base, method=method), sequences)
        doc = {
            "record": record.to_json_dict(),
            "summary": change_summary(record),
            "coherency": record.coherency.to_json_dict(),
        }
        path = out / f"replay_{method}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        summary["methods"][method] = {
            "recommendation": record.recommendation,
            "n_events": len(record.coherency.events),
            "n_estimation_events": len(record.coherency.estimation_events()),
            "min_delta": doc["summary"]["min_delta"],
            "max_delta": doc["summary"]["max_delta"],
            "file": path.name,
        }
        print(
            f"{method}: recommended d{record.recommendation}, "
            f"{summary['methods'][method]['n_estimation_events']} estimation events, "
            f"delta range [{doc['summary']['min_delta']:.4f}, {doc['summary']['max_delta']:.4f}]"
        )
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_orderings(args: argparse.Namespace) -> int:
    grid = DoseGrid(args.rows, args.cols)
    oset = standard_orderings(grid, dedupe=args.dedupe)
    if args.out:
        dump_orderings_file(args.out, grid, oset)
        print(f"wrote {len(oset.orderings)} orderings to {args.out}")
    else:
        doc = {
            "rows": grid.rows,
            "cols": grid.cols,
            "orderings": [list(s) for s in oset.sequences],
            "prior_weights": list(oset.prior_weights),
        }
        print(json.dumps(doc, indent=2))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.bind.rpartition(":")
    app = create_app(store_dir=args.store)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pocrm", description="Combination dose-finding tools")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="replicated studies with operating characteristics")
    sim.add_argument("--config", help="design config JSON (default: 4x4, theta 0.3, 20 cohorts)")
    sim.add_argument(
        "--scenarios",
        nargs="*",
        default=[],
        help="scenario JSON files or directories (default: bundled starter pack)",
    )
    sim.add_argument("--reps", type=int, required=True, help="replications per scenario")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--method", choices=("selection", "averaging", "both"), default="both")
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--out", default=".", help="output directory for oc.csv / oc.json")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replay", help="virtual replay of a completed source trial")
    rep.add_argument("--data", help="source data JSON (default: bundled synthetic 4x4 trial)")
    rep.add_argument("--config", help="design config JSON (default derived from the data)")
    rep.add_argument("--seed", type=int, default=0, help="seed for synthesised response tails")
    rep.add_argument("--out", default=".", help="output directory")
    rep.set_defaults(func=cmd_replay)

    orab = sub.add_parser("orderings", help="emit the standard ordering set for a grid")
    orab.add_argument("--rows", type=int, required=True)
    orab.add_argument("--cols", type=int, required=True)
    orab.add_argument("--dedupe", action="store_true", help="merge duplicate sequences")
    orab.add_argument("--out", help="write JSON here instead of stdout")
    orab.set_defaults(func=cmd_orderings)

    srv = sub.add_parser("serve", help="run the conduct HTTP service")
    srv.add_argument("--bind", default="127.0.0.1:8000")
    srv.add_argument("--store", default=None, help="state directory (default: $POCRM_STORE)")
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
