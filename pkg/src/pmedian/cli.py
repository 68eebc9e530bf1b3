"""Command-line surface: solve, export and bench.

Exit codes: 0 solved to optimality, 2 feasible but not proven (time limit),
3 infeasible, 4 input error, 5 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import driver, export
from .errors import PmedianError
from .instance import FORMATS, load_instance

EXIT_OPTIMAL = 0
EXIT_FEASIBLE = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4
EXIT_INTERNAL = 5

REPORT_COLUMNS = ["name", "n", "p", "opt", "lb1", "ub1", "t1", "gap", "iter", "ttot", "status"]


def _setup_logging() -> None:
    level = os.environ.get("PMEDIAN_LOG", "warning").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(name)s\t%(message)s",
    )


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", help="instance file path")
    p.add_argument("--format", required=True, choices=FORMATS, help="instance file format")
    p.add_argument("--p", type=int, default=None,
                   help="number of sites to open (required unless the format embeds it)")


def _add_solve_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--time-limit", type=float, default=36000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial", choices=["heuristic", "random"], default="heuristic")
    p.add_argument("--no-rounding", action="store_true", help="disable the rounding heuristic")
    p.add_argument("--no-reduction", action="store_true", help="keep all cuts after phase 1")
    p.add_argument("--no-rcfix", action="store_true", help="disable reduced-cost fixing")
    p.add_argument("--phase2-frac-sep", action="store_true",
                   help="also separate fractional solutions in phase 2")
    p.add_argument("--out", default=None, help="write the text report here")
    p.add_argument("--csv", default=None, help="write the CSV report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmedian",
                                 description="Exact p-median solver (Benders cuts)")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one instance to proven optimality")
    _add_instance_args(sp)
    _add_solve_args(sp)

    ep = sub.add_parser("export", help="write a model file for an external solver")
    _add_instance_args(ep)
    ep.add_argument("--export", required=True, choices=["f1", "f2", "f3", "f4"],
                    help="formulation to export")
    ep.add_argument("--out", default=None, help="output path (default: stdout)")

    bp = sub.add_parser("bench", help="run a list of instances and summarize")
    bp.add_argument("runs", help="CSV with columns name,path,format,p[,time_limit]")
    _add_solve_args(bp)
    return ap


def _params_from_args(args) -> driver.Params:
    return driver.Params(
        time_limit=args.time_limit,
        seed=args.seed,
        rounding=not args.no_rounding,
        reduction=not args.no_reduction,
        rcfix=not args.no_rcfix,
        frac_sep_phase2=args.phase2_frac_sep,
        initial=args.initial,
    )


def _record(name: str, inst, res: driver.SolveResult) -> dict:
    return {
        "name": name,
        "n": inst.n_clients,
        "p": inst.p,
        "opt": res.value,
        "lb1": f"{res.lb1:.2f}",
        "ub1": res.ub1,
        "t1": f"{res.t_phase1:.2f}",
        "gap": f"{100.0 * res.gap:.4g}%",
        "iter": res.iterations,
        "ttot": "TL" if res.status == "feasible" else f"{res.t_total:.2f}",
        "status": res.status,
    }


def _emit(records: list[dict], out_path: str | None, csv_path: str | None) -> None:
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in records)) for c in REPORT_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in REPORT_COLUMNS)]
    for r in records:
        lines.append("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in REPORT_COLUMNS))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
            writer.writeheader()
            for r in records:
                writer.writerow({c: r.get(c, "") for c in REPORT_COLUMNS})


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance, args.format, args.p)
    except (OSError, PmedianError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        res = driver.solve(inst, _params_from_args(args))
    except PmedianError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    name = os.path.basename(args.instance)
    _emit([_record(name, inst, res)], args.out, args.csv)
    if res.status == "optimal":
        return EXIT_OPTIMAL
    if res.status == "feasible":
        return EXIT_FEASIBLE
    return EXIT_INFEASIBLE


def cmd_export(args) -> int:
    try:
        inst = load_instance(args.instance, args.format, args.p)
        text = export.write_lp(inst, args.export)
    except (OSError, PmedianError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OPTIMAL


def cmd_bench(args) -> int:
    try:
        with open(args.runs, "r", encoding="utf-8") as fh:
            runs = list(csv.DictReader(fh))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    records = []
    solved_times = []
    for run in runs:
        name = run.get("name") or os.path.basename(run["path"])
        try:
            p = int(run["p"]) if run.get("p") else None
            inst = load_instance(run["path"], run["format"], p)
            params = _params_from_args(args)
            if run.get("time_limit"):
                params.time_limit = float(run["time_limit"])
            res = driver.solve(inst, params)
            records.append(_record(name, inst, res))
            if res.status == "optimal":
                solved_times.append(res.t_total)
        except (OSError, PmedianError, KeyError, ValueError) as exc:
            records.append({"name": name, "status": f"error: {exc}"})
    if solved_times:
        records.append({
            "name": "average total time",
            "ttot": f"{sum(solved_times) / len(solved_times):.2f}",
            "status": f"over {len(solved_times)} solved",
        })
    if records:
        _emit(records, args.out, args.csv)
    else:
        print("no runs")
    return EXIT_OPTIMAL


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    if args.command == "export":
        return cmd_export(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
