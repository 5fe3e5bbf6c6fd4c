"""Command-line entry points: ingest, gen, parse-rules, solve, validate,
emit-smt, import-smt-model, diff, bins, serve.

Exit codes: 0 success, 1 domain failure (parse/validation/infeasible),
2 usage errors (argparse). ``--json`` switches output to the same canonical
JSON the HTTP API serves; ``bins`` always prints the API body byte-for-byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .api import ServiceState
from .core import DomainError
from .payloads import BadRequest, to_json_bytes
from .rules import (
    ConstraintSet,
    NonNegativity,
    RuleSyntaxError,
    io_table_to_constraints,
    parse_rules,
)
from .smtlib import SmtSyntaxError, emit_smtlib, parse_smt_model
from .solver import SolveError, SolveStatus, SolverParams, solve_heuristic
from .store import (
    Dataset,
    SchemaError,
    ingest_firms,
    ingest_io_tables,
    load_model,
    load_region_table,
    model_json_text,
    model_to_json,
    save_dataset,
    save_model,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .validator import validate


def _eprint(*args) -> None:
    print(*args, file=sys.stderr)


def _emit(payload: dict, as_json: bool, human: str) -> None:
    if as_json:
        sys.stdout.buffer.write(to_json_bytes(payload))
    else:
        print(human)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_rules(args, registry=None) -> ConstraintSet:
    text = _read(args.rules) if args.rules else ""
    return parse_rules(text, registry)


def _dataset(args) -> Dataset:
    state = ServiceState(args.data_dir, parallelism=1)
    return state.dataset(args.dataset)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    spec = SyntheticSpec(
        n_firms=args.firms, n_sectors=args.sectors, n_regions=args.regions,
        years=tuple(args.years), seed=args.seed, dataset_id=args.dataset_id,
    )
    ds = generate_synthetic(spec)
    path = save_dataset(ds, Path(args.data_dir))
    _emit({"dataset_id": ds.dataset_id, "path": str(path), "manifest": dict(ds.manifest)},
          args.json, f"generated dataset {ds.dataset_id} at {path}")
    return 0


def cmd_ingest(args) -> int:
    firms, report = ingest_firms(_read(args.firms))
    tables, io_report = ingest_io_tables(_read(args.io)) if args.io else ({}, None)
    regions = load_region_table(_read(args.regions)) if args.regions else {}
    sectors = sorted({f.sector for f in firms} |
                     {s for t in tables.values() for pair in t.entries for s in pair})
    firms_by_year: dict[int, list] = {}
    for f in firms:
        firms_by_year.setdefault(f.year, []).append(f)
    from .core import SectorRegistry
    ds = Dataset(
        dataset_id=args.dataset_id,
        firms_by_year={y: tuple(v) for y, v in sorted(firms_by_year.items())},
        io_tables=tables,
        regions=regions,
        registry=SectorRegistry({s: s for s in sectors}),
        manifest={
            "dataset_id": args.dataset_id,
            "sectors": {s: s for s in sectors},
            "years": sorted(firms_by_year),
            "firm_counts": {str(y): len(v) for y, v in sorted(firms_by_year.items())},
            "cash_flow_cents": {str(y): sum(f.cash_flow_cents for f in v)
                                for y, v in sorted(firms_by_year.items())},
        },
    )
    path = save_dataset(ds, Path(args.data_dir))
    issues = [{"line": i.line, "message": i.message} for i in report.issues]
    if io_report is not None:
        issues += [{"line": i.line, "message": i.message, "file": "io"} for i in io_report.issues]
    _emit({"dataset_id": ds.dataset_id, "path": str(path), "accepted": report.accepted,
           "rejected": len(issues), "issues": issues},
          args.json,
          f"ingested {report.accepted} firm rows into {path} ({len(issues)} rejected)")
    for issue in report.issues:
        _eprint(f"firms.csv line {issue.line}: {issue.message}")
    return 0


def cmd_parse_rules(args) -> int:
    registry = None
    if args.dataset:
        registry = _dataset(args).registry
    from .payloads import constraints_payload
    cs = parse_rules(_read(args.rules), registry)
    payload = constraints_payload(cs)
    _emit(payload, args.json,
          "\n".join(f"{c['id']}  [{c['kind']}]" for c in payload["constraints"]))
    return 0


def _solver_params(args) -> SolverParams:
    return SolverParams(max_iterations=args.max_iterations, tolerance=args.tolerance, seed=args.seed)


def _build_constraints(args, ds: Dataset, year: int) -> ConstraintSet:
    cs = parse_rules(_read(args.rules) if args.rules else "", ds.registry)
    if args.include_io_totals:
        table = ds.io_tables.get(year)
        if table is None:
            raise BadRequest(f"dataset {ds.dataset_id} has no IO table for {year}")
        cs = cs.merged_with(ConstraintSet(tuple([NonNegativity()] + io_table_to_constraints(table))))
    return cs


def cmd_solve(args) -> int:
    ds = _dataset(args)
    year = args.year
    cs = _build_constraints(args, ds, year)
    firms = ds.firms(year)

    def progress(stage: str, iteration: int, residual: float) -> None:
        _eprint(f"solve {stage}: iteration={iteration} residual={residual}")

    # same executor the API uses; the CLI just waits for its single job
    from .jobs import JobManager
    manager = JobManager(parallelism=1)
    outcome: dict = {}

    def work(job) -> None:
        try:
            outcome["result"] = solve_heuristic(
                firms, cs, _solver_params(args), dataset_id=ds.dataset_id, year=year,
                progress=progress, should_cancel=job.cancel_event.is_set,
            )
        except Exception as e:  # re-raised on the main thread below
            outcome["error"] = e
        manager.transition(job, "done")

    job = manager.submit(work)
    manager.wait(job.job_id, timeout=3600)
    manager.shutdown()
    if "error" in outcome:
        raise outcome["error"]
    model, report = outcome["result"]
    model = dataclasses.replace(model, residuals=report.residuals)
    if args.save:
        out_dir = Path(args.data_dir) / ds.dataset_id / "models"
        out_dir.mkdir(parents=True, exist_ok=True)
        save_model(model, out_dir / f"{model.model_id}.json")
        rules_dir = Path(args.data_dir) / ds.dataset_id / "rules"
        rules_dir.mkdir(parents=True, exist_ok=True)
        (rules_dir / f"{model.model_id}.rules").write_text(
            _read(args.rules) if args.rules else "", encoding="utf-8")
    report_payload = {
        "status": report.status.value,
        "iterations": report.iterations,
        "wall_time_ms": report.wall_time_ms,
        "max_relative_residual": report.residuals.max_relative_residual,
        "infeasible_witnesses": list(report.infeasible_witnesses),
    }
    if args.json:
        sys.stdout.buffer.write(to_json_bytes({"model": model_to_json(model), "report": report_payload}))
    else:
        sys.stdout.write(model_json_text(model))
    _eprint(f"solve finished: {report.status.value} "
            f"(edges={len(model.edges)}, iterations={report.iterations}, {report.wall_time_ms} ms)")
    if report.status is SolveStatus.INFEASIBLE:
        _eprint("infeasible witnesses: " + ", ".join(report.infeasible_witnesses))
        return 1
    return 0


def cmd_validate(args) -> int:
    firms, report = ingest_firms(_read(args.firms))
    if report.issues:
        for issue in report.issues:
            _eprint(f"firms.csv line {issue.line}: {issue.message}")
        return 1
    model = load_model(Path(args.model))
    cs = parse_rules(_read(args.rules) if args.rules else "")
    result = validate(model, [f for f in firms if f.year == model.year], cs)
    ok = result.all_satisfied
    payload = {
        "model_id": model.model_id,
        "satisfied": ok,
        "max_relative_residual": result.max_relative_residual,
        "constraints": {
            cid: {"satisfied": st.satisfied, "violation_magnitude": st.violation_magnitude}
            for cid, st in result.constraint_status.items()
        },
        "sector_pair_residuals": {f"{s}->{t}": v for (s, t), v in result.sector_pair_residuals.items()},
    }
    _emit(payload, args.json,
          f"{'satisfied' if ok else 'VIOLATED'} "
          f"(max relative residual {result.max_relative_residual})")
    return 0 if ok else 1


def cmd_emit_smt(args) -> int:
    ds = _dataset(args)
    cs = _build_constraints(args, ds, args.year)
    doc = emit_smtlib(ds.firms(args.year), cs)
    if args.output:
        Path(args.output).write_text(doc, encoding="utf-8")
        _eprint(f"wrote {len(doc)} bytes to {args.output}")
    else:
        sys.stdout.write(doc)
    return 0


def cmd_import_smt_model(args) -> int:
    ds = _dataset(args)
    firms = ds.firms(args.year)
    cs = _build_constraints(args, ds, args.year)
    model = parse_smt_model(
        _read(args.smt_output), firms,
        dataset_id=ds.dataset_id, year=args.year, constraint_set_id=cs.set_id,
    )
    if model is None:
        _emit({"result": "no-model"}, args.json, "solver reported unsat/unknown: no model")
        return 1
    result = validate(model, firms, cs)
    model = dataclasses.replace(model, residuals=result)
    if args.save:
        out_dir = Path(args.data_dir) / ds.dataset_id / "models"
        out_dir.mkdir(parents=True, exist_ok=True)
        save_model(model, out_dir / f"{model.model_id}.json")
    if args.json:
        sys.stdout.buffer.write(to_json_bytes({"model": model_to_json(model),
                                               "satisfied": result.all_satisfied}))
    else:
        sys.stdout.write(model_json_text(model))
    return 0 if result.all_satisfied else 1


def cmd_diff(args) -> int:
    state = ServiceState(args.data_dir, parallelism=1)
    model_a = state.model(args.model_a)
    model_b = state.model(args.model_b)
    ds = state.dataset(model_a.dataset_id)
    from .payloads import diff_payload
    payload = diff_payload(model_a, model_b, ds.firms(model_a.year))
    _emit(payload, args.json,
          f"+{len(payload['additions'])} edges, -{len(payload['removals'])} edges, "
          f"{len(payload['amount_deltas'])} amount changes")
    return 0


def cmd_bins(args) -> int:
    state = ServiceState(args.data_dir, parallelism=1)
    ds = state.dataset(args.dataset)
    model_obj = state.model(args.model) if args.model else None
    from . import payloads as payload_builders
    key = ("bins", args.dataset, args.year, args.resolution, args.metric, args.mode,
           args.model, args.hide_unrepresented)
    body = state.cached(key, lambda: payload_builders.bins_payload(
        ds, args.year, args.resolution, args.metric, args.mode, model_obj,
        args.hide_unrepresented))
    sys.stdout.buffer.write(body)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app
    app = create_app(args.data_dir, parallelism=args.jobs)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="econoforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_dir(p):
        p.add_argument("--data-dir", default=os.environ.get("ECONOFORGE_DATA_DIR", "data"),
                       help="directory holding dataset subdirectories "
                            "(default: $ECONOFORGE_DATA_DIR or ./data)")

    def add_json(p):
        p.add_argument("--json", action="store_true", help="machine-readable canonical JSON output")

    p = sub.add_parser("gen", help="generate a deterministic synthetic dataset")
    p.add_argument("--firms", type=int, default=500)
    p.add_argument("--sectors", type=int, default=8)
    p.add_argument("--regions", type=int, default=6)
    p.add_argument("--years", type=int, nargs="+", default=[2013, 2014])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dataset-id", default=None)
    add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="ingest firm/IO/region CSVs into a dataset directory")
    p.add_argument("--firms", required=True)
    p.add_argument("--io", default=None)
    p.add_argument("--regions", default=None)
    p.add_argument("--dataset-id", required=True)
    add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("parse-rules", help="parse a .rules file and list constraints")
    p.add_argument("--rules", required=True)
    p.add_argument("--dataset", default=None, help="check sector codes against this dataset")
    add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_parse_rules)

    def add_solver_args(p):
        p.add_argument("--rules", default=None)
        p.add_argument("--include-io-totals", action="store_true",
                       help="add the dataset's IO-table totals as sector_total constraints")
        p.add_argument("--max-iterations", type=int, default=200)
        p.add_argument("--tolerance", type=float, default=1e-6)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="run the heuristic solver (progress on stderr)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--save", action="store_true", help="register the model in the dataset directory")
    add_solver_args(p); add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="validate a model JSON against rules and firms")
    p.add_argument("--model", required=True)
    p.add_argument("--rules", default=None)
    p.add_argument("--firms", required=True)
    add_json(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("emit-smt", help="emit the problem as an SMT-LIB 2.6 document")
    p.add_argument("--dataset", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--output", "-o", default=None)
    add_solver_args(p); add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_emit_smt)

    p = sub.add_parser("import-smt-model", help="parse external solver output into a model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--smt-output", required=True, help="file with the solver's sat+model text")
    p.add_argument("--save", action="store_true")
    add_solver_args(p); add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_import_smt_model)

    p = sub.add_parser("diff", help="diff two registered models")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    add_data_dir(p); add_json(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("bins", help="print a hex-bin layer (byte-identical to the API body)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--metric", default="firm_count", choices=["firm_count", "cash_flow"])
    p.add_argument("--mode", default="absolute", choices=["absolute", "delta"])
    p.add_argument("--model", default=None)
    p.add_argument("--hide-unrepresented", action="store_true")
    add_data_dir(p)
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--jobs", type=int, default=2, help="solver job parallelism")
    add_data_dir(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RuleSyntaxError as e:
        _eprint(f"rule error: {e}")
        return 1
    except (DomainError, SchemaError, SolveError, SmtSyntaxError, BadRequest, KeyError) as e:
        message = e.args[0] if e.args else e
        _eprint(f"error: {message}")
        return 1
    except FileNotFoundError as e:
        _eprint(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
