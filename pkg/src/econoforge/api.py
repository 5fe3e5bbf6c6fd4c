"""HTTP facade over datasets, aggregation layers, flows, models and solve jobs.

All GET endpoints are pure reads over immutable snapshots: identical requests
return byte-identical bodies until a model is registered (every body carries
the registry ``version`` hash so clients can detect staleness). Solves run
asynchronously on a small in-process executor and are polled via /jobs/{id};
a completed job registers its model for immediate selection.

Dataset mutation happens via the CLI only; the API has no ingest endpoints.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import payloads
from .core import DomainError, Provenance, TransactionModel
from .hexgrid import GridError, HexIndex
from .jobs import JobError, JobManager
from .payloads import BadRequest, to_json_bytes
from .rules import ConstraintSet, NonNegativity, RuleSyntaxError, io_table_to_constraints, parse_rules
from .smtlib import emit_smtlib
from .solver import SolveCancelled, SolveError, SolveStatus, SolverParams, solve_heuristic
from .store import (
    Dataset,
    SchemaError,
    load_dataset,
    model_from_json,
    model_to_json,
    save_model,
)


class NotFound(KeyError):
    pass


class Conflict(ValueError):
    pass


class ParseFailure(ValueError):
    def __init__(self, errors: list[dict]):
        self.errors = errors
        super().__init__("rule parse failure")


class ServiceState:
    """Datasets, model registry, job queue and the response cache."""

    def __init__(self, data_dir: str | Path, parallelism: int = 2):
        self.data_dir = Path(data_dir)
        self.datasets: dict[str, Dataset] = {}
        self.models: dict[str, TransactionModel] = {}
        self.rules_text: dict[str, str] = {}  # model_id -> DSL source it was solved from
        self.jobs = JobManager(parallelism)
        self._lock = threading.Lock()
        self._cache: dict[tuple, bytes] = {}
        self._version: str | None = None
        self._load_all()

    # -- loading ------------------------------------------------------------

    def _load_all(self) -> None:
        if not self.data_dir.exists():
            return
        for child in sorted(self.data_dir.iterdir()):
            if not (child / "manifest.json").exists():
                continue
            ds = load_dataset(child)
            self.datasets[ds.dataset_id] = ds
            models_dir = child / "models"
            if models_dir.exists():
                for model_file in sorted(models_dir.glob("*.json")):
                    model = model_from_json(json.loads(model_file.read_text(encoding="utf-8")))
                    self.models[model.model_id] = model
                    rules_file = child / "rules" / f"{model.model_id}.rules"
                    if rules_file.exists():
                        self.rules_text[model.model_id] = rules_file.read_text(encoding="utf-8")

    # -- registry -----------------------------------------------------------

    def dataset(self, dataset_id: str) -> Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            raise NotFound(f"unknown dataset {dataset_id!r}")
        return ds

    def model(self, model_id: str) -> TransactionModel:
        model = self.models.get(model_id)
        if model is None:
            raise NotFound(f"unknown model {model_id!r}")
        return model

    def register_model(self, model: TransactionModel, rules: str | None = None,
                       persist: bool = True) -> None:
        with self._lock:
            if model.model_id in self.models:
                raise Conflict(f"model {model.model_id!r} already exists")
            ds = self.datasets.get(model.dataset_id)
            if ds is None:
                raise NotFound(f"unknown dataset {model.dataset_id!r}")
            model.check_endpoints(ds.firm_ids(model.year))
            self.models[model.model_id] = model
            if rules is not None:
                self.rules_text[model.model_id] = rules
            if persist:
                ds_dir = self.data_dir / model.dataset_id
                (ds_dir / "models").mkdir(parents=True, exist_ok=True)
                save_model(model, ds_dir / "models" / f"{model.model_id}.json")
                if rules is not None:
                    (ds_dir / "rules").mkdir(parents=True, exist_ok=True)
                    (ds_dir / "rules" / f"{model.model_id}.rules").write_text(rules, encoding="utf-8")
            self._version = None
            self._cache.clear()

    @property
    def version(self) -> str:
        with self._lock:
            if self._version is None:
                h = hashlib.sha256()
                for dataset_id in sorted(self.datasets):
                    h.update(dataset_id.encode())
                    h.update(json.dumps(self.datasets[dataset_id].manifest, sort_keys=True).encode())
                for model_id in sorted(self.models):
                    h.update(model_id.encode())
                self._version = h.hexdigest()[:16]
            return self._version

    # -- cached canonical responses ------------------------------------------

    def cached(self, key: tuple, build) -> bytes:
        version = self.version
        full_key = (version,) + key
        with self._lock:
            hit = self._cache.get(full_key)
        if hit is not None:
            return hit
        payload = build()
        payload["version"] = version
        body = to_json_bytes(payload)
        with self._lock:
            self._cache[full_key] = body
        return body

    # -- solving --------------------------------------------------------------

    def parse_rules_checked(self, text: str, dataset_id: str | None) -> ConstraintSet:
        registry = self.dataset(dataset_id).registry if dataset_id else None
        try:
            return parse_rules(text, registry)
        except RuleSyntaxError as e:
            raise ParseFailure([{"line": e.line, "col": e.col, "message": e.message}]) from e

    def submit_solve(self, dataset_id: str, year: int, rules: str,
                     params: SolverParams, include_io_totals: bool = False):
        ds = self.dataset(dataset_id)
        if year not in ds.years:
            raise BadRequest(f"dataset {dataset_id} has no year {year}")
        cs = self.parse_rules_checked(rules, dataset_id)
        if include_io_totals:
            table = ds.io_tables.get(year)
            if table is None:
                raise BadRequest(f"dataset {dataset_id} has no IO table for {year}")
            totals = ConstraintSet(tuple([NonNegativity()] + io_table_to_constraints(table)))
            cs = cs.merged_with(totals)
        firms = ds.firms(year)

        def work(job) -> None:
            def on_progress(stage: str, iteration: int, residual: float) -> None:
                job.progress.update({"stage": stage, "iteration": iteration,
                                     "residual": residual if residual != float("inf") else None})

            if not cs.sector_totals and not cs.fixed_edges:
                # nothing to allocate: the trivial zero-edge model
                model = TransactionModel(
                    model_id=f"m-empty-{cs.set_id}-{dataset_id}-{year}",
                    dataset_id=dataset_id, year=year, constraint_set_id=cs.set_id,
                    edges=(), provenance=Provenance.HEURISTIC_SOLVER,
                )
                from .validator import validate
                model = dataclasses.replace(model, residuals=validate(model, firms, cs))
                try:
                    self.register_model(model, rules)
                except Conflict:
                    pass  # identical re-solve; reuse the registered model
                job.result_model_id = model.model_id
                self.jobs.transition(job, "done")
                return
            try:
                model, report = solve_heuristic(
                    firms, cs, params, dataset_id=dataset_id, year=year,
                    progress=on_progress, should_cancel=job.cancel_event.is_set,
                )
            except SolveCancelled:
                return  # status already set by cancel()
            if job.cancel_event.is_set():
                return  # finished the race but the job is cancelled; discard
            if report.status is SolveStatus.INFEASIBLE:
                job.infeasible_witnesses = report.infeasible_witnesses
                job.progress["iterations"] = report.iterations
                self.jobs.transition(job, "infeasible")
                return
            model = dataclasses.replace(model, residuals=report.residuals)
            try:
                self.register_model(model, rules)
            except Conflict:
                pass
            job.result_model_id = model.model_id
            job.progress.update({"iterations": report.iterations,
                                 "status": report.status.value,
                                 "wall_time_ms": report.wall_time_ms})
            self.jobs.transition(job, "done")

        return self.jobs.submit(work)


def _json_response(body: bytes, status_code: int = 200) -> Response:
    return Response(content=body, status_code=status_code, media_type="application/json")


def _error(status_code: int, message: str) -> Response:
    return _json_response(to_json_bytes({"error": message}), status_code)


def create_app(data_dir: str | Path, parallelism: int = 2) -> FastAPI:
    state = ServiceState(data_dir, parallelism)
    app = FastAPI(title="econoforge", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.exception_handler(NotFound)
    async def _not_found(_: Request, exc: NotFound):
        return _error(404, str(exc.args[0] if exc.args else exc))

    @app.exception_handler(BadRequest)
    async def _bad_request(_: Request, exc: BadRequest):
        return _error(400, str(exc))

    @app.exception_handler(DomainError)
    async def _domain(_: Request, exc: DomainError):
        return _error(400, str(exc))

    @app.exception_handler(GridError)
    async def _grid(_: Request, exc: GridError):
        return _error(400, str(exc))

    @app.exception_handler(SchemaError)
    async def _schema(_: Request, exc: SchemaError):
        return _error(422, str(exc))

    @app.exception_handler(Conflict)
    async def _conflict(_: Request, exc: Conflict):
        return _error(409, str(exc))

    @app.exception_handler(ParseFailure)
    async def _parse_failure(_: Request, exc: ParseFailure):
        return _json_response(to_json_bytes({"errors": exc.errors}), 422)

    @app.exception_handler(SolveError)
    async def _solve_error(_: Request, exc: SolveError):
        return _error(400, str(exc))

    @app.get("/datasets")
    def list_datasets():
        body = state.cached(("datasets",), lambda: {
            "datasets": [payloads.summary_payload(state.datasets[k]) for k in sorted(state.datasets)],
        })
        return _json_response(body)

    @app.get("/datasets/{dataset_id}/summary")
    def dataset_summary_endpoint(dataset_id: str):
        ds = state.dataset(dataset_id)
        body = state.cached(("summary", dataset_id), lambda: payloads.summary_payload(ds))
        return _json_response(body)

    @app.get("/datasets/{dataset_id}/bins")
    def bins(dataset_id: str, year: int, resolution: int, metric: str = "firm_count",
             mode: str = "absolute", model: str | None = None,
             hide_unrepresented: bool = False):
        ds = state.dataset(dataset_id)
        model_obj = state.model(model) if model else None
        key = ("bins", dataset_id, year, resolution, metric, mode, model, hide_unrepresented)
        body = state.cached(key, lambda: payloads.bins_payload(
            ds, year, resolution, metric, mode, model_obj, hide_unrepresented))
        return _json_response(body)

    @app.get("/datasets/{dataset_id}/regions")
    def regions(dataset_id: str, year: int, level: int, metric: str = "firm_count",
                normalize: bool = False):
        ds = state.dataset(dataset_id)
        key = ("regions", dataset_id, year, level, metric, normalize)
        body = state.cached(key, lambda: payloads.regions_payload(ds, year, level, metric, normalize))
        return _json_response(body)

    @app.get("/models")
    def list_models():
        body = state.cached(("models",), lambda: {
            "models": [payloads.model_summary_payload(state.models[k]) for k in sorted(state.models)],
        })
        return _json_response(body)

    @app.post("/models", status_code=201)
    async def import_model(request: Request):
        obj = await request.json()
        model = model_from_json(obj)
        state.register_model(model)
        return _json_response(to_json_bytes({"model_id": model.model_id, "version": state.version}), 201)

    @app.get("/models/{model_id}")
    def get_model(model_id: str):
        model = state.model(model_id)
        body = state.cached(("model", model_id), lambda: model_to_json(model))
        return _json_response(body)

    @app.get("/models/{model_id}/flows")
    def model_flows(model_id: str, bin: str, resolution: int, include_internal: bool = False):
        model = state.model(model_id)
        ds = state.dataset(model.dataset_id)
        try:
            q_s, r_s = bin.split(":", 1)
            selection = HexIndex(resolution, int(q_s), int(r_s))
        except (ValueError, GridError) as e:
            raise BadRequest(f"bad bin parameter {bin!r} (expected 'q:r'): {e}") from e
        key = ("flows", model_id, bin, resolution, include_internal)
        body = state.cached(key, lambda: payloads.flows_payload(ds, model, selection, include_internal))
        return _json_response(body)

    @app.get("/models/{model_id}/diff/{other_id}")
    def model_diff(model_id: str, other_id: str):
        model_a = state.model(model_id)
        model_b = state.model(other_id)
        ds = state.dataset(model_a.dataset_id)
        key = ("diff", model_id, other_id)
        body = state.cached(key, lambda: payloads.diff_payload(
            model_a, model_b, ds.firms(model_a.year)))
        return _json_response(body)

    @app.get("/models/{model_id}/export/smtlib")
    def export_smtlib(model_id: str):
        model = state.model(model_id)
        ds = state.dataset(model.dataset_id)
        rules = state.rules_text.get(model_id)
        if rules is None:
            raise NotFound(f"model {model_id!r} has no stored rule source (imported models cannot be re-encoded)")
        cs = state.parse_rules_checked(rules, model.dataset_id)
        doc = emit_smtlib(ds.firms(model.year), cs)
        return Response(content=doc, media_type="text/plain",
                        headers={"Content-Disposition": f'attachment; filename="{model_id}.smt2"'})

    @app.post("/constraints/parse")
    async def constraints_parse(request: Request):
        obj = await request.json()
        text = obj.get("rules", "")
        dataset_id = obj.get("dataset_id")
        cs = state.parse_rules_checked(text, dataset_id)
        payload = payloads.constraints_payload(cs)
        payload["version"] = state.version
        return _json_response(to_json_bytes(payload))

    @app.post("/models/solve", status_code=202)
    async def solve(request: Request):
        obj = await request.json()
        params_obj = obj.get("params") or {}
        params = SolverParams(
            max_iterations=int(params_obj.get("max_iterations", 200)),
            tolerance=float(params_obj.get("tolerance", 1e-6)),
            seed=int(params_obj.get("seed", 0)),
        )
        job = state.submit_solve(
            dataset_id=obj.get("dataset_id", ""),
            year=int(obj.get("year", 0)),
            rules=obj.get("rules", ""),
            params=params,
            include_io_totals=bool(obj.get("include_io_totals", False)),
        )
        return _json_response(to_json_bytes({"job_id": job.job_id, "version": state.version}), 202)

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise NotFound(f"unknown job {job_id!r}")
        payload = job.snapshot()
        payload["version"] = state.version
        return _json_response(to_json_bytes(payload))

    @app.post("/jobs/{job_id}/cancel")
    def job_cancel(job_id: str):
        try:
            job = state.jobs.cancel(job_id)
        except KeyError:
            raise NotFound(f"unknown job {job_id!r}") from None
        except JobError as e:
            return _error(409, str(e))
        payload = job.snapshot()
        payload["version"] = state.version
        return _json_response(to_json_bytes(payload))

    return app
