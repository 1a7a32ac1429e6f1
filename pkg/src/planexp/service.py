"""HTTP facade over the pipeline for the console and scripted clients.

Runs live under ``<data_dir>/runs/<corpus_id>`` as plain pipeline run
directories.  Cheap stages execute synchronously inside the request;
refinement runs as a background job whose status is polled via the run
resource.  The OpenAPI document is served at ``/schema``.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from .experiences import CorpusError, GenConfig, generate_synthetic, records_from_json
from .pipeline import STAGES, PipelineError, RunDir, StageOrderError
from .refine import BackendError, make_backend

MAX_BODY_BYTES = 10 * 1024 * 1024


class GenConfigModel(BaseModel):
    tray_size: int = 12
    doubt_prob: float = 0.25
    duration_min: float = 1.5
    duration_max: float = 3.5
    human_speed_factor: float = 1.5


class GenerateSpec(BaseModel):
    seed: int
    n: int = Field(ge=1)
    config: GenConfigModel = GenConfigModel()


class CreateRunRequest(BaseModel):
    experiences: list | None = None
    generate: GenerateSpec | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.experiences is None) == (self.generate is None):
            raise ValueError("provide exactly one of 'experiences' or 'generate'")
        return self


class AdvanceRequest(BaseModel):
    stage: str
    params: dict[str, Any] = Field(default_factory=dict)


class FollowupRequest(BaseModel):
    request: str
    level: int = Field(default=3, ge=1, le=3)


class RunRegistry:
    """Run directories plus the in-process refinement job table."""

    def __init__(self, data_dir) -> None:
        self.root = Path(data_dir) / "runs"
        self.root.mkdir(parents=True, exist_ok=True)
        self.jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    def create(self) -> tuple[str, RunDir]:
        corpus_id = uuid.uuid4().hex[:12]
        return corpus_id, RunDir(self.root / corpus_id)

    def get(self, corpus_id: str) -> RunDir:
        path = self.root / corpus_id
        if not (path / "state.json").exists():
            raise HTTPException(404, f"unknown run {corpus_id!r}")
        return RunDir(path)

    def ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "state.json").exists())

    def job(self, corpus_id: str) -> dict | None:
        return self.jobs.get(corpus_id)

    def start_job(self, corpus_id: str, target) -> None:
        with self._lock:
            job = self.jobs.get(corpus_id)
            if job and job["status"] == "running":
                raise HTTPException(409, "refinement job already running")
            self.jobs[corpus_id] = {"status": "running", "error": None}

        def _run():
            try:
                target()
                self.jobs[corpus_id] = {"status": "done", "error": None}
            except Exception as exc:  # job errors surface via polling
                self.jobs[corpus_id] = {"status": "failed", "error": str(exc)}

        threading.Thread(target=_run, daemon=True).start()


def _artifacts(run: RunDir) -> dict:
    names = (
        "corpus.json",
        "properties.json",
        "intervals.json",
        "store.nt",
        "labels.json",
        "summary.json",
        "narratives.jsonl",
        "explanations.jsonl",
        "sessions.json",
        "report.json",
        "report.txt",
    )
    return {name: (run.path / name).exists() for name in names}


def run_state(corpus_id: str, run: RunDir, registry: RunRegistry) -> dict:
    state = run.state()
    out = {
        "corpus_id": corpus_id,
        "stage": state["stage"],
        "params": state.get("params", {}),
        "artifacts": _artifacts(run),
        "job": registry.job(corpus_id),
    }
    if run.stage_index() >= STAGES.index("classified"):
        out["n_plans"] = len(run.properties())
        out["intervals"] = _read_json(run, "intervals.json")
    if run.stage_index() >= STAGES.index("evaluated"):
        out["report"] = run.report()
    return out


def _read_json(run: RunDir, name: str):
    import json

    return json.loads((run.path / name).read_text("utf-8"))


def create_app(
    data_dir,
    remote_base_url: str | None = None,
    remote_model: str | None = None,
    remote_token: str | None = None,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    app = FastAPI(title="planexp service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = RunRegistry(data_dir)
    app.state.registry = registry

    def backend_for(name: str):
        try:
            return make_backend(
                name, base_url=remote_base_url, model=remote_model, token=remote_token
            )
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc

    @app.middleware("http")
    async def reject_oversized(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_BODY_BYTES:
            return JSONResponse({"detail": "payload too large"}, status_code=413)
        return await call_next(request)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/schema")
    def schema() -> JSONResponse:
        return JSONResponse(app.openapi())

    @app.post("/runs", status_code=201)
    def create_run(req: CreateRunRequest) -> dict:
        corpus_id, run = registry.create()
        try:
            if req.experiences is not None:
                run.ingest_records(records_from_json(req.experiences))
            else:
                spec = req.generate
                cfg = GenConfig(**spec.config.model_dump())
                run.ingest_records(generate_synthetic(spec.seed, spec.n, cfg))
                run._write_state("ingested", seed=spec.seed)
        except CorpusError as exc:
            raise HTTPException(400, str(exc)) from exc
        return run_state(corpus_id, run, registry)

    @app.get("/runs")
    def list_runs() -> list[dict]:
        return [run_state(cid, registry.get(cid), registry) for cid in registry.ids()]

    @app.get("/runs/{corpus_id}")
    def get_run(corpus_id: str) -> dict:
        return run_state(corpus_id, registry.get(corpus_id), registry)

    @app.post("/runs/{corpus_id}/advance")
    def advance(corpus_id: str, req: AdvanceRequest) -> dict:
        run = registry.get(corpus_id)
        if req.stage not in STAGES:
            raise HTTPException(422, f"unknown stage {req.stage!r}")
        try:
            run.check_next(req.stage)
        except StageOrderError as exc:
            raise HTTPException(409, str(exc)) from exc
        params = req.params
        try:
            if req.stage == "classified":
                alpha = params.get("alpha")
                if not isinstance(alpha, (int, float)) or not 0 < float(alpha) < 1:
                    raise HTTPException(422, "classification needs alpha inside (0, 1)")
                run.classify(float(alpha))
            elif req.stage == "inferred":
                run.infer()
            elif req.stage == "narrated":
                spec = params.get("specificity", "all")
                if spec == "all":
                    levels: tuple[int, ...] = (1, 2, 3)
                elif spec in (1, 2, 3):
                    levels = (int(spec),)
                else:
                    raise HTTPException(422, f"specificity must be 1, 2, 3 or 'all', got {spec!r}")
                run.narrate(levels)
            elif req.stage == "refined":
                name = params.get("backend", "deterministic")
                if name not in ("deterministic", "remote"):
                    raise HTTPException(422, f"unknown backend {name!r}")
                backend = backend_for(name)
                workers = int(params.get("max_workers", 4))
                registry.start_job(
                    corpus_id, lambda: run.refine_all(backend, name, max_workers=workers)
                )
            elif req.stage == "evaluated":
                mu0 = params.get("mu0")
                if not isinstance(mu0, (int, float)):
                    raise HTTPException(422, "evaluation needs a numeric mu0")
                run.evaluate(float(mu0))
        except StageOrderError as exc:
            raise HTTPException(409, str(exc)) from exc
        except (CorpusError, PipelineError, ValueError) as exc:
            raise HTTPException(422, str(exc)) from exc
        return run_state(corpus_id, run, registry)

    @app.get("/runs/{corpus_id}/pairs")
    def list_pairs(corpus_id: str) -> list[dict]:
        run = registry.get(corpus_id)
        if run.stage_index() < STAGES.index("narrated"):
            return []
        return run.pairs_overview()

    @app.get("/runs/{corpus_id}/pairs/{pair_id}")
    def get_pair(corpus_id: str, pair_id: str, level: int = Query(default=3, ge=1, le=3)) -> dict:
        run = registry.get(corpus_id)
        if run.stage_index() < STAGES.index("narrated"):
            raise HTTPException(404, f"run {corpus_id!r} has no narrated pairs yet")
        try:
            return run.pair_detail(pair_id, level)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.post("/runs/{corpus_id}/pairs/{pair_id}/followup")
    def followup(corpus_id: str, pair_id: str, req: FollowupRequest) -> dict:
        run = registry.get(corpus_id)
        if not req.request.strip():
            raise HTTPException(400, "follow-up request must be non-empty")
        state = run.state()
        name = state.get("params", {}).get("backend", "deterministic")
        backend = backend_for(name)
        try:
            explanation = run.follow_up(pair_id, req.level, req.request, backend)
        except (PipelineError, KeyError) as exc:
            raise HTTPException(404, str(exc)) from exc
        except BackendError as exc:
            raise HTTPException(502, str(exc)) from exc
        return {
            "pair_id": pair_id,
            "level": req.level,
            "revision": explanation.revision,
            "text": explanation.text,
            "detail": run.pair_detail(pair_id, req.level),
        }

    return app
