"""FastAPI service wrapping the pipeline.

Pipeline runs are long-lived, so POST /runs registers a run and either
executes it inline (``wait: true``, the default) or on a background
thread, with GET /runs/{id} for polling.  Dataset sampling, corpus
validation, and funnel stats are synchronous endpoints over the
pipeline's on-disk artifacts.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query

from .. import __version__
from ..corpus import CorpusError, load_seeds
from ..dataset import load_dataset, report_ledger, sample_subset, subset_preview, write_subset
from ..errors import ConfigurationError, ReasonForgeError
from ..pipeline import PipelineConfig, rebuild_ledger, run_pipeline
from .schemas import (
    ExportInfo,
    HealthResponse,
    RunInfo,
    RunListResponse,
    RunRequest,
    SampleRequest,
    SampleResponse,
    StatsResponse,
    ValidateIssue,
    ValidateRequest,
    ValidateResponse,
)


class _RunRegistry:
    def __init__(self) -> None:
        self._runs: dict[str, RunInfo] = {}
        self._lock = threading.Lock()

    def put(self, info: RunInfo) -> None:
        with self._lock:
            self._runs[info.run_id] = info

    def get(self, run_id: str) -> RunInfo | None:
        with self._lock:
            return self._runs.get(run_id)

    def all(self) -> list[RunInfo]:
        with self._lock:
            return list(self._runs.values())


def _build_config(request: RunRequest) -> PipelineConfig:
    if (request.config_path is None) == (request.config is None):
        raise ConfigurationError("provide exactly one of config_path or config")
    if request.config_path is not None:
        return PipelineConfig.from_file(request.config_path)
    return PipelineConfig.from_dict(request.config or {})


def create_app() -> FastAPI:
    app = FastAPI(title="reasonforge", version=__version__)
    registry = _RunRegistry()

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(version=__version__)

    def _execute(run_id: str, config: PipelineConfig, request: RunRequest) -> RunInfo:
        info = registry.get(run_id)
        assert info is not None
        info = info.model_copy(update={"state": "running"})
        registry.put(info)
        try:
            result = run_pipeline(config, stages=request.stages, resume=request.resume)
        except Exception as exc:  # recorded, surfaced via state=failed
            info = info.model_copy(
                update={"state": "failed", "error": f"{type(exc).__name__}: {exc}"}
            )
            registry.put(info)
            return info
        export = None
        if result.export is not None:
            export = ExportInfo(
                count=result.export.count,
                checksum=result.export.checksum,
                path=result.export.path,
            )
        info = info.model_copy(
            update={
                "state": "done",
                "stages_run": result.stages_run,
                "export": export,
                "output_dir": result.output_dir,
            }
        )
        registry.put(info)
        return info

    @app.post("/runs", response_model=RunInfo)
    def start_run(request: RunRequest) -> RunInfo:
        try:
            config = _build_config(request)
        except ConfigurationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        run_id = uuid.uuid4().hex[:12]
        info = RunInfo(run_id=run_id, state="queued", output_dir=config.output_dir)
        registry.put(info)
        if request.wait:
            return _execute(run_id, config, request)
        thread = threading.Thread(
            target=_execute, args=(run_id, config, request), daemon=True
        )
        thread.start()
        return info

    @app.get("/runs", response_model=RunListResponse)
    def list_runs() -> RunListResponse:
        return RunListResponse(runs=registry.all())

    @app.get("/runs/{run_id}", response_model=RunInfo)
    def get_run(run_id: str) -> RunInfo:
        info = registry.get(run_id)
        if info is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return info

    @app.post("/sample", response_model=SampleResponse)
    def sample(request: SampleRequest) -> SampleResponse:
        if not Path(request.dataset_path).exists():
            raise HTTPException(
                status_code=404, detail=f"dataset not found: {request.dataset_path}"
            )
        records = load_dataset(request.dataset_path)
        try:
            subset = sample_subset(records, request.mode, request.amount, request.seed)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        checksum = None
        if request.output_path:
            checksum = write_subset(subset, request.output_path)
        return SampleResponse(
            count=len(subset),
            output_path=request.output_path,
            checksum=checksum,
            pair_ids_preview=subset_preview(subset),
        )

    @app.post("/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        if not Path(request.corpus_path).exists():
            raise HTTPException(
                status_code=404, detail=f"corpus not found: {request.corpus_path}"
            )
        try:
            loaded = load_seeds(request.corpus_path, strict=request.strict)
        except CorpusError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ReasonForgeError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ValidateResponse(
            count=loaded.count,
            issues=[
                ValidateIssue(line_no=i.line_no, reason=i.reason, message=i.message)
                for i in loaded.issues
            ],
        )

    @app.get("/stats", response_model=StatsResponse)
    def stats(output_dir: str = Query(...)) -> StatsResponse:
        if not Path(output_dir).is_dir():
            raise HTTPException(
                status_code=404, detail=f"output dir not found: {output_dir}"
            )
        ledger = rebuild_ledger(output_dir)
        text, data = report_ledger(ledger)
        return StatsResponse(output_dir=output_dir, ledger=data, report=text)

    return app
