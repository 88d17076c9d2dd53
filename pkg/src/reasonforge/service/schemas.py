"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class RunRequest(BaseModel):
    config_path: str | None = None
    config: dict[str, Any] | None = None
    stages: list[str] | None = None
    resume: bool = False
    wait: bool = True


class ExportInfo(BaseModel):
    count: int
    checksum: str
    path: str


class RunInfo(BaseModel):
    run_id: str
    state: str  # queued | running | done | failed
    output_dir: str | None = None
    stages_run: list[str] = Field(default_factory=list)
    export: ExportInfo | None = None
    error: str | None = None


class RunListResponse(BaseModel):
    runs: list[RunInfo] = Field(default_factory=list)


class StatsResponse(BaseModel):
    output_dir: str
    ledger: dict[str, Any]
    report: str


class SampleRequest(BaseModel):
    dataset_path: str
    mode: Literal["total_n", "problem_fraction", "case_fraction"]
    amount: float
    seed: int = 0
    output_path: str | None = None


class SampleResponse(BaseModel):
    count: int
    output_path: str | None = None
    checksum: str | None = None
    pair_ids_preview: list[str] = Field(default_factory=list)


class ValidateRequest(BaseModel):
    corpus_path: str
    strict: bool = False


class ValidateIssue(BaseModel):
    line_no: int
    reason: str
    message: str


class ValidateResponse(BaseModel):
    count: int
    issues: list[ValidateIssue] = Field(default_factory=list)
