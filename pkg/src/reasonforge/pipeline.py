"""Pipeline orchestration: staged, checkpointed, resumable runs.

Stages run in a fixed order; each stage owns one JSONL checkpoint file
and appends exactly one record per finished item, so an interrupted run
resumes by recomputing only the missing items.  A stage whose file is
rebuilt from scratch invalidates every successor stage's file; a stage
that merely extends its file leaves successors alone (recorded items
never change once written).  Item-level faults (quality rejections,
provider failures) become failure records and the run continues;
environment faults (bad config, unscripted mocks) abort the run.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Any, Callable

from . import storage
from .casegen import (
    DEFAULT_CASE_CAP,
    DEFAULT_MAX_LITERAL_BYTES,
    DEFAULT_PER_BATCH,
    DEFAULT_SAMPLES,
    TestCase,
    curate_cases,
    generate_case_batches,
)
from .checks import (
    DEFAULT_ERROR_MARKERS,
    consistency_check,
    execution_check,
    is_retryable,
    solvability_check,
)
from .corpus import SeedProblem, load_seeds, seed_from_record, seed_to_record
from .dataset import (
    ExportSummary,
    PipelineLedger,
    assemble_and_export,
    load_dataset,
    report_ledger,
    verify_provenance,
)
from .errors import ConfigurationError, DatasetIntegrityError, ItemRejected, ProviderFailure
from .gateway import Gateway, asset_versions, build_gateway, load_assets
from .problems import DEFAULT_THEMES, ReasoningProblem, make_rp_id, pick_theme, synthesize_problem
from .reasoning import ReasoningPair, synthesize_reasoning
from .storage import STAGE_FILES, STAGE_ORDER, StageAppender, read_jsonl, stage_path
from .tracing import (
    ExecutionRecord,
    InstrumentedCode,
    ParsedTrace,
    ResourceLimits,
    build_runner,
    execute_code,
    instrument_solution,
    parse_trace,
)

# fault-injection hook for crash-recovery tests: hard-exit the process
# after this many items have been recorded by the execute stage
FAULT_EXIT_ENV = "REASONFORGE_EXIT_AFTER_EXECUTIONS"
_FAULT_EXIT_CODE = 86

LLM_STAGES = frozenset(
    ("gen_cases", "synth_problems", "check_solvable", "gen_code", "check_consistent", "synth_reasoning")
)
# execute may also call the gateway when it re-instruments after a hard failure
_GATEWAY_STAGES = LLM_STAGES | {"execute"}


@dataclass
class PipelineConfig:
    corpus_path: str
    output_dir: str
    provider: dict[str, Any] | str | None = None
    prompt_dir: str | None = None
    per_batch: int = DEFAULT_PER_BATCH
    samples: int = DEFAULT_SAMPLES
    case_cap: int = DEFAULT_CASE_CAP
    max_literal_bytes: int = DEFAULT_MAX_LITERAL_BYTES
    wall_ms: int = 10_000
    memory_bytes: int = 512 * 1024 * 1024
    stdout_cap_bytes: int = 64 * 1024
    max_trace_lines: int = 200
    grace_ms: int = 500
    execution_resample_limit: int = 3
    reasoning_resample_limit: int = 2
    format_resample_limit: int = 1
    judge_resample_limit: int = 1
    leakage_threshold: int = 2
    themes: tuple[str, ...] = DEFAULT_THEMES
    error_markers: tuple[str, ...] = DEFAULT_ERROR_MARKERS
    seed: int = 0
    workers: int = 4
    interpreter: str | None = None
    harness_cmd: list[str] | None = None
    strict_corpus: bool = False
    base_dir: str | None = None  # anchor for relative paths in file-based configs

    def __post_init__(self) -> None:
        self.themes = tuple(self.themes)
        self.error_markers = tuple(self.error_markers)
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not self.themes:
            raise ConfigurationError("theme pool must be non-empty")
        for name in (
            "per_batch",
            "samples",
            "case_cap",
            "max_literal_bytes",
            "wall_ms",
            "memory_bytes",
            "stdout_cap_bytes",
            "max_trace_lines",
        ):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in (
            "execution_resample_limit",
            "reasoning_resample_limit",
            "format_resample_limit",
            "judge_resample_limit",
            "leakage_threshold",
            "grace_ms",
        ):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")

    @property
    def limits(self) -> ResourceLimits:
        return ResourceLimits(
            wall_ms=self.wall_ms,
            memory_bytes=self.memory_bytes,
            stdout_cap_bytes=self.stdout_cap_bytes,
            max_trace_lines=self.max_trace_lines,
            grace_ms=self.grace_ms,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | None = None) -> "PipelineConfig":
        known = {f.name for f in dataclass_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(base_dir=base_dir, **{k: v for k, v in data.items() if k != "base_dir"})
        if base_dir:
            cfg.corpus_path = str(_resolve(base_dir, cfg.corpus_path))
            cfg.output_dir = str(_resolve(base_dir, cfg.output_dir))
            if cfg.prompt_dir:
                cfg.prompt_dir = str(_resolve(base_dir, cfg.prompt_dir))
            if isinstance(cfg.provider, str):
                cfg.provider = str(_resolve(base_dir, cfg.provider))
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load pipeline config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("pipeline config must be a JSON object")
        return cls.from_dict(data, base_dir=str(Path(path).resolve().parent))

    def fingerprint(self, extra: dict[str, Any] | None = None) -> str:
        """Digest of the content-affecting configuration (everything but
        concurrency and filesystem layout); a change rebuilds stages."""
        content = {
            "per_batch": self.per_batch,
            "samples": self.samples,
            "case_cap": self.case_cap,
            "max_literal_bytes": self.max_literal_bytes,
            "wall_ms": self.wall_ms,
            "memory_bytes": self.memory_bytes,
            "stdout_cap_bytes": self.stdout_cap_bytes,
            "max_trace_lines": self.max_trace_lines,
            "grace_ms": self.grace_ms,
            "execution_resample_limit": self.execution_resample_limit,
            "reasoning_resample_limit": self.reasoning_resample_limit,
            "format_resample_limit": self.format_resample_limit,
            "judge_resample_limit": self.judge_resample_limit,
            "leakage_threshold": self.leakage_threshold,
            "themes": list(self.themes),
            "error_markers": list(self.error_markers),
            "seed": self.seed,
            "extra": extra or {},
        }
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _resolve(base_dir: str, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(base_dir) / p


@dataclass
class PipelineResult:
    output_dir: str
    stages_run: list[str]
    ledger: PipelineLedger
    export: ExportSummary | None = None

    @property
    def report(self) -> str:
        return report_ledger(self.ledger)[0]


def normalize_stages(stages: list[str] | None) -> list[str]:
    if not stages:
        return list(STAGE_ORDER)
    unknown = [s for s in stages if s not in STAGE_ORDER]
    if unknown:
        raise ConfigurationError(f"unknown stages: {unknown}; known: {list(STAGE_ORDER)}")
    return [s for s in STAGE_ORDER if s in set(stages)]


def rebuild_ledger(output_dir: str | Path) -> PipelineLedger:
    """Recount every stage's pass/fail records from its checkpoint file.

    The ledger is always derived from the files, never carried across
    runs, so resumed and uninterrupted runs account identically.
    """
    ledger = PipelineLedger()
    for stage in STAGE_ORDER:
        if stage == "export":
            continue
        path = stage_path(output_dir, stage)
        if not path.exists():
            continue
        for record in read_jsonl(path):
            kind = record.get("kind")
            if kind == "header":
                continue
            if kind == "failure":
                ledger.record_fail(stage, str(record.get("reason", "error")))
            elif stage == "gen_cases":
                curated = record.get("curated", len(record.get("cases", [])))
                ledger.record_pass(stage, int(curated))
                for reason, count in (record.get("rejected_counts") or {}).items():
                    ledger.record_fail(stage, str(reason), int(count))
                parse_failures = int(record.get("parse_failures", 0))
                if parse_failures:
                    ledger.record_fail(stage, "unparseable entry", parse_failures)
            elif kind == "verdict":
                if record.get("passed"):
                    ledger.record_pass(stage)
                else:
                    ledger.record_fail(stage, str(record.get("reason", "failed")))
            else:
                ledger.record_pass(stage)
            if stage == "synth_reasoning" and kind == "pair":
                ledger.record_yield(str(record.get("provenance", {}).get("problem_id", "")))
    return ledger


class _Run:
    def __init__(self, config: PipelineConfig, stages: list[str] | None, resume: bool):
        self.cfg = config
        self.requested = normalize_stages(stages)
        self.resume = resume
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.assets = load_assets(config.prompt_dir)
        self.versions = asset_versions(self.assets)
        self.fingerprint = config.fingerprint({"assets": self.versions})
        self.runner = build_runner(config.harness_cmd, config.interpreter)
        self._gateway: Gateway | None = None
        self.stages_run: list[str] = []
        # loaded stage views
        self.seeds: dict[str, SeedProblem] = {}
        self.cases: dict[str, TestCase] = {}
        self.rps: dict[str, ReasoningProblem] = {}
        self.solvable_pass: set[str] = set()
        self.codes: dict[str, InstrumentedCode] = {}
        self.consistent_pass: set[str] = set()
        self.traces: dict[str, dict[str, Any]] = {}
        self.exec_pass: set[str] = set()
        self.pairs: dict[str, ReasoningPair] = {}

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            if self.cfg.provider is None:
                raise ConfigurationError(
                    "a provider config is required to run synthesis/check stages"
                )
            self._gateway = build_gateway(self.cfg.provider, base_dir=self.cfg.base_dir)
        return self._gateway

    # -- header helpers ---------------------------------------------------

    def _header(self, stage: str, extra: dict[str, Any] | None = None) -> dict[str, Any]:
        record = {
            "kind": "header",
            "stage": stage,
            "seed": self.cfg.seed,
            "config_fingerprint": self.fingerprint,
        }
        if extra:
            record.update(extra)
        return record

    def _header_valid(self, stage: str, records: list[dict[str, Any]], extra: dict[str, Any] | None = None) -> bool:
        if not records:
            return False
        header = records[0]
        if header.get("kind") != "header" or header.get("stage") != stage:
            return False
        if header.get("seed") != self.cfg.seed:
            return False
        if header.get("config_fingerprint") != self.fingerprint:
            return False
        for key, value in (extra or {}).items():
            if header.get(key) != value:
                return False
        return True

    def _delete_successors(self, stage: str) -> None:
        for later in storage.successors(stage):
            path = stage_path(self.out, later)
            if path.exists():
                path.unlink()
        if stage != "export":
            for name in (storage.EXPORT_SUMMARY_FILE, storage.LEDGER_FILE, storage.REPORT_FILE):
                extra = self.out / name
                if extra.exists():
                    extra.unlink()

    # -- generic incremental stage runner ---------------------------------

    def _run_incremental(
        self,
        stage: str,
        items: dict[str, Any],
        fn: Callable[[str, Any], dict[str, Any]],
    ) -> None:
        path = stage_path(self.out, stage)
        done: set[str] = set()
        if path.exists():
            invalid = True
            if self.resume:
                records = read_jsonl(path)
                if self._header_valid(stage, records):
                    invalid = False
                    done = {
                        str(r["id"])
                        for r in records
                        if r.get("kind") != "header" and "id" in r
                    }
            if invalid:
                path.unlink()
        todo = {key: items[key] for key in sorted(items) if key not in done}
        created = not path.exists()
        if not created and not todo:
            return  # fully checkpointed; leave the file untouched
        self.stages_run.append(stage)
        fault_limit = None
        if stage == "execute":
            raw = os.environ.get(FAULT_EXIT_ENV, "")
            fault_limit = int(raw) if raw.isdigit() else None
        appended = 0
        with StageAppender(path) as appender:
            if created:
                appender.append(self._header(stage))
            guarded = _guard(fn)
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                futures = {
                    pool.submit(guarded, key, payload): key for key, payload in todo.items()
                }
                for future in as_completed(futures):
                    appender.append(future.result())
                    appended += 1
                    if fault_limit is not None and appended >= fault_limit:
                        appender.close()
                        os._exit(_FAULT_EXIT_CODE)
        if created:
            self._delete_successors(stage)

    # -- views -------------------------------------------------------------

    def _require_view(self, stage: str, consumer: str) -> list[dict[str, Any]]:
        path = stage_path(self.out, stage)
        if not path.exists():
            raise ConfigurationError(
                f"stage {consumer!r} needs the output of stage {stage!r} "
                f"({path.name}); run that stage first"
            )
        return read_jsonl(path)

    def _load_seeds_view(self, consumer: str) -> None:
        self.seeds = {}
        for record in self._require_view("ingest", consumer):
            if record.get("kind") == "seed":
                seed = seed_from_record(record)
                self.seeds[seed.problem_id] = seed

    def _load_cases_view(self, consumer: str) -> None:
        self.cases = {}
        merged: dict[str, dict[str, Any]] = {}
        for record in self._require_view("gen_cases", consumer):
            if record.get("kind") == "problem_cases":
                merged[str(record["id"])] = record  # last record wins
        for record in merged.values():
            for case in record.get("cases", []):
                self.cases[str(case["case_id"])] = TestCase(
                    case_id=str(case["case_id"]),
                    problem_id=str(case["problem_id"]),
                    input_literal=str(case["input_literal"]),
                    canonical_form_text=str(case.get("canonical_form", "")),
                    batch_index=int(case.get("batch_index", 0)),
                    status="curated",
                )

    def _load_rps_view(self, consumer: str) -> None:
        self.rps = {}
        for record in self._require_view("synth_problems", consumer):
            if record.get("kind") == "problem":
                self.rps[str(record["id"])] = ReasoningProblem(
                    rp_id=str(record["id"]),
                    problem_id=str(record["problem_id"]),
                    case_id=str(record["case_id"]),
                    text=str(record["text"]),
                    background_theme=str(record.get("background_theme", "")),
                )

    def _load_verdicts_view(self, stage: str, consumer: str) -> set[str]:
        passed: set[str] = set()
        for record in self._require_view(stage, consumer):
            if record.get("kind") == "verdict" and record.get("passed"):
                passed.add(str(record["id"]))
        return passed

    def _load_codes_view(self, consumer: str) -> None:
        self.codes = {}
        for record in self._require_view("gen_code", consumer):
            if record.get("kind") == "code":
                self.codes[str(record["id"])] = InstrumentedCode(
                    code_id=str(record["code_id"]),
                    rp_id=str(record["id"]),
                    source_text=str(record["source_text"]),
                    attempt=int(record.get("attempt", 0)),
                )

    def _load_traces_view(self, consumer: str) -> None:
        self.traces = {}
        for record in self._require_view("execute", consumer):
            if record.get("kind") == "trace":
                self.traces[str(record["id"])] = record

    def _load_pairs_view(self, consumer: str) -> None:
        self.pairs = {}
        for record in self._require_view("synth_reasoning", consumer):
            if record.get("kind") == "pair":
                self.pairs[str(record["id"])] = ReasoningPair(
                    pair_id=str(record["pair_id"]),
                    input_text=str(record["input"]),
                    output_text=str(record["output"]),
                    gold_answer=str(record["gold_answer"]),
                    provenance=dict(record.get("provenance", {})),
                )

    # -- stages ------------------------------------------------------------

    def stage_ingest(self) -> None:
        path = stage_path(self.out, "ingest")
        corpus = Path(self.cfg.corpus_path)
        if not corpus.exists():
            raise ConfigurationError(f"corpus file not found: {corpus}")
        corpus_fp = hashlib.sha256(corpus.read_bytes()).hexdigest()[:16]
        extra = {"corpus_fingerprint": corpus_fp}
        if path.exists():
            if self.resume and self._header_valid("ingest", read_jsonl(path), extra):
                return
        loaded = load_seeds(str(corpus), strict=self.cfg.strict_corpus)
        records: list[dict[str, Any]] = [self._header("ingest", extra)]
        for seed in loaded.seeds:
            records.append({"kind": "seed", "id": seed.problem_id, **seed_to_record(seed)})
        for issue in loaded.issues:
            records.append(
                {
                    "kind": "failure",
                    "id": f"line{issue.line_no}",
                    "reason": issue.reason,
                    "detail": issue.message,
                }
            )
        storage.atomic_write_jsonl(path, records)
        self.stages_run.append("ingest")
        self._delete_successors("ingest")

    def stage_gen_cases(self) -> None:
        self._load_seeds_view("gen_cases")
        items = dict(self.seeds)

        def fn(problem_id: str, seed: SeedProblem) -> dict[str, Any]:
            result = generate_case_batches(
                seed,
                self.gateway,
                self.assets["test_case_generation"],
                per_batch=self.cfg.per_batch,
                samples=self.cfg.samples,
            )
            curation = curate_cases(
                result.cases,
                cap=self.cfg.case_cap,
                max_literal_bytes=self.cfg.max_literal_bytes,
            )
            rejected_counts: dict[str, int] = {}
            for case in curation.rejected:
                rejected_counts[case.reject_reason] = (
                    rejected_counts.get(case.reject_reason, 0) + 1
                )
            return {
                "kind": "problem_cases",
                "id": problem_id,
                "curated": len(curation.curated),
                "parse_failures": result.parse_failures,
                "rejected_counts": rejected_counts,
                "cases": [
                    {
                        "case_id": case.case_id,
                        "problem_id": case.problem_id,
                        "input_literal": case.input_literal,
                        "canonical_form": case.canonical_form_text,
                        "batch_index": case.batch_index,
                    }
                    for case in curation.curated
                ],
            }

        self._run_incremental("gen_cases", items, fn)

    def stage_synth_problems(self) -> None:
        self._load_seeds_view("synth_problems")
        self._load_cases_view("synth_problems")
        items: dict[str, Any] = {}
        for case in self.cases.values():
            seed = self.seeds.get(case.problem_id)
            if seed is None:
                continue
            items[make_rp_id(case.problem_id, case.case_id)] = (seed, case)

        def fn(rp_id: str, payload: tuple[SeedProblem, TestCase]) -> dict[str, Any]:
            seed, case = payload
            theme = pick_theme(self.cfg.seed, case.problem_id, case.case_id, self.cfg.themes)
            rp = synthesize_problem(
                seed,
                case,
                theme,
                self.gateway,
                self.assets["problem_synthesis"],
                format_resamples=self.cfg.format_resample_limit,
            )
            return {
                "kind": "problem",
                "id": rp.rp_id,
                "problem_id": rp.problem_id,
                "case_id": rp.case_id,
                "text": rp.text,
                "background_theme": rp.background_theme,
            }

        self._run_incremental("synth_problems", items, fn)

    def stage_check_solvable(self) -> None:
        self._load_rps_view("check_solvable")
        items = dict(self.rps)

        def fn(rp_id: str, rp: ReasoningProblem) -> dict[str, Any]:
            verdict = solvability_check(
                rp,
                self.gateway,
                self.assets["solvability_check"],
                judge_resamples=self.cfg.judge_resample_limit,
            )
            return _verdict_record(rp_id, verdict)

        self._run_incremental("check_solvable", items, fn)

    def stage_gen_code(self) -> None:
        self._load_seeds_view("gen_code")
        self._load_cases_view("gen_code")
        self._load_rps_view("gen_code")
        self.solvable_pass = self._load_verdicts_view("check_solvable", "gen_code")
        items: dict[str, Any] = {}
        for rp_id in self.solvable_pass:
            rp = self.rps.get(rp_id)
            if rp is None:
                continue
            seed = self.seeds.get(rp.problem_id)
            case = self.cases.get(rp.case_id)
            if seed is None or case is None:
                continue
            items[rp_id] = (seed, case, rp)

        def fn(rp_id: str, payload: tuple[SeedProblem, TestCase, ReasoningProblem]) -> dict[str, Any]:
            seed, case, rp = payload
            code = instrument_solution(
                seed,
                case,
                rp,
                self.gateway,
                self.assets["code_instrumentation"],
                attempt=0,
                format_resamples=self.cfg.format_resample_limit,
            )
            return {
                "kind": "code",
                "id": rp_id,
                "code_id": code.code_id,
                "source_text": code.source_text,
                "attempt": code.attempt,
            }

        self._run_incremental("gen_code", items, fn)

    def stage_check_consistent(self) -> None:
        self._load_rps_view("check_consistent")
        self._load_codes_view("check_consistent")
        items: dict[str, Any] = {}
        for rp_id, code in self.codes.items():
            rp = self.rps.get(rp_id)
            if rp is not None:
                items[rp_id] = (rp, code)

        def fn(rp_id: str, payload: tuple[ReasoningProblem, InstrumentedCode]) -> dict[str, Any]:
            rp, code = payload
            verdict = consistency_check(
                rp,
                code.source_text,
                self.gateway,
                self.assets["consistency_check"],
                judge_resamples=self.cfg.judge_resample_limit,
            )
            return _verdict_record(rp_id, verdict)

        self._run_incremental("check_consistent", items, fn)

    def stage_execute(self) -> None:
        self._load_seeds_view("execute")
        self._load_cases_view("execute")
        self._load_rps_view("execute")
        self._load_codes_view("execute")
        self.consistent_pass = self._load_verdicts_view("check_consistent", "execute")
        items: dict[str, Any] = {}
        for rp_id in self.consistent_pass:
            rp = self.rps.get(rp_id)
            code = self.codes.get(rp_id)
            if rp is None or code is None:
                continue
            seed = self.seeds.get(rp.problem_id)
            case = self.cases.get(rp.case_id)
            if seed is None or case is None:
                continue
            items[rp_id] = (seed, case, rp, code)

        limits = self.cfg.limits

        def fn(
            rp_id: str,
            payload: tuple[SeedProblem, TestCase, ReasoningProblem, InstrumentedCode],
        ) -> dict[str, Any]:
            seed, case, rp, code = payload
            record = execute_code(code, limits, self.runner)
            trace = parse_trace(record, limits.max_trace_lines)
            attempt = 0
            while True:
                verdict = execution_check(
                    record,
                    trace,
                    resamples_used=attempt,
                    resample_limit=self.cfg.execution_resample_limit,
                    error_markers=self.cfg.error_markers,
                )
                if not is_retryable(verdict):
                    break
                attempt += 1
                code = instrument_solution(
                    seed,
                    case,
                    rp,
                    self.gateway,
                    self.assets["code_instrumentation"],
                    attempt=attempt,
                    format_resamples=self.cfg.format_resample_limit,
                )
                record = execute_code(code, limits, self.runner)
                trace = parse_trace(record, limits.max_trace_lines)
            return {
                "kind": "trace",
                "id": rp_id,
                "code_id": code.code_id,
                "attempt": code.attempt,
                "resamples_used": attempt,
                "source_text": code.source_text,
                "exit_class": record.exit_class,
                "stdout_truncated": record.stdout_truncated,
                "duration_ms": record.duration_ms,
                "stderr_text": record.stderr_text[:2000],
                "intermediates": trace.intermediates,
                "gold_answer": trace.gold_answer,
            }

        self._run_incremental("execute", items, fn)

    def stage_check_execution(self) -> None:
        self._load_traces_view("check_execution")
        items = dict(self.traces)

        def fn(rp_id: str, entry: dict[str, Any]) -> dict[str, Any]:
            record = ExecutionRecord(
                code_id=str(entry["code_id"]),
                exit_class=str(entry["exit_class"]),
                stdout_text="",
                stderr_text=str(entry.get("stderr_text", "")),
                duration_ms=int(entry.get("duration_ms", 0)),
                stdout_truncated=bool(entry.get("stdout_truncated", False)),
            )
            trace = ParsedTrace(
                intermediates=[str(line) for line in entry.get("intermediates", [])],
                gold_answer=entry.get("gold_answer"),
            )
            verdict = execution_check(
                record,
                trace,
                resamples_used=int(entry.get("resamples_used", 0)),
                resample_limit=self.cfg.execution_resample_limit,
                error_markers=self.cfg.error_markers,
            )
            return _verdict_record(rp_id, verdict)

        self._run_incremental("check_execution", items, fn)

    def stage_synth_reasoning(self) -> None:
        self._load_rps_view("synth_reasoning")
        self._load_traces_view("synth_reasoning")
        self.exec_pass = self._load_verdicts_view("check_execution", "synth_reasoning")
        items: dict[str, Any] = {}
        for rp_id in self.exec_pass:
            rp = self.rps.get(rp_id)
            entry = self.traces.get(rp_id)
            if rp is not None and entry is not None:
                items[rp_id] = (rp, entry)

        def fn(rp_id: str, payload: tuple[ReasoningProblem, dict[str, Any]]) -> dict[str, Any]:
            rp, entry = payload
            trace = ParsedTrace(
                intermediates=[str(line) for line in entry.get("intermediates", [])],
                gold_answer=entry.get("gold_answer"),
            )
            code = InstrumentedCode(
                code_id=str(entry["code_id"]),
                rp_id=rp_id,
                source_text=str(entry.get("source_text", "")),
                attempt=int(entry.get("attempt", 0)),
            )
            pair = synthesize_reasoning(
                rp,
                trace,
                code,
                self.gateway,
                self.assets["reasoning_synthesis"],
                resample_limit=self.cfg.reasoning_resample_limit,
                leakage_threshold=self.cfg.leakage_threshold,
            )
            return {
                "kind": "pair",
                "id": rp_id,
                "pair_id": pair.pair_id,
                "input": pair.input_text,
                "output": pair.output_text,
                "gold_answer": pair.gold_answer,
                "provenance": pair.provenance,
            }

        self._run_incremental("synth_reasoning", items, fn)

    def stage_export(self) -> ExportSummary:
        dataset_file = stage_path(self.out, "export")
        summary_file = self.out / storage.EXPORT_SUMMARY_FILE
        ledger_file = self.out / storage.LEDGER_FILE
        report_file = self.out / storage.REPORT_FILE
        if (
            dataset_file.exists()
            and summary_file.exists()
            and ledger_file.exists()
            and report_file.exists()
        ):
            data = json.loads(summary_file.read_text(encoding="utf-8"))
            return ExportSummary(
                count=int(data["count"]),
                checksum=str(data["checksum"]),
                path=str(data["path"]),
            )
        self._load_pairs_view("export")
        pairs = sorted(self.pairs.values(), key=lambda p: p.pair_id)
        known_ids = self._known_ids()
        summary = assemble_and_export(pairs, dataset_file, self.versions)
        violations = verify_provenance(load_dataset(dataset_file), known_ids)
        if violations:
            dataset_file.unlink(missing_ok=True)
            raise DatasetIntegrityError("; ".join(violations[:5]))
        ledger = rebuild_ledger(self.out)
        text, data = report_ledger(ledger)
        storage.atomic_write_text(ledger_file, json.dumps(data, indent=2, sort_keys=True))
        storage.atomic_write_text(report_file, text + "\n")
        storage.atomic_write_text(
            summary_file, json.dumps(summary.to_dict(), indent=2, sort_keys=True)
        )
        self.stages_run.append("export")
        return summary

    def _known_ids(self) -> dict[str, set[str]]:
        self._load_seeds_view("export")
        self._load_cases_view("export")
        self._load_rps_view("export")
        self._load_codes_view("export")
        self._load_traces_view("export")
        code_ids = {code.code_id for code in self.codes.values()}
        code_ids.update(str(entry["code_id"]) for entry in self.traces.values())
        return {
            "problem_id": set(self.seeds),
            "case_id": set(self.cases),
            "rp_id": set(self.rps),
            "code_id": code_ids,
        }

    # -- driver ------------------------------------------------------------

    def execute_plan(self) -> PipelineResult:
        export_summary: ExportSummary | None = None
        handlers = {
            "ingest": self.stage_ingest,
            "gen_cases": self.stage_gen_cases,
            "synth_problems": self.stage_synth_problems,
            "check_solvable": self.stage_check_solvable,
            "gen_code": self.stage_gen_code,
            "check_consistent": self.stage_check_consistent,
            "execute": self.stage_execute,
            "check_execution": self.stage_check_execution,
            "synth_reasoning": self.stage_synth_reasoning,
        }
        for stage in self.requested:
            if stage == "export":
                export_summary = self.stage_export()
            else:
                handlers[stage]()
        ledger = rebuild_ledger(self.out)
        return PipelineResult(
            output_dir=str(self.out),
            stages_run=self.stages_run,
            ledger=ledger,
            export=export_summary,
        )


def _verdict_record(rp_id: str, verdict: Any) -> dict[str, Any]:
    return {
        "kind": "verdict",
        "id": rp_id,
        "check_kind": verdict.check_kind,
        "passed": verdict.passed,
        "reason": verdict.reason,
        "judge_raw": verdict.judge_raw[:400],
    }


def _guard(fn: Callable[[str, Any], dict[str, Any]]) -> Callable[[str, Any], dict[str, Any]]:
    """Item-level faults become failure records; anything else aborts."""

    def wrapper(item_id: str, payload: Any) -> dict[str, Any]:
        try:
            return fn(item_id, payload)
        except ItemRejected as exc:
            return {
                "kind": "failure",
                "id": item_id,
                "reason": exc.reason,
                "detail": exc.detail[:300],
            }
        except ProviderFailure as exc:
            return {
                "kind": "failure",
                "id": item_id,
                "reason": "provider failure",
                "detail": str(exc)[:300],
            }

    return wrapper


def run_pipeline(
    config: PipelineConfig,
    stages: list[str] | None = None,
    resume: bool = False,
) -> PipelineResult:
    """Run the requested stages (all by default) against the configured
    corpus, checkpointing per item under ``config.output_dir``."""
    return _Run(config, stages, resume).execute_plan()
