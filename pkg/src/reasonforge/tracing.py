"""Case-specific code instrumentation, sandboxed execution, trace parsing.

The code rewriter turns a reference solution into a standalone program
that hard-codes one test case, prints intermediate values, and ends
with a ``result: <value>`` line.  Programs are untrusted: they run in a
subprocess with a wall-clock limit, an address-space limit, and a
stdout byte cap, either under the external execution harness (when
configured) or under the built-in supervisor fallback.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

from . import values
from .casegen import TestCase
from .corpus import SeedProblem
from .errors import ItemRejected
from .gateway import CompletionRequest, Gateway, PromptAsset, render
from .problems import ReasoningProblem

logger = logging.getLogger(__name__)

RESULT_PREFIX = "result: "

EXIT_CLASSES = ("ok", "timeout", "memory_kill", "nonzero_exit", "harness_error")

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class ResourceLimits:
    wall_ms: int = 10_000
    memory_bytes: int = 512 * 1024 * 1024
    stdout_cap_bytes: int = 64 * 1024
    max_trace_lines: int = 200
    grace_ms: int = 500


@dataclass
class InstrumentedCode:
    code_id: str
    rp_id: str
    source_text: str
    attempt: int = 0


@dataclass
class ExecutionRecord:
    code_id: str
    exit_class: str
    stdout_text: str
    stderr_text: str
    duration_ms: int
    stdout_truncated: bool = False


@dataclass
class ParsedTrace:
    intermediates: list[str] = field(default_factory=list)
    gold_answer: str | None = None


def make_code_id(rp_id: str, attempt: int) -> str:
    return f"{rp_id}#a{attempt}"


def extract_code_block(text: str) -> tuple[str | None, int]:
    """First fenced code block and the total number of blocks found."""
    blocks = _FENCE_RE.findall(text)
    if not blocks:
        return None, 0
    return blocks[0].strip("\n"), len(blocks)


def instrument_solution(
    seed_problem: SeedProblem,
    case: TestCase,
    rp: ReasoningProblem,
    gateway: Gateway,
    asset: PromptAsset,
    attempt: int = 0,
    format_resamples: int = 1,
) -> InstrumentedCode:
    """One instrumentation attempt (a fresh completion per execution
    resample).  Raises ItemRejected("no code block") or
    ItemRejected("values missing") once the format budget is spent."""
    prompt = render(
        asset,
        {
            "reference_solution": seed_problem.reference_solution,
            "input_literal": case.input_literal,
            "problem_text": rp.text,
        },
    )
    parsed = values.parse_assignments(case.input_literal)
    last_reason = "no code block"
    last_detail = ""
    for _ in range(format_resamples + 1):
        completion = gateway.complete(
            CompletionRequest(prompt=prompt, model_role="code_rewriter")
        )
        source, block_count = extract_code_block(completion.text)
        if source is None:
            last_reason, last_detail = "no code block", ""
            continue
        if block_count > 1:
            logger.warning(
                "completion for %s had %d code blocks; using the first",
                rp.rp_id,
                block_count,
            )
        missing = values.missing_values(source, parsed)
        if missing:
            last_reason, last_detail = "values missing", ", ".join(missing)
            continue
        return InstrumentedCode(
            code_id=make_code_id(rp.rp_id, attempt),
            rp_id=rp.rp_id,
            source_text=source,
            attempt=attempt,
        )
    raise ItemRejected(last_reason, last_detail)


# ---------------------------------------------------------------------------
# runners


class Runner(Protocol):
    def run(self, source_text: str, limits: ResourceLimits) -> ExecutionRecord:
        """Execute untrusted source under limits; code_id left empty."""
        ...


def _truncate(data: bytes | None, cap: int) -> tuple[str, bool]:
    raw = data or b""
    truncated = len(raw) > cap
    return raw[:cap].decode("utf-8", errors="replace"), truncated


def _sandbox_env(tmpdir: str) -> dict[str, str]:
    return {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": tmpdir,
        "LC_ALL": "C.UTF-8",
    }


class SupervisorRunner:
    """Best-effort fallback sandbox used when no harness is configured.

    Runs the program in a subprocess with cwd inside a throwaway temp
    directory, the address-space rlimit applied via the shell (avoids
    preexec_fn, which is unsafe with threads), and a hard wall-clock
    kill.  Process-level isolation only; it does not attempt
    container-grade hardening.
    """

    def __init__(self, interpreter: str | None = None):
        self.interpreter = interpreter or sys.executable

    def run(self, source_text: str, limits: ResourceLimits) -> ExecutionRecord:
        with tempfile.TemporaryDirectory(prefix="reasonforge-run-") as tmpdir:
            code_path = Path(tmpdir) / "main.py"
            code_path.write_text(source_text, encoding="utf-8")
            if shutil.which("bash"):
                kb = max(1, limits.memory_bytes // 1024)
                cmd = [
                    "bash",
                    "-c",
                    f'ulimit -v {kb} 2>/dev/null; exec "$0" "$1"',
                    self.interpreter,
                    str(code_path),
                ]
            else:  # pragma: no cover - bash is present on supported hosts
                cmd = [self.interpreter, str(code_path)]
            started = time.monotonic()
            try:
                proc = subprocess.run(
                    cmd,
                    capture_output=True,
                    cwd=tmpdir,
                    env=_sandbox_env(tmpdir),
                    timeout=limits.wall_ms / 1000.0,
                )
            except subprocess.TimeoutExpired as exc:
                stdout, truncated = _truncate(exc.stdout, limits.stdout_cap_bytes)
                stderr, _ = _truncate(exc.stderr, limits.stdout_cap_bytes)
                return ExecutionRecord(
                    code_id="",
                    exit_class="timeout",
                    stdout_text=stdout,
                    stderr_text=stderr,
                    duration_ms=int((time.monotonic() - started) * 1000),
                    stdout_truncated=truncated,
                )
            except OSError as exc:
                return ExecutionRecord(
                    code_id="",
                    exit_class="harness_error",
                    stdout_text="",
                    stderr_text=f"failed to spawn runner: {exc}",
                    duration_ms=int((time.monotonic() - started) * 1000),
                )
            duration_ms = int((time.monotonic() - started) * 1000)
            stdout, truncated = _truncate(proc.stdout, limits.stdout_cap_bytes)
            stderr, _ = _truncate(proc.stderr, limits.stdout_cap_bytes)
            if proc.returncode == 0:
                exit_class = "ok"
            elif "MemoryError" in stderr:
                exit_class = "memory_kill"
            else:
                exit_class = "nonzero_exit"
            return ExecutionRecord(
                code_id="",
                exit_class=exit_class,
                stdout_text=stdout,
                stderr_text=stderr,
                duration_ms=duration_ms,
                stdout_truncated=truncated,
            )


class HarnessRunner:
    """Runs programs through the external execution harness.

    Invocation contract: ``<harness-cmd> <code-file> --metadata <path>
    --wall-ms <n> --memory-bytes <n>``.  The harness passes the
    program's stdout/stderr through unmodified and writes exactly one
    JSON line ``{"exit_class": ..., "duration_ms": ...}`` to the
    metadata path.  The supervisor applies the stdout byte cap on what
    it captured and trusts the harness's classification; an unreadable
    metadata file is classified harness_error.
    """

    def __init__(self, command: list[str]):
        if not command:
            raise ValueError("harness command must be non-empty")
        self.command = list(command)

    def run(self, source_text: str, limits: ResourceLimits) -> ExecutionRecord:
        with tempfile.TemporaryDirectory(prefix="reasonforge-harness-") as tmpdir:
            code_path = Path(tmpdir) / "main.py"
            code_path.write_text(source_text, encoding="utf-8")
            meta_path = Path(tmpdir) / "meta.json"
            cmd = self.command + [
                str(code_path),
                "--metadata",
                str(meta_path),
                "--wall-ms",
                str(limits.wall_ms),
                "--memory-bytes",
                str(limits.memory_bytes),
            ]
            backstop_s = (limits.wall_ms + limits.grace_ms) / 1000.0 + 5.0
            started = time.monotonic()
            try:
                proc = subprocess.run(
                    cmd,
                    capture_output=True,
                    cwd=tmpdir,
                    timeout=backstop_s,
                )
                stdout_raw, stderr_raw = proc.stdout, proc.stderr
            except subprocess.TimeoutExpired as exc:
                stdout_raw, stderr_raw = exc.stdout, exc.stderr
            except OSError as exc:
                return ExecutionRecord(
                    code_id="",
                    exit_class="harness_error",
                    stdout_text="",
                    stderr_text=f"failed to spawn harness: {exc}",
                    duration_ms=int((time.monotonic() - started) * 1000),
                )
            elapsed_ms = int((time.monotonic() - started) * 1000)
            stdout, truncated = _truncate(stdout_raw, limits.stdout_cap_bytes)
            stderr, _ = _truncate(stderr_raw, limits.stdout_cap_bytes)
            exit_class, duration_ms = self._read_metadata(meta_path, elapsed_ms)
            return ExecutionRecord(
                code_id="",
                exit_class=exit_class,
                stdout_text=stdout,
                stderr_text=stderr,
                duration_ms=duration_ms,
                stdout_truncated=truncated,
            )

    @staticmethod
    def _read_metadata(meta_path: Path, elapsed_ms: int) -> tuple[str, int]:
        try:
            line = meta_path.read_text(encoding="utf-8").strip().splitlines()[0]
            meta = json.loads(line)
            exit_class = meta["exit_class"]
            duration_ms = int(meta["duration_ms"])
        except (OSError, IndexError, KeyError, TypeError, ValueError):
            return "harness_error", elapsed_ms
        if exit_class not in EXIT_CLASSES:
            return "harness_error", elapsed_ms
        return exit_class, duration_ms


def build_runner(
    harness_cmd: list[str] | None, interpreter: str | None = None
) -> Runner:
    if harness_cmd:
        return HarnessRunner(harness_cmd)
    return SupervisorRunner(interpreter)


def execute_code(
    code: InstrumentedCode, limits: ResourceLimits, runner: Runner
) -> ExecutionRecord:
    record = runner.run(code.source_text, limits)
    return replace(record, code_id=code.code_id)


# ---------------------------------------------------------------------------
# trace parsing


def parse_trace(
    record: ExecutionRecord, max_trace_lines: int = 200
) -> ParsedTrace:
    """Split captured stdout into intermediate lines and the gold answer.

    A line beginning exactly with ``result: `` carries the answer; the
    last one wins.  Every other non-empty line is an intermediate, in
    order, truncated to ``max_trace_lines`` with an explicit marker.
    gold_answer is None iff no result line was found.
    """
    intermediates: list[str] = []
    gold: str | None = None
    for line in record.stdout_text.splitlines():
        if line.startswith(RESULT_PREFIX):
            gold = line[len(RESULT_PREFIX) :].strip()
        elif line.strip():
            intermediates.append(line)
    if len(intermediates) > max_trace_lines:
        overflow = len(intermediates) - max_trace_lines
        intermediates = intermediates[:max_trace_lines]
        intermediates.append(f"... ({overflow} more lines truncated)")
    return ParsedTrace(intermediates=intermediates, gold_answer=gold)
