"""JSONL stage-file layout and IO helpers.

Each pipeline stage owns exactly one JSONL checkpoint file in the run's
output directory.  Incremental stages append one record per finished
item (line-buffered, so a crash loses at most the line being written);
atomic stages write a temp file and rename it into place.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable

logger = logging.getLogger(__name__)

STAGE_ORDER = (
    "ingest",
    "gen_cases",
    "synth_problems",
    "check_solvable",
    "gen_code",
    "check_consistent",
    "execute",
    "check_execution",
    "synth_reasoning",
    "export",
)

STAGE_FILES = {
    "ingest": "seeds.jsonl",
    "gen_cases": "cases.jsonl",
    "synth_problems": "problems.jsonl",
    "check_solvable": "verdicts_solvability.jsonl",
    "gen_code": "codes.jsonl",
    "check_consistent": "verdicts_consistency.jsonl",
    "execute": "traces.jsonl",
    "check_execution": "verdicts_execution.jsonl",
    "synth_reasoning": "pairs.jsonl",
    "export": "dataset.jsonl",
}

EXPORT_SUMMARY_FILE = "export_summary.json"
LEDGER_FILE = "ledger.json"
REPORT_FILE = "report.txt"


def stage_path(output_dir: str | Path, stage: str) -> Path:
    return Path(output_dir) / STAGE_FILES[stage]


def successors(stage: str) -> tuple[str, ...]:
    idx = STAGE_ORDER.index(stage)
    return STAGE_ORDER[idx + 1 :]


def predecessor(stage: str) -> str | None:
    idx = STAGE_ORDER.index(stage)
    return STAGE_ORDER[idx - 1] if idx > 0 else None


def dump_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def read_jsonl(path: str | Path, tolerant: bool = True) -> list[dict[str, Any]]:
    """Read a JSONL file; in tolerant mode unparseable lines (e.g. a
    partial line after a crash) are skipped with a warning."""
    records: list[dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if not tolerant:
                    raise
                logger.warning("skipping unparseable line %d in %s", line_no, path)
    return records


def atomic_write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dump_line(record) + "\n")
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class StageAppender:
    """Line-buffered append handle for one stage file."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, record: dict[str, Any]) -> None:
        self._fh.write(dump_line(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "StageAppender":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()
