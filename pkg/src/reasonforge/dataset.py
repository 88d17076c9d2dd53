"""Dataset assembly, export, accounting, and subset sampling.

The ledger counts every item examined by every stage as passed or
failed-with-reason, so drops are always attributable.  Export
re-validates each pair (answer agreement, provenance completeness),
sorts deterministically, and writes the final JSONL with a content
checksum.  ``sample_subset`` draws reproducible subsets by total size,
by fraction of problems, or by fraction of cases per problem.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import DatasetIntegrityError
from .reasoning import ReasoningPair, extract_final_answer
from .storage import STAGE_ORDER, atomic_write_jsonl, dump_line
from .values import normalize_answer

SAMPLE_MODES = ("total_n", "problem_fraction", "case_fraction")

_PROVENANCE_FIELDS = ("problem_id", "case_id", "rp_id", "code_id")


# ---------------------------------------------------------------------------
# accounting


@dataclass
class StageCount:
    passed: int = 0
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(self.failures.values())

    @property
    def examined(self) -> int:
        return self.passed + self.failed


class PipelineLedger:
    """Per-stage pass/fail-by-reason accounting plus per-problem yield."""

    def __init__(self) -> None:
        self.stages: dict[str, StageCount] = {}
        self.problem_yield: dict[str, int] = {}

    def stage(self, name: str) -> StageCount:
        return self.stages.setdefault(name, StageCount())

    def record_pass(self, stage: str, n: int = 1) -> None:
        self.stage(stage).passed += n

    def record_fail(self, stage: str, reason: str, n: int = 1) -> None:
        failures = self.stage(stage).failures
        failures[reason] = failures.get(reason, 0) + n

    def record_yield(self, problem_id: str, n: int = 1) -> None:
        self.problem_yield[problem_id] = self.problem_yield.get(problem_id, 0) + n

    def conserved(self) -> bool:
        """examined == passed + failed for every stage (structural, but
        re-checked so external mutation cannot hide drops)."""
        return all(
            count.examined == count.passed + count.failed
            and count.passed >= 0
            and all(v >= 0 for v in count.failures.values())
            for count in self.stages.values()
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "stages": {
                name: {
                    "examined": count.examined,
                    "passed": count.passed,
                    "failures": dict(sorted(count.failures.items())),
                }
                for name, count in sorted(
                    self.stages.items(),
                    key=lambda kv: STAGE_ORDER.index(kv[0])
                    if kv[0] in STAGE_ORDER
                    else len(STAGE_ORDER),
                )
            },
            "problem_yield": dict(sorted(self.problem_yield.items())),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineLedger":
        ledger = cls()
        for name, entry in (data.get("stages") or {}).items():
            count = ledger.stage(name)
            count.passed = int(entry.get("passed", 0))
            count.failures = {k: int(v) for k, v in (entry.get("failures") or {}).items()}
        ledger.problem_yield = {
            k: int(v) for k, v in (data.get("problem_yield") or {}).items()
        }
        return ledger


def report_ledger(ledger: PipelineLedger) -> tuple[str, dict[str, Any]]:
    """Human-readable funnel report plus the machine-readable dict."""
    data = ledger.to_dict()
    lines = ["pipeline funnel:"]
    for name, entry in data["stages"].items():
        lines.append(
            f"  {name}: examined={entry['examined']} "
            f"passed={entry['passed']} failed={entry['examined'] - entry['passed']}"
        )
        for reason, count in entry["failures"].items():
            lines.append(f"    - {reason}: {count}")
    total_pairs = sum(data["problem_yield"].values())
    lines.append(
        f"yield: {total_pairs} pairs across {len(data['problem_yield'])} problems"
    )
    return "\n".join(lines), data


# ---------------------------------------------------------------------------
# final records


def pair_record(pair: ReasoningPair, asset_versions: dict[str, str]) -> dict[str, Any]:
    record = {
        "pair_id": pair.pair_id,
        "input": pair.input_text,
        "output": pair.output_text,
        "gold_answer": pair.gold_answer,
        "prompt_asset_versions": dict(sorted(asset_versions.items())),
    }
    for fieldname in _PROVENANCE_FIELDS:
        record[fieldname] = str(pair.provenance.get(fieldname, ""))
    return record


def pair_from_record(record: dict[str, Any]) -> ReasoningPair:
    return ReasoningPair(
        pair_id=str(record.get("pair_id", "")),
        input_text=str(record.get("input", "")),
        output_text=str(record.get("output", "")),
        gold_answer=str(record.get("gold_answer", "")),
        provenance={k: record.get(k, "") for k in _PROVENANCE_FIELDS},
    )


def verify_record(record: dict[str, Any]) -> list[str]:
    """Export-gate checks for one final record; returns violations."""
    violations: list[str] = []
    for fieldname in ("pair_id", "input", "output", "gold_answer", *_PROVENANCE_FIELDS):
        if not str(record.get(fieldname, "")).strip():
            violations.append(f"missing {fieldname}")
    answer = extract_final_answer(str(record.get("output", "")))
    if answer is None or normalize_answer(answer) != normalize_answer(
        str(record.get("gold_answer", ""))
    ):
        violations.append("final answer does not match gold_answer")
    return violations


def dataset_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ExportSummary:
    count: int
    checksum: str
    path: str

    def to_dict(self) -> dict[str, Any]:
        return {"count": self.count, "checksum": self.checksum, "path": self.path}


def assemble_and_export(
    pairs: list[ReasoningPair],
    path: str | Path,
    asset_versions: dict[str, str],
) -> ExportSummary:
    """Validate, deterministically order, and write the final dataset.

    Any invalid pair or duplicate pair_id raises DatasetIntegrityError;
    the export is all-or-nothing.
    """
    records = [pair_record(pair, asset_versions) for pair in pairs]
    seen: set[str] = set()
    for record in records:
        violations = verify_record(record)
        if violations:
            raise DatasetIntegrityError(
                f"pair {record.get('pair_id', '?')}: {'; '.join(violations)}"
            )
        if record["pair_id"] in seen:
            raise DatasetIntegrityError(f"duplicate pair_id {record['pair_id']}")
        seen.add(record["pair_id"])
    records.sort(key=lambda r: r["pair_id"])
    atomic_write_jsonl(path, records)
    return ExportSummary(
        count=len(records), checksum=dataset_checksum(path), path=str(path)
    )


def load_dataset(path: str | Path) -> list[dict[str, Any]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


# ---------------------------------------------------------------------------
# provenance


def verify_provenance(
    records: list[dict[str, Any]],
    known_ids: dict[str, set[str]],
) -> list[str]:
    """Check that every provenance id in the final records resolves to an
    id emitted by the corresponding upstream stage.

    ``known_ids`` maps each of problem_id/case_id/rp_id/code_id to the
    set of ids the stage files contain.
    """
    violations: list[str] = []
    for record in records:
        for fieldname in _PROVENANCE_FIELDS:
            value = str(record.get(fieldname, ""))
            if value not in known_ids.get(fieldname, set()):
                violations.append(
                    f"pair {record.get('pair_id', '?')}: {fieldname} {value!r} "
                    "does not resolve to an upstream record"
                )
    return violations


# ---------------------------------------------------------------------------
# sampling


def sample_subset(
    records: list[dict[str, Any]],
    mode: str,
    amount: float,
    seed: int,
) -> list[dict[str, Any]]:
    """Draw a reproducible subset of final records.

    total_n: exactly ``amount`` records (1 <= amount <= len).
    problem_fraction: all records of round(fraction * #problems)
    problems (at least 1).
    case_fraction: per problem, records of round(fraction * #cases)
    cases (at least 1 per problem).
    Output preserves input order; same (records, mode, amount, seed)
    always yields the same subset.
    """
    if mode not in SAMPLE_MODES:
        raise ValueError(f"unknown sample mode {mode!r}")
    if not records:
        raise ValueError("cannot sample from an empty dataset")
    rng = random.Random(seed)

    if mode == "total_n":
        if amount != int(amount):
            raise ValueError("total_n requires an integer amount")
        n = int(amount)
        if not 1 <= n <= len(records):
            raise ValueError(
                f"total_n amount must be within [1, {len(records)}], got {n}"
            )
        chosen = set(rng.sample(range(len(records)), n))
        return [record for idx, record in enumerate(records) if idx in chosen]

    fraction = float(amount)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"{mode} amount must be within (0, 1], got {fraction}")

    if mode == "problem_fraction":
        problems = sorted({str(r.get("problem_id", "")) for r in records})
        k = min(len(problems), max(1, round(len(problems) * fraction)))
        keep = set(rng.sample(problems, k))
        return [r for r in records if str(r.get("problem_id", "")) in keep]

    # case_fraction: sample cases independently within each problem
    by_problem: dict[str, list[str]] = {}
    for record in records:
        pid = str(record.get("problem_id", ""))
        cid = str(record.get("case_id", ""))
        cases = by_problem.setdefault(pid, [])
        if cid not in cases:
            cases.append(cid)
    keep_cases: set[tuple[str, str]] = set()
    for pid in sorted(by_problem):
        cases = sorted(by_problem[pid])
        k = min(len(cases), max(1, round(len(cases) * fraction)))
        for cid in rng.sample(cases, k):
            keep_cases.add((pid, cid))
    return [
        r
        for r in records
        if (str(r.get("problem_id", "")), str(r.get("case_id", ""))) in keep_cases
    ]


def write_subset(records: list[dict[str, Any]], path: str | Path) -> str:
    atomic_write_jsonl(path, records)
    return dataset_checksum(path)


def subset_preview(records: list[dict[str, Any]], limit: int = 5) -> list[str]:
    return [str(r.get("pair_id", "")) for r in records[:limit]]


def records_digest(records: list[dict[str, Any]]) -> str:
    """Order-sensitive digest of a record list (for determinism checks)."""
    h = hashlib.sha256()
    for record in records:
        h.update(dump_line(record).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
