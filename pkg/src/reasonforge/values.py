"""Literal parsing and answer normalization shared by several stages.

Test-case inputs are written as ``name=value`` assignments with Python
literal values.  Answers (gold answers from executed programs, final
answers from reasoning texts) are compared through ``normalize_answer``
so that formatting noise never causes a spurious mismatch.
"""

from __future__ import annotations

import ast
import json
from typing import Any, Iterator

Scalar = bool | int | float | str | None


def parse_assignments(text: str) -> dict[str, Any]:
    """Parse a ``name=value, name=value`` entry into a dict of literals.

    Raises ValueError for anything that is not purely keyword=literal
    (positional values, **-splats, non-literal expressions, syntax
    errors).
    """
    try:
        tree = ast.parse(f"__case__({text})", mode="eval")
    except (SyntaxError, ValueError) as exc:
        raise ValueError(f"unparseable case entry: {exc}") from exc
    call = tree.body
    if not isinstance(call, ast.Call):  # pragma: no cover - parse shape is fixed
        raise ValueError("unparseable case entry")
    if call.args:
        raise ValueError("case entry has a value without a parameter name")
    if not call.keywords:
        raise ValueError("case entry has no name=value pairs")
    out: dict[str, Any] = {}
    for kw in call.keywords:
        if kw.arg is None:
            raise ValueError("case entry may not use ** expansion")
        try:
            out[kw.arg] = ast.literal_eval(kw.value)
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"non-literal value for {kw.arg!r}") from exc
    return out


def canonical_value(value: Any) -> Any:
    """Normalize a parsed literal: integral floats become ints, tuples and
    sets become lists (sets sorted), dict keys become strings."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return int(value)
        return value
    if isinstance(value, (list, tuple)):
        return [canonical_value(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((canonical_value(v) for v in value), key=repr)
    if isinstance(value, dict):
        return {str(k): canonical_value(v) for k, v in value.items()}
    return value


def canonical_form(assignments: dict[str, Any]) -> str:
    """Deterministic text form of a parsed case: canonical values, sorted
    keys, no insignificant whitespace."""
    return json.dumps(
        {k: canonical_value(v) for k, v in assignments.items()},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def _number_token(value: int | float) -> str:
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def canonical_text(value: Any) -> str:
    """Canonical single-line text for a literal value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, float)):
        return _number_token(value)
    if isinstance(value, str):
        return " ".join(value.split())
    return json.dumps(canonical_value(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def normalize_answer(text: str) -> str:
    """Map an answer string to its canonical comparison form.

    Whitespace runs collapse to single spaces; ``True``/``true`` map to
    ``true`` (same for false/null); numeric and container literals are
    rendered canonically (``2584.0`` -> ``2584``, ``[1, 2]`` -> ``[1,2]``);
    anything unparseable is kept as collapsed text.
    """
    s = " ".join(str(text).split())
    if not s:
        return ""
    low = s.lower()
    if low in ("true", "false"):
        return low
    if low in ("none", "null"):
        return "null"
    try:
        value = ast.literal_eval(s)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return s
    return canonical_text(value)


def atomic_values(value: Any) -> Iterator[Scalar]:
    """Yield every scalar inside a (possibly nested) literal value."""
    if isinstance(value, (list, tuple, set, frozenset)):
        for v in value:
            yield from atomic_values(v)
    elif isinstance(value, dict):
        for v in value.values():
            yield from atomic_values(v)
    else:
        yield value


def missing_values(text: str, assignments: dict[str, Any]) -> list[str]:
    """Return the tokens from a case's values that do not appear in text.

    Used to enforce that synthesized problems and instrumented programs
    embed every concrete input value.  Matching is substring-based:
    numbers by canonical token, strings verbatim, booleans/None
    case-insensitively.
    """
    lower = text.lower()
    missing: list[str] = []
    seen: set[tuple[str, Any]] = set()
    atoms: list[Scalar] = []
    for v in assignments.values():
        for a in atomic_values(v):
            key = (type(a).__name__, a)  # keep True distinct from 1
            if key not in seen:
                seen.add(key)
                atoms.append(a)
    for atom in atoms:
        if isinstance(atom, bool):
            token = "true" if atom else "false"
            if token not in lower:
                missing.append(token)
        elif atom is None:
            if "none" not in lower and "null" not in lower:
                missing.append("null")
        elif isinstance(atom, str):
            if atom not in text:
                missing.append(repr(atom))
        else:
            token = _number_token(atom)
            if token not in text:
                missing.append(token)
    return missing
