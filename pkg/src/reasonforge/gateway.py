"""LLM access layer: prompt assets, completion requests, providers.

Every model call in the pipeline goes through :class:`Gateway`, which
adds bounded retries with exponential backoff, a global in-flight cap,
and optional per-role request pacing.  Providers are pluggable; the
scriptable :class:`MockProvider` makes the whole pipeline runnable
hermetically in tests, and :class:`HttpChatProvider` speaks the common
chat-completions HTTP shape.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import os
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from .errors import ConfigurationError, ProviderFailure, RenderError

MODEL_ROLES = (
    "case_generator",
    "problem_synthesizer",
    "code_rewriter",
    "reasoner",
    "judge",
)

# case generation wants diversity, judging wants determinism
DEFAULT_TEMPERATURES = {
    "case_generator": 1.0,
    "problem_synthesizer": 0.7,
    "code_rewriter": 0.7,
    "reasoner": 0.7,
    "judge": 0.0,
}

ASSET_IDS = (
    "test_case_generation",
    "problem_synthesis",
    "code_instrumentation",
    "reasoning_synthesis",
    "solvability_check",
    "consistency_check",
)

_PACKAGED_VERSION = "1"


def default_temperature(role: str) -> float:
    return DEFAULT_TEMPERATURES.get(role, 0.7)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# prompt assets


@dataclass(frozen=True)
class PromptAsset:
    asset_id: str
    template: str
    version: str


def render(asset: PromptAsset, bindings: dict[str, Any]) -> str:
    """Substitute bindings into the template; unknown or missing
    placeholders raise RenderError rather than producing partial text."""
    try:
        return asset.template.format(**bindings)
    except KeyError as exc:
        raise RenderError(asset.asset_id, str(exc.args[0])) from exc
    except IndexError as exc:
        raise RenderError(asset.asset_id, "<positional>") from exc


def template_placeholders(template: str) -> set[str]:
    return {
        name
        for _, name, _, _ in string.Formatter().parse(template)
        if name is not None
    }


def load_asset(asset_id: str, prompt_dir: str | None = None) -> PromptAsset:
    """Load a versioned prompt template, from ``prompt_dir`` if given
    (version reported as "local"), else from the packaged assets."""
    if asset_id not in ASSET_IDS:
        raise ConfigurationError(f"unknown prompt asset {asset_id!r}")
    if prompt_dir is not None:
        path = Path(prompt_dir) / f"{asset_id}.txt"
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read prompt asset {path}: {exc}") from exc
        return PromptAsset(asset_id, text, "local")
    resource = importlib.resources.files("reasonforge").joinpath(
        "prompts", f"{asset_id}.txt"
    )
    return PromptAsset(asset_id, resource.read_text(encoding="utf-8"), _PACKAGED_VERSION)


def load_assets(prompt_dir: str | None = None) -> dict[str, PromptAsset]:
    return {asset_id: load_asset(asset_id, prompt_dir) for asset_id in ASSET_IDS}


def asset_versions(assets: dict[str, PromptAsset]) -> dict[str, str]:
    return {asset_id: asset.version for asset_id, asset in sorted(assets.items())}


# ---------------------------------------------------------------------------
# requests / results


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_role: str
    temperature: float | None = None
    max_output_tokens: int = 2048
    sample_count: int = 1

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.model_role not in MODEL_ROLES:
            raise ValueError(f"unknown model_role {self.model_role!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.temperature is None:
            object.__setattr__(
                self, "temperature", default_temperature(self.model_role)
            )
        elif not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")


@dataclass
class CompletionResult:
    texts: list[str]
    provider_id: str
    latency_ms: int
    retry_count: int

    @property
    def text(self) -> str:
        return self.texts[0]


class TransientProviderError(Exception):
    """A retryable provider fault (timeouts, 5xx, rate limiting)."""


class Provider(Protocol):
    provider_id: str

    def complete(self, request: CompletionRequest) -> list[str]:
        """One attempt; returns sample_count texts or raises
        TransientProviderError."""
        ...


# ---------------------------------------------------------------------------
# mock provider

TRANSIENT_SENTINEL = "<<TRANSIENT>>"


class MockScriptError(ConfigurationError):
    pass


@dataclass
class MockEntry:
    role: str
    prompt_hash: str | None = None  # None or "*" matches any prompt
    contains: tuple[str, ...] = ()
    responses: tuple[str, ...] = ()
    cursor: int = field(default=0, compare=False)

    def matches_wildcard(self, prompt: str) -> bool:
        if self.prompt_hash not in (None, "*"):
            return False
        return all(fragment in prompt for fragment in self.contains)


class MockProvider:
    """Deterministic scripted provider.

    Entries are matched per request: an entry whose ``prompt_hash``
    equals the request's prompt hash wins; otherwise the first entry
    (file order) whose ``contains`` fragments all appear in the prompt
    matches.  Each matched sample consumes the entry's next response,
    repeating the last one once the sequence is exhausted.  A response
    equal to ``<<TRANSIENT>>`` raises a retryable provider error.  An
    unmatched prompt is a scripting bug and raises MockScriptError.
    """

    def __init__(self, entries: list[MockEntry], provider_id: str = "mock"):
        self.provider_id = provider_id
        self._entries = entries
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: str) -> "MockProvider":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MockScriptError(f"cannot load mock script {path}: {exc}") from exc
        raw_entries = data["entries"] if isinstance(data, dict) else data
        entries = []
        for raw in raw_entries:
            entries.append(
                MockEntry(
                    role=raw["role"],
                    prompt_hash=raw.get("prompt_hash"),
                    contains=tuple(raw.get("contains", ())),
                    responses=tuple(raw["responses"]),
                )
            )
        return cls(entries)

    def complete(self, request: CompletionRequest) -> list[str]:
        with self._lock:
            entry = self._find(request)
            texts = []
            for _ in range(request.sample_count):
                idx = min(entry.cursor, len(entry.responses) - 1)
                texts.append(entry.responses[idx])
                entry.cursor += 1
        if TRANSIENT_SENTINEL in texts:
            raise TransientProviderError("scripted transient failure")
        return texts

    def _find(self, request: CompletionRequest) -> MockEntry:
        digest = prompt_hash(request.prompt)
        for entry in self._entries:
            if entry.role == request.model_role and entry.prompt_hash == digest:
                return entry
        for entry in self._entries:
            if entry.role == request.model_role and entry.matches_wildcard(request.prompt):
                return entry
        head = " ".join(request.prompt.split())[:120]
        raise MockScriptError(
            f"no scripted response for role={request.model_role} "
            f"hash={digest} prompt starts: {head!r}"
        )


# ---------------------------------------------------------------------------
# http provider


class HttpChatProvider:
    """Chat-completions style HTTP provider (OpenAI-compatible shape)."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "REASONFORGE_API_KEY",
        timeout_s: float = 60.0,
        provider_id: str | None = None,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.provider_id = provider_id or f"http:{model}"
        self._client = client or httpx.Client(timeout=timeout_s)

    def complete(self, request: CompletionRequest) -> list[str]:
        headers = {}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "n": request.sample_count,
        }
        try:
            response = self._client.post(self.endpoint, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"transport error: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"http {response.status_code}")
        if response.status_code >= 400:
            raise ConfigurationError(
                f"provider rejected request: http {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            choices = response.json()["choices"]
            texts = [choice["message"]["content"] for choice in choices]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransientProviderError(f"malformed provider response: {exc}") from exc
        if not texts:
            raise TransientProviderError("provider returned no choices")
        return texts


# ---------------------------------------------------------------------------
# gateway


class _RolePacer:
    """Enforces a minimum interval between request starts for one role."""

    def __init__(self, rate_per_sec: float):
        self.interval = 1.0 / rate_per_sec
        self._lock = threading.Lock()
        self._next_start = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_start)
            self._next_start = start + self.interval
        delay = start - now
        if delay > 0:
            time.sleep(delay)


class Gateway:
    def __init__(
        self,
        providers: dict[str, Provider],
        retry_limit: int = 3,
        backoff_s: float = 0.05,
        max_in_flight: int = 8,
        rate_per_sec: dict[str, float] | None = None,
    ):
        if retry_limit < 0:
            raise ConfigurationError("retry_limit must be >= 0")
        if max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        self._providers = providers
        self.retry_limit = retry_limit
        self.backoff_s = backoff_s
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._pacers = {
            role: _RolePacer(rate) for role, rate in (rate_per_sec or {}).items() if rate
        }

    def provider_for(self, role: str) -> Provider:
        provider = self._providers.get(role) or self._providers.get("*")
        if provider is None:
            raise ConfigurationError(f"no provider configured for role {role!r}")
        return provider

    def complete(self, request: CompletionRequest) -> CompletionResult:
        provider = self.provider_for(request.model_role)
        pacer = self._pacers.get(request.model_role)
        attempts = self.retry_limit + 1
        started = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(attempts):
            if pacer is not None:
                pacer.wait()
            try:
                with self._gate:
                    texts = provider.complete(request)
            except TransientProviderError as exc:
                last_error = exc
                if attempt < attempts - 1:
                    time.sleep(self.backoff_s * (2**attempt))
                continue
            if len(texts) < request.sample_count:
                texts = texts + [texts[-1]] * (request.sample_count - len(texts))
            elif len(texts) > request.sample_count:
                texts = texts[: request.sample_count]
            return CompletionResult(
                texts=list(texts),
                provider_id=provider.provider_id,
                latency_ms=int((time.monotonic() - started) * 1000),
                retry_count=attempt,
            )
        raise ProviderFailure(
            f"provider for role {request.model_role!r} failed after "
            f"{attempts} attempts: {last_error}",
            cause=last_error,
        )


def build_gateway(config: dict[str, Any] | str, base_dir: str | None = None) -> Gateway:
    """Build a Gateway from a config dict or a JSON config file path.

    Shape::

        {"provider": {"type": "mock", "script": "script.json"},
         "roles": {"judge": {"type": "http", "endpoint": ..., "model": ...}},
         "retry_limit": 3, "backoff_s": 0.05, "max_in_flight": 8,
         "rate_per_sec": {"judge": 10.0}}

    Relative mock-script paths resolve against the config file's
    directory (or ``base_dir``).
    """
    if isinstance(config, str):
        path = Path(config)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load provider config {config}: {exc}") from exc
        base_dir = str(path.parent)
    else:
        data = config
    if not isinstance(data, dict):
        raise ConfigurationError("provider config must be an object")
    if "type" in data:  # shorthand: a bare provider spec serves every role
        data = {"provider": data}

    def make_provider(spec: dict[str, Any]) -> Provider:
        kind = spec.get("type")
        if kind == "mock":
            script = spec.get("script")
            if not script:
                raise ConfigurationError("mock provider config needs a 'script' path")
            script_path = Path(script)
            if not script_path.is_absolute() and base_dir:
                script_path = Path(base_dir) / script_path
            return MockProvider.from_script(str(script_path))
        if kind == "http":
            try:
                endpoint = spec["endpoint"]
                model = spec["model"]
            except KeyError as exc:
                raise ConfigurationError(
                    f"http provider config needs {exc.args[0]!r}"
                ) from exc
            return HttpChatProvider(
                endpoint=endpoint,
                model=model,
                api_key_env=spec.get("api_key_env", "REASONFORGE_API_KEY"),
                timeout_s=float(spec.get("timeout_s", 60.0)),
            )
        raise ConfigurationError(f"unknown provider type {kind!r}")

    providers: dict[str, Provider] = {}
    if "provider" in data:
        providers["*"] = make_provider(data["provider"])
    for role, spec in (data.get("roles") or {}).items():
        if role not in MODEL_ROLES:
            raise ConfigurationError(f"unknown model role {role!r} in provider config")
        providers[role] = make_provider(spec)
    if not providers:
        raise ConfigurationError("provider config defines no providers")
    return Gateway(
        providers,
        retry_limit=int(data.get("retry_limit", 3)),
        backoff_s=float(data.get("backoff_s", 0.05)),
        max_in_flight=int(data.get("max_in_flight", 8)),
        rate_per_sec={k: float(v) for k, v in (data.get("rate_per_sec") or {}).items()},
    )
