"""Text-model gateway: prompt templates, providers, structured output.

Every model call in the engine goes through ``complete`` /
``complete_structured`` with a deterministic request tag, so a whole
pipeline can be replayed offline from a script file mapping tags to
responses. An HTTP session can be recorded into such a script.

Env vars for the HTTP provider: ``LLM_API_KEY``, ``LLM_BASE_URL``,
``LLM_MODEL``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import string
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

import httpx

from .errors import MissingScriptError, ProviderError, StructuredParseError

log = logging.getLogger("storyloom.llm")

TEMPLATE_DIR = Path(__file__).parent / "templates"

GENERATION_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0
HTTP_TIMEOUT_S = 60.0
TRANSPORT_RETRIES = 3
PARSE_RETRIES = 3


@dataclass(frozen=True)
class CompletionRequest:
    template_id: str
    variables: Mapping[str, str] = field(default_factory=dict)
    temperature: float = GENERATION_TEMPERATURE
    max_tokens: int = 1024
    tag: str = ""
    suffix: str = ""  # extra text appended to the rendered prompt (re-asks)


def _template_path(template_id: str) -> Path:
    override = os.environ.get("STORYLOOM_TEMPLATES")
    if override:
        candidate = Path(override) / f"{template_id}.txt"
        if candidate.exists():
            return candidate
    return TEMPLATE_DIR / f"{template_id}.txt"


def render_prompt(request: CompletionRequest) -> str:
    """Load the template and substitute variables.

    Every placeholder in the template must have a variable.
    """
    path = _template_path(request.template_id)
    if not path.exists():
        raise ProviderError(f"unknown template {request.template_id!r}")
    template = path.read_text(encoding="utf-8")
    placeholders = {
        name for _, name, _, _ in string.Formatter().parse(template) if name
    }
    missing = placeholders - set(request.variables)
    if missing:
        raise ProviderError(
            f"template {request.template_id!r} placeholders without variables: {sorted(missing)}"
        )
    prompt = template.format(**{k: str(v) for k, v in request.variables.items()})
    if request.suffix:
        prompt += request.suffix
    return prompt


def _prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:8]


@dataclass
class CallRecord:
    tag: str
    prompt_hash: str
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    response: str


class ProviderBase:
    """Shared call logging; ``calls`` is replayable into a script."""

    def __init__(self):
        self.calls: list[CallRecord] = []

    def _record(self, tag: str, prompt: str, response: str, latency_s: float,
                prompt_tokens: int | None = None, completion_tokens: int | None = None):
        rec = CallRecord(
            tag=tag,
            prompt_hash=_prompt_hash(prompt),
            prompt_tokens=prompt_tokens if prompt_tokens is not None else len(prompt.split()),
            completion_tokens=completion_tokens if completion_tokens is not None else len(response.split()),
            latency_s=latency_s,
            response=response,
        )
        self.calls.append(rec)
        log.debug("llm call tag=%s prompt_tokens=%d completion_tokens=%d latency=%.3fs",
                  rec.tag, rec.prompt_tokens, rec.completion_tokens, rec.latency_s)

    def to_script(self) -> dict[str, str]:
        """Replay log as a script document (last response wins per tag)."""
        return {rec.tag: rec.response for rec in self.calls}

    def complete(self, request: CompletionRequest) -> str:  # pragma: no cover
        raise NotImplementedError


class ScriptedProvider(ProviderBase):
    """Deterministic provider backed by a tag -> response mapping.

    Lookup tries ``tag@<prompt-hash>`` first, then the bare tag, so a
    script can pin a response to exact prompt content when needed.
    """

    kind = "scripted"

    def __init__(self, script: Mapping[str, str]):
        super().__init__()
        self.script = dict(script)

    def complete(self, request: CompletionRequest) -> str:
        prompt = render_prompt(request)
        start = time.perf_counter()
        for key in (f"{request.tag}@{_prompt_hash(prompt)}", request.tag):
            if key in self.script:
                response = self.script[key]
                self._record(request.tag, prompt, response, time.perf_counter() - start)
                return response
        raise MissingScriptError(request.tag)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ProviderError(f"script file {path} must hold a JSON object")
        return cls({str(k): str(v) for k, v in doc.items()})


class HttpProvider(ProviderBase):
    """OpenAI-style chat-completions endpoint."""

    kind = "http"

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout_s: float = HTTP_TIMEOUT_S):
        super().__init__()
        self.base_url = (base_url or os.environ.get("LLM_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("LLM_API_KEY", "")
        self.model = model or os.environ.get("LLM_MODEL", "")
        self.timeout_s = timeout_s
        if not self.base_url:
            raise ProviderError("http provider needs LLM_BASE_URL")

    def complete(self, request: CompletionRequest) -> str:
        prompt = render_prompt(request)
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        start = time.perf_counter()
        for attempt in range(TRANSPORT_RETRIES):
            try:
                resp = httpx.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                doc = resp.json()
                text = doc["choices"][0]["message"]["content"]
                usage = doc.get("usage", {})
                self._record(
                    request.tag, prompt, text, time.perf_counter() - start,
                    prompt_tokens=usage.get("prompt_tokens"),
                    completion_tokens=usage.get("completion_tokens"),
                )
                if not text:
                    raise ProviderError(f"empty completion for tag {request.tag!r}")
                return text
            except (httpx.HTTPError, KeyError, IndexError, json.JSONDecodeError) as exc:
                last_error = exc
                log.warning("llm transport failure (attempt %d/%d) tag=%s: %s",
                            attempt + 1, TRANSPORT_RETRIES, request.tag, exc)
        raise ProviderError(
            f"transport failure for tag {request.tag!r} after {TRANSPORT_RETRIES} attempts: {last_error}"
        )


class PrefixedProvider(ProviderBase):
    """Namespaces request tags, e.g. per variant-generation batch item."""

    def __init__(self, inner, prefix: str):
        super().__init__()
        self.inner = inner
        self.prefix = prefix

    @property
    def kind(self) -> str:
        return self.inner.kind

    def complete(self, request: CompletionRequest) -> str:
        return self.inner.complete(replace(request, tag=f"{self.prefix}:{request.tag}"))

    def to_script(self) -> dict[str, str]:
        return self.inner.to_script()


def complete(provider, request: CompletionRequest) -> str:
    """Front door for plain-text completions."""
    text = provider.complete(request)
    if not text.strip():
        raise ProviderError(f"empty completion for tag {request.tag!r}")
    return text


def complete_structured(
    provider,
    request: CompletionRequest,
    parser: Callable[[str], Any],
    retries: int = PARSE_RETRIES,
) -> Any:
    """Completion parsed by ``parser``; re-asks with the parse error appended.

    ``parser`` raises ValueError on bad input. After the retry budget the
    raw text is preserved on the StructuredParseError.
    """
    attempt_request = request
    raw = ""
    last_error = "no attempt made"
    for attempt in range(retries + 1):
        raw = complete(provider, attempt_request)
        try:
            return parser(raw)
        except ValueError as exc:
            last_error = str(exc)
            log.warning("structured parse failure tag=%s attempt=%d: %s",
                        attempt_request.tag, attempt + 1, exc)
            attempt_request = replace(
                request,
                tag=f"{request.tag}#retry{attempt + 1}",
                suffix=(
                    f"\n\nYour previous reply could not be parsed: {exc}. "
                    "Reply again in exactly the required format."
                ),
            )
    raise StructuredParseError(
        f"unparseable reply for tag {request.tag!r} after {retries} retries: {last_error}",
        raw=raw,
    )


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def extract_json_block(text: str) -> Any:
    """Pull the first JSON object or array out of possibly noisy text."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "[{":
            try:
                value, _ = decoder.raw_decode(text[i:])
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("no JSON object or array found in reply")


def parse_call_syntax(text: str) -> tuple[str, list[str]]:
    """Parse ``name(arg1, arg2, ...)`` with optionally quoted arguments."""
    text = text.strip()
    if "(" not in text:
        return text, []
    if not text.endswith(")"):
        raise ValueError(f"malformed action call {text!r}")
    name, rest = text.split("(", 1)
    body = rest[:-1]
    args: list[str] = []
    current: list[str] = []
    quote: str | None = None
    for ch in body:
        if quote:
            if ch == quote:
                quote = None
            else:
                current.append(ch)
        elif ch in "\"'":
            quote = ch
        elif ch == ",":
            args.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    if quote:
        raise ValueError(f"unterminated quote in action call {text!r}")
    last = "".join(current).strip()
    if last or args:
        args.append(last)
    return name.strip(), args


def parse_score(text: str) -> float:
    """First real number in the reply (judged 0..1 scores)."""
    for token in text.replace(",", " ").split():
        cleaned = token.strip("()[]%:;")
        try:
            return float(cleaned)
        except ValueError:
            continue
    raise ValueError(f"no numeric score in reply {text!r}")


# ---------------------------------------------------------------------------
# Provider construction
# ---------------------------------------------------------------------------

def make_provider(kind: str, script_path: str | Path | None = None):
    if kind == "scripted":
        if script_path is None:
            raise ProviderError("scripted provider needs a script file")
        return ScriptedProvider.from_file(script_path)
    if kind == "http":
        return HttpProvider()
    raise ProviderError(f"unknown provider kind {kind!r}")


def provider_from_env():
    """Provider for long-running processes (the HTTP service).

    ``LLM_PROVIDER`` selects ``scripted`` (with ``LLM_SCRIPT``) or ``http``;
    defaults to http when LLM_BASE_URL is configured, otherwise an empty
    scripted provider so misconfiguration fails loudly per call.
    """
    kind = os.environ.get("LLM_PROVIDER")
    if kind == "scripted" or (kind is None and not os.environ.get("LLM_BASE_URL")):
        script = os.environ.get("LLM_SCRIPT")
        return ScriptedProvider.from_file(script) if script else ScriptedProvider({})
    return HttpProvider()
