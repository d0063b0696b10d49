"""Uniform access to text-generation backends.

Three backend families share one interface: a deterministic mock (pure
function of request content and seed, for tests and dry runs), a scripted
backend (canned replies for fixtures), and a JSON-over-HTTP chat-completion
client with retries and a concurrency bound.  Scoring (echo logprobs of a
given continuation) is a per-backend capability.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass

import requests

logger = logging.getLogger(__name__)

ROLES = ("user", "assistant")


class BackendError(RuntimeError):
    """Base class for gateway failures."""


class CapabilityError(BackendError):
    """The backend does not support the requested operation."""


class RetryExhaustedError(BackendError):
    """Transient failures persisted past the retry budget."""


@dataclass(frozen=True)
class TokenInfo:
    surface: str
    logprob: float
    alternatives: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.logprob > 0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")
        lps = [lp for _, lp in self.alternatives]
        if lps != sorted(lps, reverse=True):
            raise ValueError("alternatives must be sorted by logprob descending")


@dataclass(frozen=True)
class GenerationRequest:
    system_prompt: str
    turns: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_output_tokens: int | None = None
    want_token_logprobs: bool = False
    top_alternatives: int = 0
    sample_seed: int | None = None

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError("turns must be nonempty")
        for role, _ in self.turns:
            if role not in ROLES:
                raise ValueError(f"unknown turn role: {role!r}")
        if self.turns[-1][0] != "user":
            raise ValueError("last turn must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.top_alternatives < 0:
            raise ValueError("top_alternatives must be >= 0")

    def canonical(self) -> str:
        """Stable serialization used for digests and logs."""
        return json.dumps(
            {
                "system": self.system_prompt,
                "turns": list(self.turns),
                "temperature": self.temperature,
                "max_output_tokens": self.max_output_tokens,
                "want_token_logprobs": self.want_token_logprobs,
                "top_alternatives": self.top_alternatives,
                "sample_seed": self.sample_seed,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScoreRequest:
    context: str
    continuation: str

    def __post_init__(self) -> None:
        if not self.continuation:
            raise ValueError("continuation must be nonempty")


@dataclass(frozen=True)
class Generation:
    text: str
    backend_id: str
    tokens: tuple[TokenInfo, ...] | None = None
    latency_ms: float = 0.0
    truncated: bool = False
    # Whether concatenated token surfaces reconstruct text exactly.
    exact_detok: bool = True


def token_entropy(info: TokenInfo) -> float:
    """Entropy over the renormalized alternatives plus a residual bucket.

    With no alternatives the entropy is 0 (only the chosen token is known).
    """
    if not info.alternatives:
        return 0.0
    probs = [math.exp(lp) for _, lp in info.alternatives]
    total = sum(probs)
    if total > 1.0:
        probs = [p / total for p in probs]
        total = 1.0
    h = -sum(p * math.log(p) for p in probs if p > 0)
    residual = 1.0 - total
    if residual > 1e-12:
        h -= residual * math.log(residual)
    return h


class Backend:
    """Interface shared by all backends."""

    backend_id: str = "backend"
    supports_scoring: bool = False
    max_concurrency: int = 8

    def generate(self, req: GenerationRequest) -> Generation:
        raise NotImplementedError

    def score(self, req: ScoreRequest) -> list[TokenInfo]:
        raise CapabilityError(f"backend {self.backend_id!r} does not support scoring")


def _hash_int(*parts: str) -> int:
    joined = "|".join(parts)
    return int.from_bytes(
        hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big"
    )


# Deterministic replacement vocabulary for the mock's word substitutions.
_MOCK_WORDS = (
    "amber", "basalt", "cobalt", "damson", "ember",
    "fjord", "garnet", "heron", "indigo", "juniper",
)

_TOKEN_RE = re.compile(r"\S+\s*")

# A markdown-bold header line ("**Passage to translate:**") marks where the
# payload of a prompt starts; the mock echoes what follows the last one.
_HEADER_LINE_RE = re.compile(r"^[^\n]*:\*\*[ \t]*$", re.MULTILINE)
_TRAILING_INSTRUCTION_RE = re.compile(r"\n+Provide ONLY [^\n]*\s*\Z")


def _prompt_payload(text: str) -> str:
    """Trailing payload block of a prompt: the text after the last
    header-marked line, minus a final output-format instruction.  Falls
    back to the whole text when nothing follows the last header."""
    matches = list(_HEADER_LINE_RE.finditer(text))
    if matches:
        candidate = _TRAILING_INSTRUCTION_RE.sub("", text[matches[-1].end():])
        if candidate.strip():
            return candidate
    return text


def mock_score_logprob(seed: int, context: str, token: str) -> float:
    """The mock's per-token score: -(digest(seed, context, token) mod k)/k scaled."""
    k = 1000
    return -(_hash_int(str(seed), context, token) % k) / k * 4.0


class MockBackend(Backend):
    """Deterministic stand-in for a chat model.

    Generation echoes a transformed slice of the last user turn: a short
    digest marker prefix, then the prompt's trailing payload block (the
    passage under translation or refinement) truncated to the final
    ``max_output_tokens`` words, with a deterministic fraction of words
    swapped for vocabulary words.  All whitespace (including the
    double-newline unit delimiter) is preserved, so pipeline merges and
    diffs behave like they would with a real model.  Every output is a
    pure function of (request content, seed).
    """

    supports_scoring = True

    def __init__(
        self,
        seed: int = 0,
        backend_id: str = "mock",
        default_max_tokens: int = 256,
        substitution_period: int = 6,
        score_top_alternatives: int = 0,
    ) -> None:
        self.seed = seed
        self.backend_id = backend_id
        self.default_max_tokens = default_max_tokens
        self.substitution_period = max(1, substitution_period)
        self.score_top_alternatives = score_top_alternatives

    def _transform_word(self, digest: str, word: str) -> str:
        h = _hash_int(str(self.seed), digest[:16], word)
        if h % self.substitution_period == 0:
            return _MOCK_WORDS[h // self.substitution_period % len(_MOCK_WORDS)]
        return word

    def generate(self, req: GenerationRequest) -> Generation:
        digest = hashlib.sha256(
            (req.canonical() + f"|seed={self.seed}").encode("utf-8")
        ).hexdigest()
        payload = _prompt_payload(req.turns[-1][1])
        limit = req.max_output_tokens or self.default_max_tokens
        pieces = _TOKEN_RE.findall(payload)
        truncated = len(pieces) > limit
        tail = pieces[-limit:] if truncated else pieces
        out: list[str] = [f"[{self.backend_id}:{digest[:8]}] "]
        for piece in tail:
            word = piece.rstrip()
            ws = piece[len(word):]
            out.append(self._transform_word(digest, word) + ws)
        text = "".join(out).rstrip()
        tokens = None
        if req.want_token_logprobs:
            tokens = tuple(
                self._token_info(digest, i, tok, req.top_alternatives)
                for i, tok in enumerate(_TOKEN_RE.findall(text))
            )
        return Generation(
            text=text,
            backend_id=self.backend_id,
            tokens=tokens,
            latency_ms=0.0,
            truncated=truncated,
        )

    def _token_info(
        self, digest: str, index: int, surface: str, n_alts: int
    ) -> TokenInfo:
        base = -(_hash_int(digest, str(index), surface) % 1000) / 1000 * 3.0
        alts = tuple(
            (f"alt{k}", base - 0.3 * (k + 1)) for k in range(n_alts)
        )
        return TokenInfo(surface=surface, logprob=base, alternatives=alts)

    def score(self, req: ScoreRequest) -> list[TokenInfo]:
        infos = []
        for tok in _TOKEN_RE.findall(req.continuation):
            lp = mock_score_logprob(self.seed, req.context, tok)
            alts = tuple(
                (f"alt{k}", lp - 0.25 * (k + 1))
                for k in range(self.score_top_alternatives)
            )
            infos.append(TokenInfo(surface=tok, logprob=lp, alternatives=alts))
        return infos


class ScriptedBackend(Backend):
    """Replays canned responses; either a list consumed in order or a
    callable mapping each request to its reply text."""

    def __init__(self, script, backend_id: str = "scripted") -> None:
        self.backend_id = backend_id
        self._lock = threading.Lock()
        if callable(script):
            self._fn = script
            self._queue = None
        else:
            self._fn = None
            self._queue = list(script)

    def generate(self, req: GenerationRequest) -> Generation:
        if self._fn is not None:
            text = self._fn(req)
        else:
            with self._lock:
                if not self._queue:
                    raise BackendError("scripted backend ran out of responses")
                text = self._queue.pop(0)
        return Generation(text=text, backend_id=self.backend_id)


_TRANSIENT_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HttpChatBackend(Backend):
    """JSON-over-HTTP chat-completion client (industry-standard schema).

    Sends ``messages`` with role/content plus temperature, max_tokens and
    logprobs flags; reads the assistant message back.  Scoring uses the
    completion endpoint with echoed prompt logprobs (self-hosted-server
    semantics) and must be enabled per backend in config.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        backend_id: str | None = None,
        auth_env: str = "REFINELAB_API_KEY",
        timeout_s: float = 120.0,
        max_retries: int = 4,
        backoff_base_s: float = 1.0,
        max_concurrency: int = 8,
        supports_scoring: bool = False,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.backend_id = backend_id or f"http:{model}"
        self.auth_env = auth_env
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self.max_concurrency = max_concurrency
        self.supports_scoring = supports_scoring
        self._session = session or requests.Session()
        self._semaphore = threading.Semaphore(max_concurrency)
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post_with_retry(self, url: str, payload: dict) -> dict:
        body = json.dumps(payload)  # built once: retries are byte-identical
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._session.post(
                    url, data=body, headers=self._headers(), timeout=self.timeout_s
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code not in _TRANSIENT_STATUS:
                    raise BackendError(
                        f"{self.backend_id}: HTTP {resp.status_code}: "
                        f"{resp.text[:500]}"
                    )
                last_exc = BackendError(
                    f"{self.backend_id}: HTTP {resp.status_code}"
                )
            if attempt < self.max_retries:
                delay = self.backoff_base_s * (2**attempt)
                logger.warning(
                    "%s: transient failure (attempt %d/%d): %s; retrying in %.1fs",
                    self.backend_id,
                    attempt + 1,
                    self.max_retries + 1,
                    last_exc,
                    delay,
                )
                self._sleep(delay)
        raise RetryExhaustedError(
            f"{self.backend_id}: retry budget exhausted: {last_exc}"
        )

    def generate(self, req: GenerationRequest) -> Generation:
        messages = []
        if req.system_prompt:
            messages.append({"role": "system", "content": req.system_prompt})
        messages.extend({"role": r, "content": t} for r, t in req.turns)
        payload: dict = {
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
        }
        if req.max_output_tokens is not None:
            payload["max_tokens"] = req.max_output_tokens
        if req.want_token_logprobs:
            payload["logprobs"] = True
            if req.top_alternatives:
                payload["top_logprobs"] = req.top_alternatives
        if req.sample_seed is not None:
            payload["seed"] = req.sample_seed

        with self._semaphore:
            start = time.monotonic()
            data = self._post_with_retry(
                f"{self.endpoint}/chat/completions", payload
            )
            latency_ms = (time.monotonic() - start) * 1000

        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                f"{self.backend_id}: malformed response: {exc}"
            ) from exc
        truncated = choice.get("finish_reason") == "length"
        tokens = None
        logprobs = (choice.get("logprobs") or {}).get("content")
        if req.want_token_logprobs and logprobs:
            tokens = tuple(
                TokenInfo(
                    surface=item["token"],
                    logprob=min(0.0, float(item["logprob"])),
                    alternatives=tuple(
                        sorted(
                            (
                                (alt["token"], min(0.0, float(alt["logprob"])))
                                for alt in item.get("top_logprobs", [])
                            ),
                            key=lambda x: -x[1],
                        )
                    ),
                )
                for item in logprobs
            )
            exact = "".join(t.surface for t in tokens) == text
        else:
            exact = True
        return Generation(
            text=text,
            backend_id=self.backend_id,
            tokens=tokens,
            latency_ms=latency_ms,
            truncated=truncated,
            exact_detok=exact,
        )

    def score(self, req: ScoreRequest) -> list[TokenInfo]:
        if not self.supports_scoring:
            raise CapabilityError(
                f"backend {self.backend_id!r} does not support scoring"
            )
        payload = {
            "model": self.model,
            "prompt": req.context + req.continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 1,
        }
        with self._semaphore:
            data = self._post_with_retry(f"{self.endpoint}/completions", payload)
        try:
            lp = data["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            token_logprobs = lp["token_logprobs"]
            offsets = lp["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                f"{self.backend_id}: malformed scoring response: {exc}"
            ) from exc
        cut = len(req.context)
        infos = []
        for surface, logprob, offset in zip(tokens, token_logprobs, offsets):
            if offset < cut:
                continue
            infos.append(
                TokenInfo(surface=surface, logprob=min(0.0, float(logprob or 0.0)))
            )
        return infos
