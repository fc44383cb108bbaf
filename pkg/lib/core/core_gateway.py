"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import hashlib
import logging
import re
import threading
import time
from collections.abc import Callable
from pathlib import Path
from typing import Any, Literal, Protocol, Self

import httpx
import numpy as np
import orjson
import yaml
from pydantic import BaseModel, Field, model_validator

from lib.core.core_config import GatewayConfig, GatewayProfile, RetryPolicy
from lib.core.core_schemas_errors import (
    ConfigError,
    EmptyInputError,
    ProtocolError,
    TransportError,
)


logger = logging.getLogger(__name__)

WORD = re.compile(r"\w+")
NORM_TOLERANCE = 1e-6


class Message(BaseModel):
    """One chat message."""
    role: Literal["system", "user", "assistant"]
    content: str

    model_config = {"frozen": True}


class ChatRequest(BaseModel):
    """A chat-completion request.

    Attributes:
        messages: Conversation; the first message is the system prompt.
        max_tokens: Generation budget.
        temperature: Sampling temperature; None uses the profile default.
        top_p: Top-p; None uses the profile default.
        t_chat: Chat-template id forwarded to the backend when set.
        profile: Named role profile selecting the model.
    """
    messages: list[Message]
    max_tokens: int = Field(ge=1)
    temperature: float | None = Field(default=None, ge=0.0)
    top_p: float | None = Field(default=None, gt=0.0, le=1.0)
    t_chat: str = ""
    profile: str = "constructor"

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_messages(self) -> Self:
        if not self.messages:
            error_message = "A chat request needs at least one message"
            raise ValueError(error_message)
        if self.messages[0].role != "system":
            error_message = "The first message of a chat request must be the system prompt"
            raise ValueError(error_message)
        return self

    @classmethod
    def build(cls, system: str, user: str | None = None, **kwargs: Any) -> "ChatRequest":
        """Build a request from a system prompt and an optional user message."""
        messages = [Message(role="system", content=system)]
        if user is not None:
            messages.append(Message(role="user", content=user))
        return cls(messages=messages, **kwargs)

    @property
    def prompt(self) -> str:
        """All message contents joined by blank lines; what mock rules match against."""
        return "\n\n".join(message.content for message in self.messages)

    def digest(self) -> str:
        """Return the sha256 of the canonical message list."""
        payload = [[message.role, message.content] for message in self.messages]
        return hashlib.sha256(orjson.dumps(payload)).hexdigest()


class Exchange(BaseModel):
    """A recorded gateway call."""
    kind: Literal["chat", "embed"]
    request: ChatRequest | list[str]
    response: str | None


ExchangeHook = Callable[[Exchange], None]


class Gateway(Protocol):
    """Uniform access to chat, embedding and tokenizer backends."""

    def chat(self, request: ChatRequest) -> str:
        """Return the assistant text for a request."""
        ...

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """Return one unit vector per text, order preserved."""
        ...

    def token_count(self, text: str) -> int:
        """Return the number of tokens of a text."""
        ...


def normalize_vector(values: Any) -> np.ndarray:
    """Return the L2-normalized float64 copy of a vector.

    Raises:
        ProtocolError: If the vector is empty, non-finite or zero.
    """
    vector = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vector)) if vector.size else 0.0
    if vector.ndim != 1 or not vector.size or not np.isfinite(norm) or norm == 0.0:
        error_message = "Backend returned an empty, zero or non-finite embedding"
        raise ProtocolError(error_message)
    return vector / norm


def whitespace_token_count(text: str) -> int:
    """Count whitespace-separated tokens."""
    return len(text.split())


class _RetryableStatusError(Exception):
    """A 429 or 5xx response."""


RETRYABLE = (httpx.TransportError, _RetryableStatusError)


class RetryingGateway:
    """Retry and transcript plumbing shared by every gateway.

    Attributes:
        retry: Retry policy.
        on_exchange: Optional callback receiving every completed exchange.
        transcript: Completed exchanges when recording is enabled.
    """

    def __init__(
        self,
        retry: RetryPolicy | None = None,
        on_exchange: ExchangeHook | None = None,
        record: bool = False,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        """Initialize the shared state.

        Args:
            retry: Retry policy; defaults to RetryPolicy().
            on_exchange: Callback receiving every completed exchange.
            record: Keep a transcript of completed exchanges.
            sleep: Sleep function used between retries.

        Returns:
            None.
        """
        self.retry = retry or RetryPolicy()
        self.on_exchange = on_exchange
        self.record = record
        self.transcript: list[Exchange] = []
        self._sleep = sleep
        self._lock = threading.Lock()

    def _with_retries[T](self, call: Callable[[], T], what: str) -> T:
        """Run a call under the retry policy, sleeping between attempts.

        Raises:
            TransportError: When every attempt failed with a retryable error.
        """
        last_error: Exception | None = None
        attempts = self.retry.max_attempts

        for attempt in range(1, attempts + 1):
            try:
                return call()
            except RETRYABLE as e:
                last_error = e
                if attempt == attempts:
                    break
                logger.warning("%s failed (attempt %d/%d): %s", what, attempt, attempts, e)
                self._sleep(self.retry.delay(attempt))

        error_message = f"{what} failed after {attempts} attempt(s): {last_error}"
        raise TransportError(error_message) from last_error

    def _log_exchange(self, exchange: Exchange) -> None:
        """Record a completed exchange and hand it to the hook."""
        if self.record:
            with self._lock:
                self.transcript.append(exchange)
        if self.on_exchange is not None:
            self.on_exchange(exchange)


class HttpGateway(RetryingGateway):
    """Gateway speaking the OpenAI-compatible wire protocol over httpx."""

    def __init__(
        self,
        config: GatewayConfig,
        client: httpx.Client | None = None,
        on_exchange: ExchangeHook | None = None,
        record: bool = False,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        """Initialize the HTTP gateway.

        Args:
            config: Gateway configuration (endpoint, models, retry policy, profiles).
            client: Optional preconfigured httpx client (tests pass a MockTransport).
            on_exchange: Callback receiving every completed exchange.
            record: Keep a transcript of completed exchanges.
            sleep: Sleep function used between retries.

        Returns:
            None.
        """
        super().__init__(config.retry, on_exchange, record, sleep)
        self.config = config
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self.client = client or httpx.Client(
            base_url=config.base_url.rstrip("/") + "/",
            headers=headers,
            timeout=config.retry.timeout,
        )
        self._tokenize_supported: bool | None = None

    def chat(self, request: ChatRequest) -> str:
        """Send a chat-completion request and return the assistant text.

        Raises:
            - TransportError: When every attempt failed with a transport error, 429 or 5xx.
            - ProtocolError: On other 4xx answers or a malformed body.
        """
        profile = self._profile(request.profile)
        payload: dict[str, Any] = {
            "model": profile.model or self.config.chat_model,
            "messages": [message.model_dump() for message in request.messages],
            "max_tokens": request.max_tokens,
            "temperature": profile.temperature if request.temperature is None else request.temperature,
            "top_p": profile.top_p if request.top_p is None else request.top_p,
        }
        if request.t_chat:
            payload["chat_template"] = request.t_chat

        body = self._with_retries(lambda: self._post("chat/completions", payload), "chat")
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            error_message = "chat response has no choices[0].message.content"
            raise ProtocolError(error_message) from e
        if not isinstance(content, str):
            error_message = "chat response content is not a string"
            raise ProtocolError(error_message)

        self._log_exchange(Exchange(kind="chat", request=request, response=content))
        return content

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """Embed texts and return unit vectors in input order.

        Raises:
            - EmptyInputError: If texts is empty.
            - TransportError: When every attempt failed.
            - ProtocolError: On a malformed body.
        """
        if not texts:
            error_message = "embed() needs at least one text"
            raise EmptyInputError(error_message)

        payload = {"model": self.config.embed_model, "input": list(texts)}
        body = self._with_retries(lambda: self._post("embeddings", payload), "embed")

        try:
            items = sorted(body["data"], key=lambda item: item["index"])
            vectors = [normalize_vector(item["embedding"]) for item in items]
        except (KeyError, TypeError) as e:
            error_message = "embedding response is missing data[].embedding"
            raise ProtocolError(error_message) from e

        if len(vectors) != len(texts) or len({vector.shape for vector in vectors}) > 1:
            error_message = f"embedding response has {len(vectors)} vectors of mixed or wrong shape for {len(texts)} texts"
            raise ProtocolError(error_message)

        self._log_exchange(Exchange(kind="embed", request=list(texts), response=None))
        return vectors

    def token_count(self, text: str) -> int:
        """Count tokens with the backend tokenizer, or by whitespace if it has none."""
        if not text:
            return 0
        if self._tokenize_supported is False:
            return whitespace_token_count(text)

        try:
            response = self.client.post("tokenize", json={"model": self.config.chat_model, "prompt": text})
            response.raise_for_status()
            body = response.json()
            count = int(body["count"]) if "count" in body else len(body["tokens"])
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as e:
            logger.info("Tokenizer endpoint unavailable (%s); counting whitespace tokens", e)
            self._tokenize_supported = False
            return whitespace_token_count(text)

        self._tokenize_supported = True
        return count

    def close(self) -> None:
        """Close the underlying HTTP client."""
        self.client.close()

    ##################################################################################################################
    #   PRIVATE METHODS
    ##################################################################################################################

    def _profile(self, name: str) -> GatewayProfile:
        """Return a decoding profile by name."""
        return self.config.profiles.get(name) or GatewayProfile()

    def _post(self, endpoint: str, payload: dict[str, Any]) -> Any:
        """POST a JSON payload and return the decoded body.

        Raises:
            - _RetryableStatusError: On 429 and 5xx answers.
            - ProtocolError: On other error statuses or a body that is not JSON.
        """
        response = self.client.post(endpoint, content=orjson.dumps(payload), headers={"Content-Type": "application/json"})

        if response.status_code == 429 or response.status_code >= 500:  # noqa: PLR2004
            error_message = f"{endpoint} answered {response.status_code}"
            raise _RetryableStatusError(error_message)
        if response.status_code >= 400:  # noqa: PLR2004
            error_message = f"{endpoint} answered {response.status_code}: {response.text[:200]}"
            raise ProtocolError(error_message)

        try:
            return orjson.loads(response.content)
        except orjson.JSONDecodeError as e:
            error_message = f"{endpoint} answered with a body that is not JSON"
            raise ProtocolError(error_message) from e


##################################################################################################################
#   MOCK GATEWAY
##################################################################################################################

Handler = Callable[[ChatRequest, re.Match[str] | None], str]


class MockRule(BaseModel):
    """A regex rule of the mock rule table.

    Attributes:
        pattern: Regex searched (DOTALL) in the joined prompt.
        response: Response template; backreferences like \\1 are expanded.
        handler: Name of a registered handler, used instead of response.
    """
    pattern: str
    response: str | None = None
    handler: str | None = None

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_target(self) -> Self:
        if (self.response is None) == (self.handler is None):
            error_message = f"rule '{self.pattern}' needs exactly one of response or handler"
            raise ValueError(error_message)
        re.compile(self.pattern)
        return self


class MockFailure(BaseModel):
    """Injected transport failures for requests whose prompt matches a regex.

    Attributes:
        pattern: Regex searched in the joined prompt.
        times: Number of failing attempts; -1 fails forever.
    """
    pattern: str
    times: int = -1


class MockGateway(RetryingGateway):
    """Deterministic offline gateway.

    Chat responses come from, in order: an exact prompt-hash table, the first
    matching regex rule, the default response. Embeddings are seeded hash
    vectors ("hash") or normalized sums of per-word hash vectors ("bow"), so
    texts sharing words are similar. token_count splits on whitespace.
    """

    def __init__(
        self,
        rules: list[MockRule] | None = None,
        table: dict[str, str] | None = None,
        default: str = "[]",
        embedding: Literal["hash", "bow"] = "bow",
        dim: int = 64,
        seed: int = 0,
        handlers: dict[str, Handler] | None = None,
        retry: RetryPolicy | None = None,
        on_exchange: ExchangeHook | None = None,
        record: bool = True,
        sleep: Callable[[float], None] = lambda _seconds: None,
    ) -> None:
        """Initialize the mock.

        Args:
            rules: Regex rule table, first match wins.
            table: Responses keyed by ChatRequest.digest().
            default: Response when nothing matches.
            embedding: Embedding mode.
            dim: Embedding dimension.
            seed: Embedding seed.
            handlers: Extra named handlers, merged over the built-in ones.
            retry: Retry policy applied to injected failures.
            on_exchange: Callback receiving every completed exchange.
            record: Keep a transcript (on by default for inspection in tests).
            sleep: Sleep function used between retries.

        Returns:
            None.
        """
        super().__init__(retry, on_exchange, record, sleep)
        self.rules = list(rules or [])
        self._compiled = [re.compile(rule.pattern, re.DOTALL) for rule in self.rules]
        self.table = dict(table or {})
        self.default = default
        self.embedding = embedding
        self.dim = dim
        self.seed = seed
        self.handlers: dict[str, Handler] = {**BUILTIN_HANDLERS, **(handlers or {})}
        self.failures: list[MockFailure] = []
        self._pending_failures = 0
        self._word_vectors: dict[str, np.ndarray] = {}

        for rule in self.rules:
            if rule.handler is not None and rule.handler not in self.handlers:
                error_message = f"Unknown mock handler '{rule.handler}'"
                raise ConfigError(error_message)

    @classmethod
    def from_yaml(cls, path: Path | None = None, **kwargs: Any) -> "MockGateway":
        """Build a mock from a YAML rule file; None loads the bundled fixture rules.

        The file holds `rules` (list of MockRule), optional `default` and optional `table`.

        Raises:
            ConfigError: If the file cannot be read or validated.
        """
        if path is None:
            path = Path(__file__).parent / "templates" / "mock" / "rules.yaml"
        try:
            with path.open(encoding="utf-8") as file:
                data = yaml.safe_load(file) or {}
            rules = [MockRule.model_validate(rule) for rule in data.get("rules", [])]
        except (OSError, yaml.YAMLError, ValueError) as e:
            error_message = f"Mock rules {path} could not be loaded: {e}"
            raise ConfigError(error_message) from e

        kwargs.setdefault("default", data.get("default", "[]"))
        kwargs.setdefault("table", data.get("table", {}))
        return cls(rules=rules, **kwargs)

    @classmethod
    def from_config(cls, config: GatewayConfig, **kwargs: Any) -> "MockGateway":
        """Build a mock from the gateway section of the application config."""
        return cls.from_yaml(
            config.mock_rules,
            embedding=config.mock_embedding,
            dim=config.embedding_dim,
            seed=config.mock_seed,
            retry=config.retry,
            **kwargs,
        )

    def add_rule(self, pattern: str, response: str | None = None, handler: str | Handler | None = None) -> None:
        """Prepend a rule, so it wins over the existing table.

        Args:
            pattern: Regex searched in the prompt.
            response: Response template.
            handler: Handler name or callable.
        """
        if callable(handler):
            name = f"_inline_{len(self.handlers)}"
            self.handlers[name] = handler
            handler = name
        rule = MockRule(pattern=pattern, response=response, handler=handler)
        self.rules.insert(0, rule)
        self._compiled.insert(0, re.compile(pattern, re.DOTALL))

    def fail(self, pattern: str = ".*", times: int = -1) -> None:
        """Inject transport failures for matching prompts."""
        self.failures.append(MockFailure(pattern=pattern, times=times))

    def fail_next(self, times: int) -> None:
        """Make the next `times` chat attempts fail with a timeout."""
        self._pending_failures = times

    def chat(self, request: ChatRequest) -> str:
        """Return the scripted response for a request.

        Raises:
            TransportError: When injected failures outlast the retry budget.
        """
        response = self._with_retries(lambda: self._attempt(request), "chat")
        self._log_exchange(Exchange(kind="chat", request=request, response=response))
        return response

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """Return deterministic unit vectors.

        Raises:
            EmptyInputError: If texts is empty.
        """
        if not texts:
            error_message = "embed() needs at least one text"
            raise EmptyInputError(error_message)

        vectors = [self._embed_one(text) for text in texts]
        self._log_exchange(Exchange(kind="embed", request=list(texts), response=None))
        return vectors

    def token_count(self, text: str) -> int:
        """Count whitespace-separated tokens."""
        return whitespace_token_count(text)

    ##################################################################################################################
    #   PRIVATE METHODS
    ##################################################################################################################

    def _attempt(self, request: ChatRequest) -> str:
        """Answer one request after raising any injected failure; table entries win over rules."""
        prompt = request.prompt
        with self._lock:
            if self._pending_failures > 0:
                self._pending_failures -= 1
                error_message = "injected timeout"
                raise httpx.ReadTimeout(error_message)
            for failure in self.failures:
                if failure.times != 0 and re.search(failure.pattern, prompt, re.DOTALL):
                    if failure.times > 0:
                        failure.times -= 1
                    error_message = f"injected timeout for /{failure.pattern}/"
                    raise httpx.ReadTimeout(error_message)

        digest = request.digest()
        if digest in self.table:
            return self.table[digest]

        for rule, compiled in zip(self.rules, self._compiled, strict=True):
            match = compiled.search(prompt)
            if match is None:
                continue
            if rule.handler is not None:
                return self.handlers[rule.handler](request, match)
            return match.expand(rule.response or "")

        return self.default

    def _word_vector(self, word: str) -> np.ndarray:
        """Return the seeded random vector of one word."""
        with self._lock:
            cached = self._word_vectors.get(word)
        if cached is not None:
            return cached

        digest = hashlib.sha256(f"{self.seed}:{word}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vector = rng.standard_normal(self.dim)
        with self._lock:
            self._word_vectors[word] = vector
        return vector

    def _embed_one(self, text: str) -> np.ndarray:
        """Embed one text in the configured mode as a unit vector."""
        words = WORD.findall(text.casefold())
        if self.embedding == "hash" or not words:
            return normalize_vector(self._word_vector("\x00" + text))
        return normalize_vector(np.sum([self._word_vector(word) for word in words], axis=0))


##################################################################################################################
#   BUILT-IN MOCK HANDLERS
##################################################################################################################

NUMBERED_LINE = re.compile(r"^\[(\d+)\] ", re.MULTILINE)
QUESTION_LINE = re.compile(r"^Question: (.*)$", re.MULTILINE)
CAPITALIZED = re.compile(r"\b[A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*")
QUESTION_WORDS = frozenset({
    "what", "who", "whom", "whose", "where", "when", "which", "how", "why",
    "in", "the", "a", "an", "did", "does", "do", "is", "was", "are", "were",
})


def _keep_all_numbered(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Select every numbered line of a filter prompt."""
    return orjson.dumps([int(number) for number in NUMBERED_LINE.findall(request.prompt)]).decode()


def _ner_capitalized(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Return capitalized word runs of the question, leading question words dropped."""
    found = QUESTION_LINE.findall(request.prompt)
    question = found[-1] if found else ""
    entities: list[str] = []
    for run in CAPITALIZED.findall(question):
        words = run.split()
        while words and words[0].casefold() in QUESTION_WORDS:
            words = words[1:]
        if words and " ".join(words) not in entities:
            entities.append(" ".join(words))
    return orjson.dumps(entities).decode()


def _score_by_path_length(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Score a path 1 + number of hops, capped at 5."""
    path_line = re.search(r"^Path: (.*)$", request.prompt, re.MULTILINE)
    if path_line is None:
        return "1"
    hops = (path_line.group(1).count(" -> ") + path_line.group(1).count(" <- ")) // 2
    return str(min(5, 1 + hops))


def _answer_last_tail(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Answer with the tail of the last knowledge line written as 'head | relation | tail'."""
    lines = [line[2:] for line in request.prompt.splitlines() if line.startswith("- ")]
    if not lines:
        return "unknown"
    return lines[-1].rsplit(" | ", 1)[-1].strip()


def _mcq_options(prompt: str) -> dict[str, str]:
    """Map option letters to option texts in a question prompt."""
    return {
        letter: text.strip()
        for letter, text in re.findall(r"^([ABCD])\. (.*)$", prompt, re.MULTILINE)
    }


def _answer_from_context(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Pick the option whose text occurs in the context block; "A" otherwise."""
    prompt = request.prompt
    context_block = prompt.split("Here is a multiple-choice question:", 1)[0].casefold()
    for letter, option in sorted(_mcq_options(prompt).items()):
        if option and option.casefold() in context_block:
            return letter
    return "A"


def _random_letter(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Return a letter chosen by hashing the prompt."""
    return "ABCD"[int(request.digest()[:8], 16) % 4]


TRIPLE_LINE = re.compile(r"^\((.*), (.*), (.*)\)$", re.MULTILINE)


def _sufficient_if_chained(request: ChatRequest, _match: re.Match[str] | None) -> str:
    """Answer "Yes" when two listed triples chain (a tail is another triple's head)."""
    triples = TRIPLE_LINE.findall(request.prompt)
    heads = {head for head, _, _ in triples}
    chained = any(tail in heads and tail != head for head, _, tail in triples)
    return "Yes" if chained else "No"


BUILTIN_HANDLERS: dict[str, Handler] = {
    "sufficient_if_chained": _sufficient_if_chained,
    "keep_all_numbered": _keep_all_numbered,
    "ner_capitalized": _ner_capitalized,
    "score_by_path_length": _score_by_path_length,
    "answer_last_tail": _answer_last_tail,
    "answer_from_context": _answer_from_context,
    "random_letter": _random_letter,
}


def make_gateway(config: GatewayConfig, **kwargs: Any) -> HttpGateway | MockGateway:
    """Return the gateway selected by the configuration."""
    if config.mock:
        return MockGateway.from_config(config, **kwargs)
    return HttpGateway(config, **kwargs)
