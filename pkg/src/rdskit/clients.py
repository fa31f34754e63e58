"""Clients for OpenAI-compatible embedding and chat-completion endpoints.

Both clients are shareable handles: every call is independent, a semaphore
caps the number of in-flight requests per client, and transient failures are
retried with exponential backoff. The embedding client consults the cache
before the network and stores each successful chunk immediately, so a retry
after a partial failure never re-requests completed work.

Pass an ``httpx`` transport (e.g. ``httpx.MockTransport``) to run against an
in-process fake endpoint in tests.
"""

from __future__ import annotations

import os
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import httpx
import numpy as np

from .dataio import EmbeddingCache, GenerationSample
from .errors import (
    AuthenticationError,
    ConfigError,
    EncoderInconsistency,
    PartialBatch,
    TransportError,
)

API_KEY_ENV = "RDSKIT_API_KEY"
EMBED_URL_ENV = "RDSKIT_EMBED_URL"
LLM_URL_ENV = "RDSKIT_LLM_URL"

_TRANSIENT_STATUS = {408, 425, 429, 500, 502, 503, 504}


@dataclass
class EndpointConfig:
    """Connection settings for one OpenAI-compatible endpoint."""

    base_url: str
    model: str
    api_key: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    batch_size: int = 64
    retry_backoff: float = 0.5  # seconds; doubles per attempt

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("timeout must be > 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.api_key:
            self.api_key = os.environ.get(API_KEY_ENV, "")


@dataclass
class SamplingConfig:
    """How many completions to draw and how."""

    n: int = 10
    temperature: float = 1.0
    max_tokens: int = 256
    want_logprobs: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")


class _Transient(Exception):
    """Internal marker: the request may succeed if retried."""


class _BaseClient:
    def __init__(self, cfg: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self._http = httpx.Client(transport=transport, timeout=cfg.timeout)
        self._gate = threading.Semaphore(cfg.max_in_flight)
        self._calls_lock = threading.Lock()
        self.network_calls = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, path: str, body: dict) -> dict:
        """One POST under the in-flight gate; classifies failures."""
        url = self.cfg.base_url.rstrip("/") + path
        headers = {}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        with self._gate:
            with self._calls_lock:
                self.network_calls += 1
            try:
                resp = self._http.post(url, json=body, headers=headers)
            except httpx.TransportError as e:
                raise _Transient(str(e)) from e
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"{url} rejected credentials: HTTP {resp.status_code}")
        if resp.status_code in _TRANSIENT_STATUS:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as e:
            raise _Transient(f"unparseable response body: {e}") from e

    def _with_retries(self, fn):
        """Run fn() retrying transient failures with exponential backoff."""
        attempt = 0
        while True:
            try:
                return fn()
            except _Transient as e:
                if attempt >= self.cfg.max_retries:
                    raise TransportError(
                        f"giving up after {attempt + 1} attempts: {e}"
                    ) from e
                if self.cfg.retry_backoff > 0:
                    time.sleep(self.cfg.retry_backoff * (2**attempt))
                attempt += 1


class EmbeddingClient(_BaseClient):
    """Batched, cached access to an OpenAI-compatible /v1/embeddings endpoint."""

    def __init__(
        self,
        cfg: EndpointConfig,
        cache: EmbeddingCache | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(cfg, transport)
        self.cache = cache

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        """One vector per text, order preserved, all the same dimension.

        The cache is consulted before the network and populated after;
        duplicate texts are requested once. Requests are chunked at
        cfg.batch_size texts and run at most cfg.max_in_flight at a time.
        """
        if not texts:
            raise ValueError("embed_batch needs at least one text")
        unique: list[str] = list(dict.fromkeys(texts))
        resolved: dict[str, np.ndarray] = {}
        expected_dim: int | None = None
        if self.cache is not None:
            for t in unique:
                vec = self.cache.lookup(self.cfg.model, t)
                if vec is not None:
                    resolved[t] = vec
                    expected_dim = expected_dim or int(vec.size)
        missing = [t for t in unique if t not in resolved]
        chunks = [
            missing[i : i + self.cfg.batch_size]
            for i in range(0, len(missing), self.cfg.batch_size)
        ]
        if chunks:
            with ThreadPoolExecutor(max_workers=min(self.cfg.max_in_flight, len(chunks))) as ex:
                futures = {ex.submit(self._embed_chunk, c): c for c in chunks}
                for fut in as_completed(futures):
                    chunk = futures[fut]
                    vectors = fut.result()
                    dim = int(vectors[0].size)
                    if expected_dim is None:
                        expected_dim = dim
                    elif dim != expected_dim:
                        raise EncoderInconsistency(
                            f"embedding dimension {dim} disagrees with {expected_dim}"
                        )
                    for t, vec in zip(chunk, vectors):
                        resolved[t] = vec
                        if self.cache is not None:
                            self.cache.store(self.cfg.model, t, vec)
        return [resolved[t] for t in texts]

    def _embed_chunk(self, chunk: list[str]) -> list[np.ndarray]:
        """Embed one chunk, re-requesting only the texts a response omitted."""
        vectors: dict[int, np.ndarray] = {}
        pending = list(range(len(chunk)))
        attempt = 0
        while True:
            req_texts = [chunk[i] for i in pending]
            failure: _Transient | None = None
            try:
                payload = self._post(
                    "/v1/embeddings", {"model": self.cfg.model, "input": req_texts}
                )
                got = self._parse_embedding_items(payload, len(req_texts))
                for j, vec in got.items():
                    vectors[pending[j]] = vec
                pending = [i for k, i in enumerate(pending) if k not in got]
                if not pending:
                    return [vectors[i] for i in range(len(chunk))]
                failure = _Transient(f"response omitted {len(pending)} of {len(req_texts)} texts")
            except _Transient as e:
                failure = e
            if attempt >= self.cfg.max_retries:
                raise TransportError(f"giving up after {attempt + 1} attempts: {failure}")
            if self.cfg.retry_backoff > 0:
                time.sleep(self.cfg.retry_backoff * (2**attempt))
            attempt += 1

    @staticmethod
    def _parse_embedding_items(payload: dict, n_requested: int) -> dict[int, np.ndarray]:
        items = payload.get("data")
        if not isinstance(items, list):
            raise _Transient("response has no data array")
        got: dict[int, np.ndarray] = {}
        for pos, item in enumerate(items):
            idx = item.get("index", pos)
            if not isinstance(idx, int) or not 0 <= idx < n_requested:
                continue
            vec = np.asarray(item.get("embedding", []), dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)):
                continue
            got[idx] = vec
        dims = {int(v.size) for v in got.values()}
        if len(dims) > 1:
            raise EncoderInconsistency(f"one response returned dimensions {sorted(dims)}")
        return got


class LLMClient(_BaseClient):
    """Sampling access to an OpenAI-compatible /v1/chat/completions endpoint."""

    def sample_generations(self, prompt: str, sampling: SamplingConfig) -> list[GenerationSample]:
        """Draw sampling.n completions for one prompt.

        Samples carry per-token log-probabilities when requested and the
        endpoint supplies them (a missing logprobs block degrades to a
        warning, not an error). Fewer choices than requested raises
        PartialBatch carrying the parsed samples. Embeddings are never
        filled here.
        """
        if not prompt:
            raise ValueError("prompt must be non-empty")
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "n": sampling.n,
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
        }
        if sampling.want_logprobs:
            body["logprobs"] = True
        payload = self._with_retries(lambda: self._post("/v1/chat/completions", body))
        choices = payload.get("choices")
        if not isinstance(choices, list):
            raise TransportError("completion response has no choices array")
        samples = [self._parse_choice(c, sampling.want_logprobs) for c in choices]
        if sampling.want_logprobs and any(s.token_logprobs is None for s in samples):
            warnings.warn(
                "endpoint returned no token log-probabilities; "
                "probability-weighted scores will be unavailable",
                RuntimeWarning,
                stacklevel=2,
            )
        if len(samples) < sampling.n:
            raise PartialBatch(
                f"requested {sampling.n} completions, endpoint returned {len(samples)}",
                samples,
            )
        return samples[: sampling.n]

    def greedy_generation(self, prompt: str, max_tokens: int = 256) -> GenerationSample:
        """Greedy output: temperature 0, n=1, as its own call."""
        sampling = SamplingConfig(n=1, temperature=0.0, max_tokens=max_tokens)
        return self.sample_generations(prompt, sampling)[0]

    @staticmethod
    def _parse_choice(choice: dict, want_logprobs: bool) -> GenerationSample:
        message = choice.get("message") or {}
        text = message.get("content") or ""
        logprobs = None
        if want_logprobs:
            block = choice.get("logprobs") or {}
            content = block.get("content")
            if isinstance(content, list):
                vals = [t.get("logprob") for t in content if isinstance(t, dict)]
                if all(isinstance(v, (int, float)) for v in vals):
                    logprobs = [float(v) for v in vals]
            elif isinstance(block.get("token_logprobs"), list):
                # legacy completions-style field some servers emit
                vals = block["token_logprobs"]
                if all(isinstance(v, (int, float)) for v in vals):
                    logprobs = [float(v) for v in vals]
        return GenerationSample(text=text, token_logprobs=logprobs)
