import hashlib
import json
import threading
import time
from pathlib import Path

import httpx
import numpy as np
import pytest

from rdskit.dataio import GenerationSample, PromptRecord

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def make_sample(text="sample text", logprobs=None, embedding=None) -> GenerationSample:
    return GenerationSample(text=text, token_logprobs=logprobs, embedding=embedding)


def make_record(
    rec_id="r1",
    prompt="what is the answer?",
    samples=None,
    greedy=None,
    references=("42",),
    dataset_tag="unit",
    correctness_mode="exact_match",
) -> PromptRecord:
    if samples is None:
        samples = [
            make_sample("The answer is 42.", [-0.5], [1.0, 0.0]),
            make_sample("The answer is 41.", [-0.7], [0.0, 1.0]),
        ]
    if greedy is None:
        greedy = make_sample("The answer is 42.", [-0.2])
    return PromptRecord(
        id=rec_id,
        prompt=prompt,
        greedy=greedy,
        samples=samples,
        references=list(references),
        dataset_tag=dataset_tag,
        correctness_mode=correctness_mode,
    )


def unit_vector_for_text(text: str, dim: int) -> list[float]:
    """Deterministic fake embedding keyed by text content."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).tolist()


class FakeEmbedEndpoint:
    """In-process OpenAI-compatible /v1/embeddings endpoint.

    Instruments concurrency (max simultaneous handler entries) and records
    every request's text list. Per-request behavior can be scripted:
    `fail_statuses` yields an HTTP error per request until exhausted, and
    `omit_plan` drops the given indices from the corresponding response.
    """

    def __init__(self, dim=4, omit_plan=None, fail_statuses=None, delay=0.0):
        self.dim = dim
        self.delay = delay
        self.requests: list[list[str]] = []
        self.in_flight = 0
        self.max_observed_in_flight = 0
        self._lock = threading.Lock()
        self._omit_plan = list(omit_plan or [])
        self._fail_statuses = list(fail_statuses or [])

    def handler(self, request: httpx.Request) -> httpx.Response:
        with self._lock:
            self.in_flight += 1
            self.max_observed_in_flight = max(self.max_observed_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            body = json.loads(request.content)
            texts = list(body["input"])
            with self._lock:
                self.requests.append(texts)
                status = self._fail_statuses.pop(0) if self._fail_statuses else None
                omit = set(self._omit_plan.pop(0)) if self._omit_plan else set()
            if status is not None:
                return httpx.Response(status, json={"error": {"message": "scripted failure"}})
            data = [
                {"index": i, "embedding": unit_vector_for_text(t, self.dim)}
                for i, t in enumerate(texts)
                if i not in omit
            ]
            return httpx.Response(200, json={"object": "list", "data": data})
        finally:
            with self._lock:
                self.in_flight -= 1

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)


class FakeChatEndpoint:
    """In-process OpenAI-compatible /v1/chat/completions endpoint."""

    def __init__(self, with_logprobs=True, shortfall=0, fail_statuses=None):
        self.with_logprobs = with_logprobs
        self.shortfall = shortfall
        self.requests: list[dict] = []
        self._fail_statuses = list(fail_statuses or [])
        self._lock = threading.Lock()

    def handler(self, request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        with self._lock:
            self.requests.append(body)
            status = self._fail_statuses.pop(0) if self._fail_statuses else None
        if status is not None:
            return httpx.Response(status, json={"error": {"message": "scripted failure"}})
        n = int(body.get("n", 1))
        temperature = body.get("temperature", 1.0)
        prompt = body["messages"][0]["content"]
        n_return = max(0, n - self.shortfall)
        choices = []
        for i in range(n_return):
            text = f"greedy answer to {prompt}" if temperature == 0 else f"answer {i} to {prompt}"
            choice = {"index": i, "message": {"role": "assistant", "content": text}}
            if self.with_logprobs and body.get("logprobs"):
                choice["logprobs"] = {
                    "content": [{"token": w, "logprob": -0.1 * (j + 1)} for j, w in enumerate(text.split()[:3])]
                }
            choices.append(choice)
        return httpx.Response(200, json={"choices": choices})

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)
