"""Uniform completion interface over live, record, and replay backends.

Fixture key is the first 16 hex digits of SHA-256 over stage and the byte-exact
prompt; no prompt normalization is applied, so any formatting change is a
different fixture. Exchanges keep wall-clock fields in memory only; persisted
traces exclude them so that a recorded run and its replay serialize identically.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

STAGES = (
    "col_sql",
    "col_text",
    "row_sql",
    "row_text",
    "math_classify",
    "reason_sql",
    "reason_text",
)

# The stages itemized by the sample-budget table: retrieval plus query.
# The math classifier is reported separately and never counts toward the
# 6-10 generation envelope.
BUDGET_STAGES = (
    "col_sql",
    "col_text",
    "row_sql",
    "row_text",
    "reason_sql",
    "reason_text",
)


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """HTTP transport failed after bounded retries."""


class ReplayMissError(GatewayError):
    """Replay backend has no fixture for the requested (stage, prompt)."""

    def __init__(self, digest: str, stage: str):
        self.digest = digest
        self.stage = stage
        super().__init__(f"no fixture for stage {stage!r} digest {digest}")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float
    top_p: float
    max_output_tokens: int
    n_samples: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_output_tokens": self.max_output_tokens,
            "n_samples": self.n_samples,
        }


@dataclass
class LlmExchange:
    stage: str
    prompt: str
    params: SamplingParams
    completions: list[str]
    backend: str
    timestamp: float = 0.0
    latency: float = 0.0

    @property
    def digest(self) -> str:
        return exchange_digest(self.stage, self.prompt)

    def to_dict(self) -> dict:
        # timestamp/latency/backend deliberately omitted: trace files must be
        # byte-identical between a recorded run and its replay (the run's
        # backend is recorded once in the config echo).
        return {
            "stage": self.stage,
            "digest": self.digest,
            "prompt": self.prompt,
            "params": self.params.to_dict(),
            "completions": self.completions,
        }


def exchange_digest(stage: str, prompt: str) -> str:
    h = hashlib.sha256()
    h.update(stage.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()[:16]


class FixtureStore:
    """One JSON file per digest; concurrent reads, serialized writes."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._write_lock = threading.Lock()

    def path_for(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def load(self, digest: str) -> dict | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as f:
            return json.load(f)

    def save(self, digest: str, record: dict) -> None:
        with self._write_lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = self.path_for(digest).with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(record, f, ensure_ascii=False, indent=2)
                f.write("\n")
            tmp.replace(self.path_for(digest))


class ReplayBackend:
    """Serves completions exclusively from a fixture store."""

    name = "replay"

    def __init__(self, store: FixtureStore):
        self.store = store

    def fetch(self, stage: str, prompt: str, params: SamplingParams) -> list[str]:
        digest = exchange_digest(stage, prompt)
        record = self.store.load(digest)
        if record is None:
            raise ReplayMissError(digest, stage)
        return list(record["completions"])


class LiveBackend:
    """Chat-completion HTTP backend with exponential-backoff retries."""

    name = "live"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 5,
        base_delay: float = 0.5,
    ):
        import requests

        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self._session = requests.Session()

    def fetch(self, stage: str, prompt: str, params: SamplingParams) -> list[str]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "n": params.n_samples,
            "max_tokens": params.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                delay = self.base_delay * (2 ** (attempt - 1))
                if last_retry_after is not None:
                    delay = max(delay, last_retry_after)
                time.sleep(delay)
            last_retry_after = None
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except Exception as exc:  # connection/timeout errors
                last_error = exc
                log.warning("transport error on %s (attempt %d): %s", stage, attempt + 1, exc)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(
                    f"HTTP {response.status_code} from {self.endpoint}"
                )
                retry_after = response.headers.get("Retry-After")
                if retry_after is not None:
                    try:
                        last_retry_after = float(retry_after)
                    except ValueError:
                        pass
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"HTTP {response.status_code} from {self.endpoint}: {response.text[:200]}"
                )
            body = response.json()
            return [c["message"]["content"] for c in body["choices"]]
        raise TransportError(
            f"giving up on {stage} after {self.max_attempts} attempts: {last_error}"
        )


class RecordBackend:
    """Live backend that persists every exchange as a replayable fixture."""

    name = "record"

    def __init__(self, live: LiveBackend, store: FixtureStore):
        self.live = live
        self.store = store

    def fetch(self, stage: str, prompt: str, params: SamplingParams) -> list[str]:
        completions = self.live.fetch(stage, prompt, params)
        self.store.save(
            exchange_digest(stage, prompt),
            {
                "stage": stage,
                "prompt": prompt,
                "params": params.to_dict(),
                "completions": completions,
            },
        )
        return completions


class LlmClient:
    """Stage-aware completion client with an in-flight cap and sample counter."""

    def __init__(self, backend, max_in_flight: int = 4):
        self.backend = backend
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._counter_lock = threading.Lock()
        self.samples_issued = 0

    def complete(self, stage: str, prompt: str, params: SamplingParams) -> LlmExchange:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}; valid stages: {list(STAGES)}")
        started = time.time()
        with self._semaphore:
            completions = self.backend.fetch(stage, prompt, params)
        if len(completions) > params.n_samples:
            completions = completions[: params.n_samples]
        if len(completions) < params.n_samples:
            raise GatewayError(
                f"backend returned {len(completions)} completions for stage {stage!r}, "
                f"expected {params.n_samples}"
            )
        with self._counter_lock:
            self.samples_issued += params.n_samples
        return LlmExchange(
            stage=stage,
            prompt=prompt,
            params=params,
            completions=list(completions),
            backend=self.backend.name,
            timestamp=started,
            latency=time.time() - started,
        )


def generation_budget(exchanges: list[LlmExchange]) -> int:
    """Samples spent on the retrieval and query stages for one example.

    The math classifier stage is excluded; it is accounted separately so the
    budget stays comparable with the published per-category sample counts.
    """
    return sum(e.params.n_samples for e in exchanges if e.stage in BUDGET_STAGES)
