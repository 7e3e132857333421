from __future__ import annotations

import json
import threading

import pytest

from llm_server import LocalLlmServer
from tabqa.gateway import (
    BUDGET_STAGES,
    FixtureStore,
    GatewayError,
    LiveBackend,
    LlmClient,
    LlmExchange,
    RecordBackend,
    ReplayBackend,
    ReplayMissError,
    SamplingParams,
    exchange_digest,
    generation_budget,
)

P1 = SamplingParams(temperature=0.0, top_p=1.0, max_output_tokens=64, n_samples=1)
P2 = SamplingParams(temperature=0.4, top_p=1.0, max_output_tokens=64, n_samples=2)


class TestSamplingParams:
    @pytest.mark.parametrize("kwargs", [
        {"temperature": -0.1}, {"temperature": 2.1},
        {"top_p": 0.0}, {"top_p": 1.5},
        {"max_output_tokens": 0}, {"n_samples": 0},
    ])
    def test_bounds(self, kwargs):
        base = {"temperature": 0.5, "top_p": 1.0, "max_output_tokens": 16, "n_samples": 1}
        base.update(kwargs)
        with pytest.raises(ValueError):
            SamplingParams(**base)


class TestDigest:
    def test_sixteen_hex(self):
        digest = exchange_digest("col_sql", "prompt text")
        assert len(digest) == 16
        int(digest, 16)

    def test_stage_separation(self):
        assert exchange_digest("col_sql", "x") != exchange_digest("col_text", "x")

    def test_prompt_byte_exact(self):
        assert exchange_digest("col_sql", "a b") != exchange_digest("col_sql", "a  b")


class TestReplay:
    def test_round_trip(self, tmp_path):
        store = FixtureStore(tmp_path)
        digest = exchange_digest("col_sql", "hello")
        store.save(digest, {"stage": "col_sql", "prompt": "hello",
                            "params": P2.to_dict(), "completions": ["a", "b"]})
        client = LlmClient(ReplayBackend(store))
        exchange = client.complete("col_sql", "hello", P2)
        assert exchange.completions == ["a", "b"]
        assert exchange.backend == "replay"
        assert exchange.prompt == "hello"  # byte-exact what was sent
        assert client.samples_issued == 2  # counter advanced by n_samples

    def test_miss_names_digest(self, tmp_path):
        client = LlmClient(ReplayBackend(FixtureStore(tmp_path)))
        digest = exchange_digest("col_sql", "missing")
        with pytest.raises(ReplayMissError) as err:
            client.complete("col_sql", "missing", P1)
        assert digest in str(err.value)
        assert len(err.value.digest) == 16

    def test_empty_completion_passes_through(self, tmp_path):
        store = FixtureStore(tmp_path)
        digest = exchange_digest("reason_text", "p")
        store.save(digest, {"stage": "reason_text", "prompt": "p",
                            "params": P1.to_dict(), "completions": [""]})
        client = LlmClient(ReplayBackend(store))
        exchange = client.complete("reason_text", "p", P1)
        assert exchange.completions == [""]

    def test_too_few_completions_is_error(self, tmp_path):
        store = FixtureStore(tmp_path)
        digest = exchange_digest("col_sql", "p")
        store.save(digest, {"stage": "col_sql", "prompt": "p",
                            "params": P1.to_dict(), "completions": ["only one"]})
        client = LlmClient(ReplayBackend(store))
        with pytest.raises(GatewayError):
            client.complete("col_sql", "p", P2)

    def test_extra_completions_sliced(self, tmp_path):
        store = FixtureStore(tmp_path)
        digest = exchange_digest("col_sql", "p")
        store.save(digest, {"stage": "col_sql", "prompt": "p",
                            "params": P2.to_dict(), "completions": ["a", "b"]})
        client = LlmClient(ReplayBackend(store))
        assert client.complete("col_sql", "p", P1).completions == ["a"]

    def test_unknown_stage_rejected(self, tmp_path):
        client = LlmClient(ReplayBackend(FixtureStore(tmp_path)))
        with pytest.raises(ValueError):
            client.complete("not_a_stage", "p", P1)


class TestLive:
    def test_round_trip_and_payload_shape(self):
        with LocalLlmServer() as server:
            backend = LiveBackend(server.endpoint, "test-model", api_key="k")
            client = LlmClient(backend)
            exchange = client.complete("reason_text", 'final line "Answer: ...', P2)
            assert exchange.completions == ["Answer: demo answer"] * 2
            request = server.requests[-1]
            assert request["model"] == "test-model"
            assert request["n"] == 2
            assert request["temperature"] == P2.temperature
            assert request["messages"][0]["role"] == "user"

    def test_retry_on_429(self):
        with LocalLlmServer(fail_first=True) as server:
            backend = LiveBackend(server.endpoint, "m", base_delay=0.01)
            client = LlmClient(backend)
            exchange = client.complete("math_classify", "Answer YES or NO q", P1)
            assert exchange.completions == ["NO"]
            assert len(server.requests) == 2

    def test_gives_up_after_max_attempts(self):
        backend = LiveBackend("http://127.0.0.1:9/nothing", "m",
                              max_attempts=2, base_delay=0.01)
        client = LlmClient(backend)
        with pytest.raises(GatewayError):
            client.complete("col_sql", "p", P1)


class TestRecord:
    def test_record_persists_fixture(self, tmp_path):
        with LocalLlmServer() as server:
            live = LiveBackend(server.endpoint, "m")
            store = FixtureStore(tmp_path)
            client = LlmClient(RecordBackend(live, store))
            exchange = client.complete("row_text", "list the relevant rows q", P2)
            assert exchange.completions == ["rows: []"] * 2

        digest = exchange_digest("row_text", "list the relevant rows q")
        saved = json.loads((tmp_path / f"{digest}.json").read_text())
        assert saved["completions"] == ["rows: []", "rows: []"]
        # and the recorded fixture replays identically
        replay_client = LlmClient(ReplayBackend(FixtureStore(tmp_path)))
        replayed = replay_client.complete("row_text", "list the relevant rows q", P2)
        assert replayed.completions == exchange.completions

    def test_concurrent_saves(self, tmp_path):
        store = FixtureStore(tmp_path)

        def save(i: int) -> None:
            store.save(f"d{i:03d}", {"completions": [str(i)]})

        threads = [threading.Thread(target=save, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(list(tmp_path.glob("d*.json"))) == 16


class TestInFlightCap:
    def test_semaphore_bounds_concurrent_fetches(self):
        import time

        state = {"active": 0, "peak": 0}
        lock = threading.Lock()

        class SlowBackend:
            name = "replay"

            def fetch(self, stage, prompt, params):
                with lock:
                    state["active"] += 1
                    state["peak"] = max(state["peak"], state["active"])
                time.sleep(0.02)
                with lock:
                    state["active"] -= 1
                return ["x"]

        client = LlmClient(SlowBackend(), max_in_flight=2)

        def worker(i: int) -> None:
            client.complete("col_sql", f"p{i}", P1)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert state["peak"] <= 2
        assert client.samples_issued == 8


class TestBudget:
    def _exchange(self, stage: str, n: int) -> LlmExchange:
        params = SamplingParams(0.1, 1.0, 16, n)
        return LlmExchange(stage, "p", params, ["x"] * n, "replay")

    def test_default_math_profile_totals_ten(self):
        exchanges = [
            self._exchange("col_sql", 2), self._exchange("col_text", 2),
            self._exchange("row_sql", 2), self._exchange("row_text", 2),
            self._exchange("math_classify", 1),
            self._exchange("reason_sql", 1), self._exchange("reason_text", 1),
        ]
        assert generation_budget(exchanges) == 10

    def test_non_math_profile_totals_nine(self):
        exchanges = [
            self._exchange("col_sql", 2), self._exchange("col_text", 2),
            self._exchange("row_sql", 2), self._exchange("row_text", 2),
            self._exchange("math_classify", 1),
            self._exchange("reason_text", 1),
        ]
        assert generation_budget(exchanges) == 9

    def test_zero_exchanges(self):
        assert generation_budget([]) == 0

    def test_classifier_not_counted(self):
        assert "math_classify" not in BUDGET_STAGES
        assert generation_budget([self._exchange("math_classify", 1)]) == 0

    def test_exchange_serialization_has_no_run_dependent_fields(self):
        exchange = self._exchange("col_sql", 1)
        data = exchange.to_dict()
        assert "timestamp" not in data and "latency" not in data
        assert "backend" not in data  # differs between record and replay runs
        assert data["digest"] == exchange.digest
