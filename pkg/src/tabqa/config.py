"""Run configuration and per-dataset sampling profiles.

Profiles carry one SamplingParams per pipeline stage. The shipped defaults
mirror the published per-stage settings for the two benchmark model families
(column/row stages sample twice, reasoning stages once, classifier at zero
temperature); the long-form dataset reuses the short-form profile.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .gateway import SamplingParams
from .reasoning import DEFAULT_MATH_KEYWORDS

BACKENDS = ("live", "record", "replay")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Profile:
    name: str
    params: dict[str, SamplingParams]
    use_llm_classifier: bool = True
    math_keywords: tuple[str, ...] = DEFAULT_MATH_KEYWORDS


def _stage_params(
    col_sql: float, col_text: float, row_sql: float, row_text: float,
    reason_sql: float, reason_text: float,
) -> dict[str, SamplingParams]:
    return {
        "col_sql": SamplingParams(col_sql, 1.0, 512, 2),
        "col_text": SamplingParams(col_text, 1.0, 512, 2),
        "row_sql": SamplingParams(row_sql, 1.0, 512, 2),
        "row_text": SamplingParams(row_text, 1.0, 512, 2),
        "reason_sql": SamplingParams(reason_sql, 1.0, 512, 1),
        "reason_text": SamplingParams(reason_text, 1.0, 256, 1),
        "math_classify": SamplingParams(0.0, 1.0, 8, 1),
    }


PROFILES: dict[str, Profile] = {
    "wikitq-gpt35": Profile("wikitq-gpt35", _stage_params(0.3, 0.4, 0.4, 0.4, 0.1, 0.1)),
    "tabfact-gpt35": Profile("tabfact-gpt35", _stage_params(0.2, 0.4, 0.4, 0.5, 0.1, 0.1)),
    "wikitq-palm2": Profile("wikitq-palm2", _stage_params(0.4, 0.7, 0.4, 0.7, 0.1, 0.1)),
    "tabfact-palm2": Profile("tabfact-palm2", _stage_params(0.4, 0.7, 0.4, 0.7, 0.1, 0.1)),
}
PROFILES["fetaqa-gpt35"] = replace(PROFILES["wikitq-gpt35"], name="fetaqa-gpt35")
PROFILES["fetaqa-palm2"] = replace(PROFILES["wikitq-palm2"], name="fetaqa-palm2")
PROFILES["default"] = replace(PROFILES["wikitq-gpt35"], name="default")


@dataclass
class RunConfig:
    dataset: str | None = None
    adapter: str = "neutral"
    backend: str = "replay"
    endpoint: str | None = None
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "TABQA_API_KEY"
    fixtures_dir: str | None = None
    profile: str = "default"
    extraction_mode: str = "full"
    reasoning_mode: str = "adaptive"
    use_llm_classifier: bool | None = None  # None: profile decides
    small_token_limit: int = 2000
    large_token_limit: int = 4000
    table_token_budget: int = 4000
    concurrency: int = 4
    output_dir: str = "runs/out"
    seed: int | None = None  # governs example ordering only
    template_dir: str | None = None

    def resolved_profile(self) -> Profile:
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; valid: {sorted(PROFILES)}")
        profile = PROFILES[self.profile]
        if self.use_llm_classifier is not None:
            profile = replace(profile, use_llm_classifier=self.use_llm_classifier)
        return profile

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; valid: {list(BACKENDS)}")
        if self.backend == "replay":
            if not self.fixtures_dir or not Path(self.fixtures_dir).is_dir():
                raise ConfigError(
                    f"replay backend requires an existing fixtures directory, "
                    f"got {self.fixtures_dir!r}"
                )
        if self.backend in ("live", "record"):
            if not self.endpoint:
                raise ConfigError(f"{self.backend} backend requires an endpoint")
            import os

            if not os.environ.get(self.api_key_env):
                raise ConfigError(
                    f"{self.backend} backend requires the {self.api_key_env} "
                    f"environment variable"
                )
        if self.backend == "record" and not self.fixtures_dir:
            raise ConfigError("record backend requires a fixtures directory to write to")
        self.resolved_profile()

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "adapter": self.adapter,
            "backend": self.backend,
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "fixtures_dir": self.fixtures_dir,
            "profile": self.profile,
            "extraction_mode": self.extraction_mode,
            "reasoning_mode": self.reasoning_mode,
            "use_llm_classifier": self.use_llm_classifier,
            "small_token_limit": self.small_token_limit,
            "large_token_limit": self.large_token_limit,
            "table_token_budget": self.table_token_budget,
            "concurrency": self.concurrency,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "template_dir": self.template_dir,
        }

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**data)

    @staticmethod
    def from_file(path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return RunConfig.from_dict(data)
