"""Configuration loading for flow tailor."""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, PrivateAttr, ValidationError, model_validator

from flow_tailor.augment import MutationSpec
from flow_tailor.enums import ComponentCategory, MutationKind
from flow_tailor.exceptions import ConfigError
from flow_tailor.labeling import DEFAULT_LABELS
from flow_tailor.models import EnsembleConfig

DEFAULT_CONFIG_NAME = "flow_tailor.yaml"
CONFIG_ENV = "FLOWTAILOR_CONFIG"


class PathsConfig(BaseModel):
    """Locations of every artifact; relative paths resolve against the config file."""

    templates: Path = Path("templates")
    prompts: Path = Path("prompts.jsonl")
    registry_file: Path | None = None
    slot_rules_file: Path | None = None
    corpus: Path = Path("corpus")
    triplets: Path = Path("data/triplets.jsonl")
    assignments: Path = Path("data/assignments.jsonl")
    table: Path = Path("data/score_table.json")
    context: Path = Path("data/context.txt")
    selections: Path = Path("data/selections.jsonl")
    ft_dataset: Path = Path("data/ft_dataset.jsonl")
    reports: Path = Path("reports")

    @model_validator(mode="after")
    def _registry_pair(self) -> PathsConfig:
        if (self.registry_file is None) != (self.slot_rules_file is None):
            raise ValueError("registry_file and slot_rules_file must be set together")
        return self


class ExecutorConfig(BaseModel):
    mock: bool = True
    url: str | None = None
    token_env: str = "FLOWTAILOR_EXECUTOR_TOKEN"
    timeout: float = Field(default=600.0, gt=0)
    retries: int = Field(default=3, ge=1)
    output_dir: Path = Path("images")
    fail_pairs: list[tuple[str, str]] = []
    missing_models: list[str] = []


class ScorersConfig(BaseModel):
    mock: bool = True
    urls: dict[str, str] = {}
    evaluator: str = "hps_v2"
    evaluator_url: str | None = None


class LLMConfig(BaseModel):
    mock: bool = True
    provider: Literal["chat", "ollama"] = "chat"
    url: str | None = None
    model: str = "llama3.1"
    api_key_env: str = "FLOWTAILOR_LLM_API_KEY"
    temperature: float = Field(default=0.0, ge=0)
    max_tokens: int = Field(default=4096, gt=0)


class LabelerConfig(BaseModel):
    # When false the LLM client labels prompts.
    mock: bool = True
    keywords: dict[str, list[str]] | None = None


def _default_mix() -> list[MutationSpec]:
    return [
        MutationSpec(kind=MutationKind.swap_component, category=ComponentCategory.base_model),
        MutationSpec(kind=MutationKind.swap_component, category=ComponentCategory.lora),
        MutationSpec(kind=MutationKind.change_guidance, value_range=(3.0, 9.0)),
        MutationSpec(kind=MutationKind.change_steps, value_range=(20, 40)),
        MutationSpec(kind=MutationKind.swap_sampler, weight=0.5),
        MutationSpec(kind=MutationKind.swap_scheduler, weight=0.5),
    ]


class AugmentConfig(BaseModel):
    mutations_per_template: int = Field(default=2, ge=0)
    chain_length: int = Field(default=1, ge=1)
    dedup: bool = True
    mutation_mix: list[MutationSpec] = Field(default_factory=_default_mix)
    screen: bool = True
    max_json_bytes: int = Field(default=200_000, gt=0)
    min_block_frequency: int = Field(default=3, ge=1)


class SelectionConfig(BaseModel):
    method: Literal["ic", "ft", "fallback"] = "fallback"
    target_score: float = 0.725
    sweep_targets: list[float] = [0.296, 0.467, 0.596, 0.725]
    context_precision: int = Field(default=3, ge=0)
    negative_default: str = ""
    predict_best: bool = False


class PipelineConfig(BaseModel):
    """Everything one experiment needs, loaded from a single YAML file."""

    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=4, ge=1)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    executor: ExecutorConfig = Field(default_factory=ExecutorConfig)
    scorers: ScorersConfig = Field(default_factory=ScorersConfig)
    llm: LLMConfig = Field(default_factory=LLMConfig)
    labeler: LabelerConfig = Field(default_factory=LabelerConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    labels: list[str] = Field(default_factory=lambda: list(DEFAULT_LABELS), min_length=1)
    max_labels: int = Field(default=10, ge=1)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _mock_or_live(self) -> PipelineConfig:
        clashes = []
        if self.executor.mock and self.executor.url:
            clashes.append("executor")
        if self.scorers.mock and (self.scorers.urls or self.scorers.evaluator_url):
            clashes.append("scorers")
        if self.llm.mock and self.llm.url:
            clashes.append("llm")
        if clashes:
            raise ValueError(f"mock: true conflicts with a live URL for {', '.join(clashes)}")
        return self

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def with_base_dir(self, base_dir: Path) -> PipelineConfig:
        copy = self.model_copy(deep=True)
        copy._base_dir = base_dir
        return copy

    def resolve(self, path: Path) -> Path:
        """Absolute form of a configured path."""
        path = path.expanduser()
        return path if path.is_absolute() else self._base_dir / path


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

_ENV_REF = re.compile(r"\$\{(\w+)(?::-([^}]*))?\}")


def _interpolate(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if not isinstance(value, str):
        return value

    def _replace(match: re.Match[str]) -> str:
        name, default = match.group(1), match.group(2)
        if name in os.environ:
            return os.environ[name]
        if default is not None:
            return default
        raise ConfigError(f"Environment variable {name} is not set and has no default")

    return _ENV_REF.sub(_replace, value)


def _load_yaml(path: Path) -> dict:
    """Load and parse a YAML file, raising ConfigError on failure."""
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a mapping in {path}, got {type(data).__name__}")
    return data


def find_config_path(explicit: Path | None = None) -> Path | None:
    """``explicit``, else $FLOWTAILOR_CONFIG, else ./flow_tailor.yaml if present."""
    if explicit is not None:
        return explicit
    env_path = os.environ.get(CONFIG_ENV)
    if env_path:
        return Path(env_path)
    default = Path(DEFAULT_CONFIG_NAME)
    return default if default.exists() else None


def load_config(path: Path | None = None) -> PipelineConfig:
    """Load the pipeline configuration, falling back to built-in defaults.

    Raises:
        ConfigError: On a missing file, invalid YAML, unset variables, or
            invalid field values (every offending field is listed).
    """
    resolved = find_config_path(path)
    if resolved is None:
        return PipelineConfig()
    data = _interpolate(_load_yaml(resolved))
    try:
        config = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"Invalid configuration in {resolved}: {problems}") from exc
    return config.with_base_dir(resolved.resolve().parent)


def dump_config(config: PipelineConfig, path: Path) -> None:
    """Write ``config`` as YAML that load_config reads back to an equal model."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.model_dump(mode="json")
    path.write_text(yaml.safe_dump(data, sort_keys=False, allow_unicode=True), encoding="utf-8")
