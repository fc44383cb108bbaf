"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import hashlib
import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal, Self

import orjson
import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from lib.core.core_graph import GraphView
from lib.core.core_schemas_errors import ConfigError, ValidationErrors


class PipelineConfig(BaseModel):
    """Extraction pipeline settings.

    Attributes:
        l_max: Model context limit in tokens.
        l_inst: Instruction budget in tokens; the measured prompt size wins when larger.
        batch_size: Number of chunks per batch file.
        alpha: Generation scale for the event-event stage.
        max_output_tokens: Hard cap on any single generation budget.
        t_start: Answer-start marker; output is parsed after its last occurrence.
        t_chat: Chat-template id forwarded to the gateway.
        lookback_tokens: Window searched backwards for a sentence or paragraph break.
        ev_orientation: Orientation of event-entity edges.
    """
    l_max: int = Field(default=1024, gt=0)
    l_inst: int = Field(default=124, ge=0)
    batch_size: int = Field(default=16, ge=1)
    alpha: float = Field(default=1.5, gt=1.0)
    max_output_tokens: int = Field(default=2048, ge=1)
    t_start: str = "<|start_header_id|>assistant<|end_header_id|>"
    t_chat: str = ""
    lookback_tokens: int = Field(default=64, ge=0)
    ev_orientation: Literal["event_entity", "entity_event"] = "event_entity"

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_budget(self) -> Self:
        if self.l_max <= self.l_inst:
            error_message = f"l_max ({self.l_max}) must be greater than l_inst ({self.l_inst})"
            raise ValueError(error_message)
        return self

    @property
    def c_max(self) -> int:
        """Maximum chunk size in tokens."""
        return self.l_max - self.l_inst

    @property
    def l_ext(self) -> int:
        """Generation budget of the event-event stage."""
        return min(math.floor(self.alpha * self.l_max), self.max_output_tokens)


class InductionConfig(BaseModel):
    """Schema induction settings.

    Attributes:
        batch_size: Elements per batch.
        n_ctx: Maximum number of sampled neighbors in an entity context.
        l_tok: Prompt token cap; context is trimmed to fit.
        tau: Sampling temperature.
        p: Top-p probability.
        max_tokens: Generation budget per element.
        s_total: Number of slices.
        s_slice: Index of the slice to process.
        n_sample: Optional number of randomly sampled batches.
        rng_seed: Seed for context and batch sampling.
    """
    batch_size: int = Field(default=5, ge=1)
    n_ctx: int = Field(default=2, ge=0)
    l_tok: int = Field(default=512, ge=1)
    tau: float = Field(default=0.7, ge=0.0)
    p: float = Field(default=0.9, gt=0.0, le=1.0)
    max_tokens: int = Field(default=128, ge=1)
    s_total: int = Field(default=1, ge=1)
    s_slice: int = Field(default=0, ge=0)
    n_sample: int | None = Field(default=None, ge=1)
    rng_seed: int = 42

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_slice(self) -> Self:
        if not 0 <= self.s_slice < self.s_total:
            error_message = f"s_slice ({self.s_slice}) must lie in [0, {self.s_total})"
            raise ValueError(error_message)
        return self


class ToGConfig(BaseModel):
    """Path search settings.

    Attributes:
        top_n: Paths kept after each pruning step.
        d_max: Maximum search depth.
        k: Number of initial nodes.
        min_similarity: Initial nodes must score above this value.
        max_tokens: Generation budget of the answer.
    """
    top_n: int = Field(default=3, ge=1)
    d_max: int = Field(default=3, ge=0)
    k: int = Field(default=3, ge=1)
    min_similarity: float = 0.0
    max_tokens: int = Field(default=256, ge=1)

    model_config = {"extra": "forbid"}


class PPRConfig(BaseModel):
    """Personalized PageRank passage retrieval settings.

    Attributes:
        mode: "edges" personalizes through filtered edges; "ner" through linked entities only.
        top_n_edges: Candidate edges handed to the edge filter.
        weight_adjust: Scale of passage similarity in the personalization.
        damping: PageRank damping factor.
        tolerance: L1 convergence threshold.
        max_iter: Iteration cap.
        top_k_passages: Number of passages returned.
        ner_top_k: Nodes linked per entity in "ner" mode.
        max_tokens: Generation budget of the answer.
    """
    mode: Literal["edges", "ner"] = "edges"
    top_n_edges: int = Field(default=30, ge=1)
    weight_adjust: float = Field(default=0.9, ge=0.0)
    damping: float = Field(default=0.9, gt=0.0, lt=1.0)
    tolerance: float = Field(default=1e-8, gt=0.0)
    max_iter: int = Field(default=100, ge=1)
    top_k_passages: int = Field(default=5, ge=0)
    ner_top_k: int = Field(default=1, ge=1)
    max_tokens: int = Field(default=256, ge=1)

    model_config = {"extra": "forbid"}


class LargeKGConfig(BaseModel):
    """Sampled large-graph retrieval settings.

    Attributes:
        number_of_source_nodes: Maximum number of personalization seeds.
        sampling_area: Node budget of the random-walk sample.
        restart: Restart probability of the walk.
        top_n: Number of passages returned.
        top_k_per_entity: Candidate nodes retrieved per question entity.
        damping: PageRank damping factor.
        tolerance: L1 convergence threshold.
        max_iter: Iteration cap.
    """
    number_of_source_nodes: int = Field(default=10, ge=1)
    sampling_area: int = Field(default=200, ge=1)
    restart: float = Field(default=0.15, gt=0.0, le=1.0)
    top_n: int = Field(default=5, ge=0)
    top_k_per_entity: int = Field(default=3, ge=1)
    damping: float = Field(default=0.9, gt=0.0, lt=1.0)
    tolerance: float = Field(default=1e-8, gt=0.0)
    max_iter: int = Field(default=100, ge=1)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_area(self) -> Self:
        if self.sampling_area < self.number_of_source_nodes:
            error_message = (
                f"sampling_area ({self.sampling_area}) must be at least "
                f"number_of_source_nodes ({self.number_of_source_nodes})"
            )
            raise ValueError(error_message)
        return self


class RetrieveConfig(BaseModel):
    """Retrieval settings, one section per method.

    Attributes:
        graph_view: Part of the graph retrieval runs over. "entity" keeps entity
            nodes with their relations, "entity_event" adds events and their
            relations, "full" also walks through concept nodes.
    """
    graph_view: GraphView = "full"
    tog: ToGConfig = Field(default_factory=ToGConfig)
    ppr: PPRConfig = Field(default_factory=PPRConfig)
    large: LargeKGConfig = Field(default_factory=LargeKGConfig)

    model_config = {"extra": "forbid"}


class RetryPolicy(BaseModel):
    """Gateway retry policy.

    Attributes:
        max_attempts: Attempts per call, first one included.
        backoff: Sleep in seconds before each retry; the last value repeats.
        timeout: Timeout of a single attempt in seconds.
    """
    max_attempts: int = Field(default=3, ge=1)
    backoff: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    timeout: float = Field(default=60.0, gt=0.0)

    model_config = {"extra": "forbid"}

    def delay(self, attempt: int) -> float:
        """Return the sleep before retry number `attempt` (1-based)."""
        if not self.backoff:
            return 0.0
        return self.backoff[min(attempt - 1, len(self.backoff) - 1)]


class GatewayProfile(BaseModel):
    """Model name and generation defaults of a gateway role."""
    model: str | None = None
    max_tokens: int = Field(default=1024, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)
    top_p: float = Field(default=1.0, gt=0.0, le=1.0)

    model_config = {"extra": "forbid"}


def _default_profiles() -> dict[str, GatewayProfile]:
    """Return the decoding profiles used when the config names none."""
    return {name: GatewayProfile() for name in ("constructor", "reader", "mcq_generator")}


class GatewayConfig(BaseModel):
    """Gateway section of the application configuration.

    Attributes:
        base_url: OpenAI-compatible endpoint root.
        api_key: Bearer token.
        chat_model: Default chat model for every profile without its own.
        embed_model: Embedding model.
        mock: Use the deterministic offline gateway.
        mock_rules: Optional YAML rule table replacing the bundled one.
        mock_seed: Seed of the mock embeddings.
        mock_embedding: Mock embedding mode.
        embedding_dim: Dimension of mock embeddings.
        retry: Retry policy.
        profiles: Named role profiles.
    """
    base_url: str = "http://localhost:8000/v1"
    api_key: str | None = None
    chat_model: str = "meta-llama/Llama-3.1-8B-Instruct"
    embed_model: str = "sentence-transformers/multi-qa-MiniLM-L6-dot-v1"
    mock: bool = False
    mock_rules: Path | None = None
    mock_seed: int = 0
    mock_embedding: Literal["hash", "bow"] = "bow"
    embedding_dim: int = Field(default=64, ge=1)
    retry: RetryPolicy = Field(default_factory=RetryPolicy)
    profiles: dict[str, GatewayProfile] = Field(default_factory=_default_profiles)

    model_config = {"extra": "forbid"}


class EvaluationConfig(BaseModel):
    """Evaluation settings.

    Attributes:
        balanced_accuracy_sum: Report balanced accuracy as the plain sum of both recalls.
        mcq_per_passage: Questions generated per passage.
        pr_ks: Cut-offs reported for PR@k.
        mcq_conditions: Conditions run by the MCQ suite.
    """
    balanced_accuracy_sum: bool = False
    mcq_per_passage: int = Field(default=5, ge=1)
    pr_ks: list[int] = Field(default_factory=lambda: [2, 5])
    mcq_conditions: list[Literal["none", "passage", "entity", "event", "event+entity"]] = Field(
        default_factory=lambda: ["none", "passage", "entity", "event", "event+entity"]
    )

    model_config = {"extra": "forbid"}


class RuntimeConfig(BaseModel):
    """Process-wide runtime settings."""
    max_in_flight: int = Field(default=8, ge=1)
    seed: int = 42

    model_config = {"extra": "forbid"}


class AppConfig(BaseModel):
    """Aggregate configuration, one section per subcommand."""
    extract: PipelineConfig = Field(default_factory=PipelineConfig)
    induce: InductionConfig = Field(default_factory=InductionConfig)
    retrieve: RetrieveConfig = Field(default_factory=RetrieveConfig)
    evaluate: EvaluationConfig = Field(default_factory=EvaluationConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)

    model_config = {"extra": "forbid"}

    def config_hash(self, sections: set[str] | None = None) -> str:
        """Return the sha256 of the canonical JSON dump of this configuration.

        The API key is left out, so rotating credentials does not invalidate runs.

        Args:
            sections: Hash only these top-level sections; all of them by default.
        """
        data = self.model_dump(mode="json", include=sections, exclude={"gateway": {"api_key"}})
        return hashlib.sha256(orjson.dumps(data, option=orjson.OPT_SORT_KEYS)).hexdigest()


class GatewaySettings(BaseSettings):
    """Gateway overrides read from the environment and a .env file.

    Environment values override the YAML gateway section.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore"
    )

    gateway_url: str | None = Field(default=None, validation_alias="KGFORGE_GATEWAY_URL")
    api_key: str | None = Field(default=None, validation_alias="KGFORGE_API_KEY")
    chat_model: str | None = Field(default=None, validation_alias="KGFORGE_CHAT_MODEL")
    embed_model: str | None = Field(default=None, validation_alias="KGFORGE_EMBED_MODEL")
    max_in_flight: int | None = Field(default=None, ge=1, validation_alias="KGFORGE_MAX_IN_FLIGHT")

    @classmethod
    @lru_cache
    def load(cls) -> "GatewaySettings":
        """Load and cache the environment settings."""
        return cls()


# Presets of the passage retriever
PPR_PRESETS: dict[str, dict[str, Any]] = {
    "hipporag1": {"mode": "ner"},
    "musique": {"top_n_edges": 50},
}


def apply_ppr_preset(cfg: PPRConfig, preset: str) -> PPRConfig:
    """Return a copy of `cfg` updated with a named preset.

    Raises:
        ConfigError: If the preset is unknown.
    """
    if preset not in PPR_PRESETS:
        error_message = f"Unknown preset '{preset}', expected one of {sorted(PPR_PRESETS)}"
        raise ConfigError(error_message)
    return cfg.model_copy(update=PPR_PRESETS[preset])


def flatten_validation_error(error: ValidationError) -> ValidationErrors:
    """Convert a pydantic ValidationError into ValidationErrors.

    Args:
        error: The pydantic error.

    Returns:
        A ValidationErrors carrying one dict per failed field.
    """
    errors = [
        {
            "location": ".".join(str(part) for part in item["loc"]) or "config",
            "value_to_blame": item.get("input"),
            "error_message": item["msg"],
        }
        for item in error.errors()
    ]
    return ValidationErrors(errors)


def load_config(path: Path | None, settings: GatewaySettings | None = None) -> AppConfig:
    """Load, validate and apply environment overrides to the application config.

    Args:
        path: YAML file; None uses defaults.
        settings: Environment overrides; defaults to GatewaySettings.load().

    Returns:
        Validated AppConfig.

    Raises:
        - ConfigError: If the file is missing or not valid YAML.
        - ValidationErrors: If a value violates its constraints.
    """
    data: dict[str, Any] = {}

    if path is not None:
        if not path.exists():
            error_message = f"Config file not found: {path}"
            raise ConfigError(error_message)
        try:
            with path.open(encoding="utf-8") as file:
                data = yaml.safe_load(file) or {}
        except yaml.YAMLError as e:
            error_message = f"{path.name} could not be parsed."
            raise ConfigError(error_message) from e
        if not isinstance(data, dict):
            error_message = f"{path.name} must contain a mapping at top level."
            raise ConfigError(error_message)

    settings = settings or GatewaySettings.load()
    gateway = data.setdefault("gateway", {}) or {}
    data["gateway"] = gateway
    runtime = data.setdefault("runtime", {}) or {}
    data["runtime"] = runtime

    # Environment overrides the file
    overrides = {
        "base_url": settings.gateway_url,
        "api_key": settings.api_key,
        "chat_model": settings.chat_model,
        "embed_model": settings.embed_model,
    }
    gateway.update({key: value for key, value in overrides.items() if value is not None})
    if settings.max_in_flight is not None:
        runtime["max_in_flight"] = settings.max_in_flight

    try:
        return AppConfig.model_validate(data)
    except ValidationError as e:
        raise flatten_validation_error(e) from e
