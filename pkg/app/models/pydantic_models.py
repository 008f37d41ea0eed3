"""
Pydantic models for configuration, evaluation reports and run manifests.

This module contains the schemas validated at the toolkit's boundaries:
model and training configuration, run configuration files, evaluation
reports and the manifests attached to every produced artifact.
"""

from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config.settings import get_settings


# Enums for validation
class Variant(str, Enum):
    MONO = "MONO"
    SIMPLE_POLYGLOT = "SIMPLE_POLYGLOT"
    LANG_ID = "LANG_ID"
    LANG_SPECIFIC_LSTM = "LANG_SPECIFIC_LSTM"

    @property
    def is_polyglot(self) -> bool:
        return self is not Variant.MONO

    @property
    def uses_lang_id(self) -> bool:
        return self in (Variant.LANG_ID, Variant.LANG_SPECIFIC_LSTM)

    @property
    def uses_private_lstm(self) -> bool:
        return self is Variant.LANG_SPECIFIC_LSTM


# Base schemas
class BaseSchema(BaseModel):
    """Base schema with common configuration."""
    model_config = ConfigDict(from_attributes=True, protected_namespaces=())


# Private biLSTM depth of the language-specific variant; it feeds shared layer 3.
PRIVATE_LAYERS = 2


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# Model and training configuration
class ModelConfig(BaseSchema):
    """Architecture of the SRL tagger."""
    variant: Variant = Variant.MONO
    shared_layers: int = Field(default=4, gt=0)
    hidden_size: int = Field(default=300, gt=0, description="Hidden units per direction")
    indicator_dim: int = Field(default=2, gt=0)
    lang_id_dim: int = Field(default=8, gt=0)
    dropout_rate: float = Field(default=0.1, ge=0, lt=1)
    languages: List[str] = Field(..., min_length=1)

    @field_validator("languages", mode="before")
    @classmethod
    def split_languages(cls, v):
        """Accept comma-separated language lists from key-value files."""
        return _split_list(v)

    @model_validator(mode="after")
    def check_variant_requirements(self) -> "ModelConfig":
        """Enforce per-variant depth and language-count requirements."""
        if self.variant.uses_private_lstm and self.shared_layers < PRIVATE_LAYERS + 1:
            raise ValueError("LANG_SPECIFIC_LSTM requires shared_layers >= 3")
        if self.variant.is_polyglot:
            if len(self.languages) != 2 or len(set(self.languages)) != 2:
                raise ValueError(f"{self.variant.value} requires exactly two distinct languages")
        return self

    @classmethod
    def desk_scale(cls, **overrides: Any) -> "ModelConfig":
        """Configuration sized for laptop-scale experiments (depth 3, 32 units)."""
        values: Dict[str, Any] = {"shared_layers": 3, "hidden_size": 32}
        values.update(overrides)
        return cls(**values)

    @property
    def primary_language(self) -> str:
        return self.languages[0]


class TrainConfig(BaseSchema):
    """Optimization settings of a training run."""
    batch_size: int = Field(default=8, gt=0)
    max_epochs: int = Field(default=30, gt=0)
    patience: int = Field(default=5, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    clip_norm: float = Field(default=5.0, gt=0)
    seed: int = Field(default_factory=lambda: get_settings().default_seed, ge=0)
    n_jobs: int = Field(default=1, gt=0)


class RunConfig(BaseSchema):
    """A complete ``train`` invocation read from a key-value config file."""
    model: ModelConfig
    training: TrainConfig = Field(default_factory=TrainConfig)
    train_files: Dict[str, Path]
    dev_files: Dict[str, Path]
    embedding_files: Dict[str, Path]
    output_dir: Path = Path("run")

    @model_validator(mode="after")
    def check_language_coverage(self) -> "RunConfig":
        """Every configured language needs train data and embeddings."""
        for language in self.model.languages:
            if language not in self.train_files:
                raise ValueError(f"missing train.{language}")
            if language not in self.embedding_files:
                raise ValueError(f"missing embeddings.{language}")
        return self

    @classmethod
    def from_key_values(cls, values: Dict[str, Optional[str]]) -> "RunConfig":
        """
        Build a run configuration from flat ``key=value`` pairs.

        Keys ``train.<lang>``, ``dev.<lang>`` and ``embeddings.<lang>`` name
        per-language files; ``output_dir`` names the run directory; every other
        key is routed to ModelConfig or TrainConfig by field name.

        Args:
            values: Parsed key-value pairs

        Returns:
            RunConfig: Validated configuration

        Raises:
            ValueError: If a key is unknown
        """
        model_fields = set(ModelConfig.model_fields)
        train_fields = set(TrainConfig.model_fields)
        model_values: Dict[str, Any] = {}
        train_values: Dict[str, Any] = {}
        files: Dict[str, Dict[str, str]] = {"train": {}, "dev": {}, "embeddings": {}}
        output_dir: Optional[str] = None

        for key, value in values.items():
            if value is None:
                continue
            name = key.strip().lower()
            prefix, _, language = name.partition(".")
            if language and prefix in files:
                files[prefix][language] = value
            elif name in model_fields:
                model_values[name] = value
            elif name in train_fields:
                train_values[name] = value
            elif name == "output_dir":
                output_dir = value
            else:
                raise ValueError(f"Unknown configuration key '{key}'")

        payload: Dict[str, Any] = {
            "model": model_values,
            "training": train_values,
            "train_files": files["train"],
            "dev_files": files["dev"],
            "embedding_files": files["embeddings"],
        }
        if output_dir is not None:
            payload["output_dir"] = output_dir
        return cls.model_validate(payload)


class EpochSchedule(BaseSchema):
    """Ordered (language, instance-index) pairs visited in one epoch."""
    epoch: int = Field(..., ge=0)
    entries: List[Tuple[str, int]] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def counts(self, language: str) -> Dict[int, int]:
        """Number of appearances of each instance of one language."""
        result: Dict[int, int] = {}
        for entry_language, index in self.entries:
            if entry_language == language:
                result[index] = result.get(index, 0) + 1
        return result


# Evaluation schemas
class PRF(BaseSchema):
    """Precision, recall and F1 over a set of scored items, in percent."""
    correct: int = Field(default=0, ge=0)
    predicted: int = Field(default=0, ge=0)
    gold: int = Field(default=0, ge=0)
    precision: float = Field(default=0.0, ge=0, le=100)
    recall: float = Field(default=0.0, ge=0, le=100)
    f1: float = Field(default=0.0, ge=0, le=100)


class LabelScore(PRF):
    """Scores for one argument label."""
    label: str


class EvalReport(BaseSchema):
    """Semantic evaluation of predicted against gold annotations."""
    language: str
    labeled: PRF
    unlabeled: PRF
    per_label: Dict[str, LabelScore] = Field(default_factory=dict)
    sense_accuracy: float = Field(default=0.0, ge=0, le=100)
    n_predicates: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_correct_counts(self) -> "EvalReport":
        if self.labeled.correct > self.unlabeled.correct:
            raise ValueError("labeled correct count cannot exceed unlabeled correct count")
        return self


class RunManifest(BaseSchema):
    """Provenance record written next to every produced artifact."""
    command: str
    config: Dict[str, Any] = Field(default_factory=dict)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    toolkit_version: str
    started_at: datetime
    finished_at: Optional[datetime] = None
    outputs: List[str] = Field(default_factory=list)
    notes: Dict[str, Any] = Field(default_factory=dict)
