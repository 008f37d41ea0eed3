"""
Application Settings Configuration

This module handles toolkit-wide configuration: default data directory,
pivot language, sense-identity languages, embedding numerics and logging,
loaded from environment variables (prefix ``POLYSRL_``) or a ``.env`` file.
"""

from functools import lru_cache
from pathlib import Path
from typing import List, Union

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="POLYSRL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application settings
    app_name: str = Field(default="Polyglot SRL Toolkit")
    version: str = Field(default="1.0.0")

    # Data settings
    data_dir: Path = Field(default=Path("."), description="Default data directory")
    pivot_language: str = Field(default="eng", min_length=3, max_length=3)
    identity_sense_languages: Union[List[str], str] = Field(default=["ces", "jpn"])

    # Embedding numerics
    cca_regularization: float = Field(
        default=1e-3, ge=0.0, lt=1.0, description="Relative eigenvalue floor for CCA whitening"
    )
    pca_dimension: int = Field(default=100, gt=0)

    # Reproducibility
    default_seed: int = Field(default=13, ge=0)

    # Logging settings
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    @field_validator("identity_sense_languages", mode="before")
    @classmethod
    def split_language_list(cls, value):
        """Accept a comma-separated string for list-valued language settings."""
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    def resolve_path(self, path: Union[str, Path]) -> Path:
        """
        Resolve a path against the default data directory.

        Args:
            path: Absolute or data-dir relative path

        Returns:
            Path: Resolved path
        """
        candidate = Path(path).expanduser()
        if candidate.is_absolute():
            return candidate
        return self.data_dir / candidate


@lru_cache()
def get_settings() -> Settings:
    """
    Get toolkit settings with caching.

    Returns:
        Settings: Cached settings instance
    """
    return Settings()
