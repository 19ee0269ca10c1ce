"""Configuration management for the application."""
from typing import Literal

from pydantic import ConfigDict, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process settings read from the environment and `.env`."""
    # LLM settings
    LGA_LLM_PROVIDER: Literal["openai", "anthropic"] = "openai"
    LGA_LLM_ENDPOINT: str = ""
    LGA_LLM_API_KEY: str = ""
    LGA_LLM_MODEL: str = "gpt-4o"
    LGA_LLM_EMBEDDING_MODEL: str = "text-embedding-3-small"
    LGA_LLM_MAX_TOKENS: int = 1024
    LGA_LLM_TEMPERATURE: float = 0.0
    LGA_LLM_TIMEOUT: float = 30.0
    LGA_LLM_RETRIES: int = 3
    LGA_LLM_BACKOFF: float = 1.0
    LGA_LLM_MIN_INTERVAL: float = 0.0

    # Evaluation settings
    LGA_THREADS: int = 1

    @field_validator("LGA_LLM_ENDPOINT")
    @classmethod
    def validate_endpoint(cls, v: str) -> str:
        """Endpoint, when given, must be an http(s) URL."""
        if v and not v.startswith(("http://", "https://")):
            raise ValueError(
                f"LGA_LLM_ENDPOINT must be an http(s) URL, got {v!r}. "
                "Please check your .env file."
            )
        return v.rstrip("/")

    @field_validator("LGA_LLM_RETRIES", "LGA_THREADS")
    @classmethod
    def validate_counts(cls, v: int, info):
        """Retry count may be zero, thread count must be positive."""
        minimum = 1 if info.field_name == "LGA_THREADS" else 0
        if v < minimum:
            raise ValueError(f"{info.field_name} must be >= {minimum}")
        return v

    @field_validator("LGA_LLM_TIMEOUT", "LGA_LLM_BACKOFF", "LGA_LLM_MIN_INTERVAL")
    @classmethod
    def validate_durations(cls, v: float, info):
        """Durations are seconds and cannot be negative."""
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return v

    model_config = ConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore"
    )


def get_settings() -> Settings:
    """Read settings afresh so environment changes are honoured."""
    return Settings()

