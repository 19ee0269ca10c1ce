"""Request and response bodies of the HTTP API."""
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.models.run_config import RunConfig


class PromptRequest(BaseModel):
    """Label to decompose."""
    label: str = Field(..., min_length=1, description="Action label")
    num_phases: int = Field(default=3, ge=1, description="Number of sub-actions")

    model_config = ConfigDict(
        json_schema_extra={"example": {"label": "jumping into pool", "num_phases": 3}}
    )


class PromptResponse(BaseModel):
    """Prompt text exactly as sent to the LLM."""
    prompt: str


class ParseRequest(BaseModel):
    """Raw LLM reply to parse."""
    raw: str = Field(..., min_length=1, description="Reply text, fenced or bare JSON")
    num_phases: Optional[int] = Field(default=None, ge=1, description="Expected number of sub-actions")


class EvaluationRequest(RunConfig):
    """Run configuration accepted over HTTP; the server never writes an episode log for a client."""

    @field_validator("episode_log")
    @classmethod
    def reject_episode_log(cls, v: Optional[Path]) -> Optional[Path]:
        """Episode logs are a command line feature."""
        if v is not None:
            raise ValueError("episode_log is not accepted over HTTP; use the eval command")
        return v
