"""Class score and matching configuration models."""
from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.text_anatomy import TextSource

PROBABILITY_TOLERANCE = 1e-6


class ScoreSource(str, Enum):
    """Which matching branch produced a score vector."""
    VIDEO_VIDEO = "video_video"
    VIDEO_TEXT = "video_text"
    COMBINED = "combined"


class Metric(str, Enum):
    """Video-video distance."""
    AB_MHM = "ab_mhm"
    BI_MHM = "bi_mhm"


class KShotReduction(str, Enum):
    """How K per-video distances become one class distance."""
    MEAN_DISTANCE = "mean_distance"
    MIN_DISTANCE = "min_distance"


class ClassScores(BaseModel):
    """Probability distribution over the episode's classes."""
    probs: List[float]
    class_ids: List[int]
    source: ScoreSource

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_distribution(self):
        """Probabilities in [0, 1] summing to one; class ids distinct and aligned."""
        if len(self.probs) != len(self.class_ids) or not self.probs:
            raise ValueError("probs and class_ids must be non-empty and equally long")
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ValueError("class_ids must be distinct")
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(self.probs) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, expected 1")
        return self

    @property
    def predicted_class(self) -> int:
        """Class with the highest probability (first on ties)."""
        best = max(range(len(self.probs)), key=lambda i: (self.probs[i], -i))
        return self.class_ids[best]


class MatchConfig(BaseModel):
    """Matching hyperparameters."""
    alpha: float = Field(default=1.0, description="Visual weight of the geometric mean")
    temperature_vt: float = Field(default=1.0, description="Divisor of video-text scores")
    metric: Metric = Metric.AB_MHM
    kshot_reduction: KShotReduction = KShotReduction.MEAN_DISTANCE
    text_source: TextSource = TextSource.ATOMIC

    model_config = ConfigDict(frozen=True)

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        """Alpha is a weight in [0, 1]."""
        if not 0.0 <= v <= 1.0:
            raise ValueError("alpha must be in [0,1]")
        return v

    @field_validator("temperature_vt")
    @classmethod
    def validate_temperature(cls, v: float) -> float:
        """Temperature must be positive."""
        if v <= 0.0:
            raise ValueError("temperature_vt must be > 0")
        return v
