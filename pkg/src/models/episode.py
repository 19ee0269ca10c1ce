"""Episode, per-query result and evaluation report models."""
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.matching import ClassScores


class Episode(BaseModel):
    """One N-way K-shot task."""
    way: int = Field(..., ge=1)
    shot: int = Field(..., ge=1)
    support: List[Tuple[int, List[str]]] = Field(..., description="(class id, K video ids) per class")
    queries: List[Tuple[str, int]] = Field(..., description="(video id, true class id)")
    seed: int
    index: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_episode(self):
        """N distinct classes, K supports each, no support/query leakage."""
        class_ids = [class_id for class_id, _ in self.support]
        if len(class_ids) != self.way or len(set(class_ids)) != self.way:
            raise ValueError(f"support must hold exactly {self.way} distinct classes")
        for class_id, video_ids in self.support:
            if len(video_ids) != self.shot:
                raise ValueError(f"class {class_id} has {len(video_ids)} supports, expected {self.shot}")
        support_ids = {v for _, ids in self.support for v in ids}
        if len(support_ids) != self.way * self.shot:
            raise ValueError("a video appears twice in the support set")
        for video_id, class_id in self.queries:
            if video_id in support_ids:
                raise ValueError(f"video {video_id} appears in both support and query sets")
            if class_id not in class_ids:
                raise ValueError(f"query {video_id} has class {class_id} outside the episode")
        if not self.queries:
            raise ValueError("episode has no queries")
        return self

    @property
    def class_ids(self) -> List[int]:
        return [class_id for class_id, _ in self.support]


class QueryResult(BaseModel):
    """Scores and verdict for one query."""
    video_id: str
    true_class: int
    video_video: ClassScores
    video_text: Optional[ClassScores] = None
    combined: ClassScores

    @property
    def predicted_class(self) -> int:
        return self.combined.predicted_class

    @property
    def correct(self) -> bool:
        return self.predicted_class == self.true_class


class EpisodeResult(BaseModel):
    """All query results of one episode."""
    index: int
    seed: int
    queries: List[QueryResult]


class EvalReport(BaseModel):
    """Aggregated accuracy over many episodes."""
    episodes: int
    queries: int
    correct: int
    accuracy: float
    ci95_halfwidth: float
    ci95_low: float
    ci95_high: float
    ci_method: str = "normal"
    per_source: Dict[str, float]
    wall_time: float = Field(..., description="Seconds; excluded from reproducibility comparisons")
    config: Dict[str, Any] = Field(default_factory=dict)
