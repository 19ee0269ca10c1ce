"""Models for atomic action descriptions and their embeddings."""
import json
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.features import as_feature_matrix
from src.utils.errors import InvalidArgumentError, InvalidDataError

ACTION_LABEL_KEY = "Action Label"
SCENE_KEY = "scene description"
SUB_ACTION_KEY = "sub-action description"


class TextSource(str, Enum):
    """Which class text drives fusion and video-text scoring."""
    ATOMIC = "atomic"
    LABEL = "label"


class AtomicDescriptions(BaseModel):
    """An action label decomposed into L temporally ordered sub-action texts."""
    label: str = Field(..., min_length=1, description="Action label as echoed by the LLM")
    descriptions: List[str] = Field(..., min_length=1, description="Sub-action descriptions, initiation first")
    scene: Optional[str] = Field(default=None, description="Scene description; stored, unused by matching")
    retries: int = Field(default=0, ge=0, exclude=True, description="Transport retries spent fetching this record")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "label": "Jumping into poo",
                "descriptions": [
                    "A photo of a person stands at the edge of a pool, preparing to jump in.",
                    "A photo of a person leaps off the edge, mid-air over the pool.",
                    "A photo of a person enters the water, creating a splash as they dive in."
                ]
            }
        }
    )

    @property
    def num_phases(self) -> int:
        return len(self.descriptions)

    def to_llm_json(self) -> str:
        """Serialize in the reply format the prompt asks for."""
        payload = {ACTION_LABEL_KEY: self.label}
        if self.scene is not None:
            payload[SCENE_KEY] = self.scene
        payload[SUB_ACTION_KEY] = list(self.descriptions)
        return json.dumps(payload, ensure_ascii=False)


class TextAnatomy(BaseModel):
    """Per-phase text embeddings t_1..t_L of one action class."""
    class_id: int
    phase_embeddings: np.ndarray
    label_embedding: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("phase_embeddings", mode="before")
    @classmethod
    def validate_phases(cls, v):
        """L x C, finite."""
        return as_feature_matrix(v, "phase_embeddings")

    @field_validator("label_embedding", mode="before")
    @classmethod
    def validate_label(cls, v):
        """Optional C-vector, finite."""
        if v is None:
            return None
        vector = np.asarray(v, dtype=np.float64)
        if vector.ndim != 1 or not np.all(np.isfinite(vector)):
            raise InvalidDataError("label_embedding must be a finite vector")
        vector.setflags(write=False)
        return vector

    @model_validator(mode="after")
    def validate_dims(self):
        """Label embedding shares the phase embedding dimension."""
        if self.label_embedding is not None and self.label_embedding.shape[0] != self.dim:
            raise InvalidDataError(
                f"label_embedding has dim {self.label_embedding.shape[0]}, phases have dim {self.dim}")
        return self

    @property
    def num_phases(self) -> int:
        return int(self.phase_embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.phase_embeddings.shape[1])

    def for_source(self, source: TextSource, num_phases: int) -> "TextAnatomy":
        """Rows to use for a text source; the label row is repeated once per phase.

        Raises:
            InvalidArgumentError: If the label source is asked for without a label embedding
        """
        if TextSource(source) is TextSource.ATOMIC:
            return self
        if self.label_embedding is None:
            raise InvalidArgumentError(
                f"class {self.class_id} has no label embedding; embed with --include-label to use text_source=label")
        return TextAnatomy(class_id=self.class_id,
                           phase_embeddings=np.tile(self.label_embedding, (num_phases, 1)),
                           label_embedding=self.label_embedding)
