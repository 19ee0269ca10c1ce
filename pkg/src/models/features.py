"""Frame feature and temporal segmentation models."""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.errors import InvalidDataError


def as_feature_matrix(value, name: str = "frames") -> np.ndarray:
    """Coerce a value into a read-only, finite, two-dimensional array.

    Float32 and float64 storage are kept as given; anything else becomes float64.
    """
    array = np.asarray(value)
    if array.dtype not in (np.float32, np.float64):
        array = array.astype(np.float64)
    if array.ndim != 2:
        raise InvalidDataError(f"{name} must be a 2-D matrix, got shape {array.shape}")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise InvalidDataError(f"{name} must have at least one row and one column, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        bad_row = int(np.argwhere(~np.isfinite(array))[0][0])
        raise InvalidDataError(f"{name} contains a non-finite entry in row {bad_row}")
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class FrameFeatures(BaseModel):
    """A video as a T x C matrix of per-frame embeddings, row i = frame i."""
    frames: np.ndarray
    video_id: str = Field(..., min_length=1)
    class_id: Optional[int] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("frames", mode="before")
    @classmethod
    def validate_frames(cls, v):
        """Frames must be finite and two-dimensional."""
        return as_feature_matrix(v)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


class Segmentation(BaseModel):
    """L ordered clusters of frame indices covering [0, T).

    `boundaries` holds the start index of every core segment before overlap
    frames were injected; `clusters` holds the final index lists.
    """
    clusters: List[List[int]]
    overlap: int = Field(..., ge=0)
    num_frames: int = Field(..., ge=1)
    boundaries: List[int]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_clusters(self):
        """Clusters are non-empty, sorted, inside [0, T) and match boundaries."""
        if not 1 <= len(self.clusters) <= self.num_frames:
            raise ValueError(
                f"cluster count {len(self.clusters)} outside [1, {self.num_frames}]")
        if len(self.boundaries) != len(self.clusters):
            raise ValueError("one boundary per cluster is required")
        for cluster in self.clusters:
            if not cluster:
                raise ValueError("clusters must be non-empty")
            if cluster != sorted(cluster):
                raise ValueError("cluster indices must be sorted ascending")
            if cluster[0] < 0 or cluster[-1] >= self.num_frames:
                raise ValueError(f"cluster indices must lie in [0, {self.num_frames})")
        return self

    @property
    def num_phases(self) -> int:
        return len(self.clusters)

    @property
    def total_rows(self) -> int:
        """Row count of anything built from these clusters, duplicates included."""
        return sum(len(c) for c in self.clusters)

    def core_clusters(self) -> List[List[int]]:
        """Contiguous, disjoint clusters before overlap injection."""
        ends = self.boundaries[1:] + [self.num_frames]
        return [list(range(start, end)) for start, end in zip(self.boundaries, ends)]
