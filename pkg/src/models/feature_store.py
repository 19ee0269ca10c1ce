"""In-memory feature store and its on-disk manifest schema."""
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.features import FrameFeatures
from src.models.text_anatomy import AtomicDescriptions, TextAnatomy

MANIFEST_VERSION = 1


class FeatureStore(BaseModel):
    """Immutable collection of videos, class labels and class text anatomies.

    `phase_starts` optionally records ground-truth core-segment starts per
    video (synthetic stores only).
    """
    videos: Dict[str, FrameFeatures]
    classes: Dict[int, str]
    text: Dict[int, TextAnatomy] = Field(default_factory=dict)
    descriptions: Dict[int, AtomicDescriptions] = Field(default_factory=dict)
    dim: int = Field(..., ge=1)
    manifest_path: Optional[Path] = None
    phase_starts: Dict[str, List[int]] = Field(default_factory=dict)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def validate_consistency(self):
        """Dims agree, class references resolve and text L is uniform."""
        for video_id, video in self.videos.items():
            if video.dim != self.dim:
                raise ValueError(f"video {video_id} has C={video.dim}, store has C={self.dim}")
            if video.class_id is None or video.class_id not in self.classes:
                raise ValueError(f"video {video_id} references unknown class {video.class_id}")
        phase_counts = {t.num_phases for t in self.text.values()}
        if len(phase_counts) > 1:
            raise ValueError(f"text anatomy phase counts differ across classes: {sorted(phase_counts)}")
        for class_id, text in self.text.items():
            if class_id not in self.classes:
                raise ValueError(f"text anatomy references unknown class {class_id}")
            if text.dim != self.dim:
                raise ValueError(f"text of class {class_id} has C={text.dim}, store has C={self.dim}")
        return self

    @property
    def text_phases(self) -> Optional[int]:
        """Phase count of the text anatomy, if any."""
        return next(iter(self.text.values())).num_phases if self.text else None

    def videos_by_class(self) -> Dict[int, List[str]]:
        """Video ids per class, both sorted."""
        grouped: Dict[int, List[str]] = {class_id: [] for class_id in sorted(self.classes)}
        for video_id in sorted(self.videos):
            grouped[self.videos[video_id].class_id].append(video_id)
        return grouped

    def summary(self) -> dict:
        """Human-oriented description of the store."""
        counts = {str(class_id): len(ids) for class_id, ids in self.videos_by_class().items()}
        frames = sorted({v.num_frames for v in self.videos.values()})
        return {
            "manifest": str(self.manifest_path) if self.manifest_path else None,
            "dim": self.dim,
            "classes": len(self.classes),
            "videos": len(self.videos),
            "frames_per_video": frames,
            "videos_per_class": counts,
            "text_classes": len(self.text),
            "text_phases": self.text_phases,
        }


class ManifestClass(BaseModel):
    """Manifest entry for one class."""
    id: int
    label: str = Field(..., min_length=1)
    text_blob: Optional[str] = None
    text_has_label: bool = False
    descriptions: Optional[AtomicDescriptions] = None


class ManifestVideo(BaseModel):
    """Manifest entry for one video."""
    id: str = Field(..., min_length=1)
    class_id: int
    blob: str = Field(..., min_length=1)
    frames: int = Field(..., ge=1)
    phase_starts: Optional[List[int]] = None


class Manifest(BaseModel):
    """Root of the store manifest JSON."""
    version: int
    dim: int = Field(..., ge=1)
    classes: List[ManifestClass]
    videos: List[ManifestVideo]
