"""Fusion weight and action prototype models."""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.features import Segmentation
from src.utils.errors import InvalidDataError

# Order in which parameters are stored in the weights file.
PARAMETER_ORDER = ("w_q", "w_k", "w_v", "w_o", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2")


class FusionWeights(BaseModel):
    """Cross-attention and feed-forward parameters.

    Projections are stored fused as C x C matrices; head i uses columns
    [i*d_k, (i+1)*d_k) with d_k = C / heads. Arrays are float32 so the
    weights file round-trips bit-exactly.
    """
    heads: int = Field(..., ge=1)
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="before")
    @classmethod
    def freeze_arrays(cls, data):
        """Store every parameter as a read-only float32 array."""
        if isinstance(data, dict):
            data = dict(data)
            for name in PARAMETER_ORDER:
                if name in data and data[name] is not None:
                    array = np.array(data[name], dtype=np.float32, copy=True)
                    array.setflags(write=False)
                    data[name] = array
        return data

    @model_validator(mode="after")
    def validate_shapes(self):
        """Shapes agree with (C, heads, hidden) and entries are finite."""
        dim = self.w_q.shape[0] if self.w_q.ndim == 2 else -1
        if dim < 1 or dim % self.heads != 0:
            raise ValueError(f"dimension {dim} is not divisible by heads={self.heads}")
        hidden = self.ffn_w1.shape[1] if self.ffn_w1.ndim == 2 else -1
        expected = {
            "w_q": (dim, dim), "w_k": (dim, dim), "w_v": (dim, dim), "w_o": (dim, dim),
            "ffn_w1": (dim, hidden), "ffn_b1": (hidden,), "ffn_w2": (hidden, dim), "ffn_b2": (dim,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidDataError(f"{name} contains non-finite entries")
        return self

    @property
    def dim(self) -> int:
        return int(self.w_q.shape[0])

    @property
    def hidden(self) -> int:
        return int(self.ffn_w1.shape[1])

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def parameters(self) -> List[np.ndarray]:
        """Parameters in file order."""
        return [getattr(self, name) for name in PARAMETER_ORDER]


class Prototype(BaseModel):
    """Fused per-frame features grouped by phase, in segmentation order."""
    fused: np.ndarray
    segmentation: Segmentation
    class_id: Optional[int] = None
    video_id: Optional[str] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def validate_rows(self):
        """One row per clustered index, finite entries."""
        if self.fused.ndim != 2 or self.fused.shape[0] != self.segmentation.total_rows:
            raise ValueError(
                f"fused has shape {self.fused.shape}, expected {self.segmentation.total_rows} rows")
        if not np.all(np.isfinite(self.fused)):
            raise InvalidDataError("fused prototype contains non-finite entries")
        return self

    @property
    def num_phases(self) -> int:
        return self.segmentation.num_phases

    @property
    def num_frames(self) -> int:
        return self.segmentation.num_frames

    def phase_rows(self, k: int) -> np.ndarray:
        """Rows of phase k (overlap duplicates included)."""
        sizes = [len(c) for c in self.segmentation.clusters]
        start = sum(sizes[:k])
        return self.fused[start:start + sizes[k]]
