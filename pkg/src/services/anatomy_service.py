"""Visual anatomy: split a frame sequence into temporally ordered atomic phases."""
from typing import List, Literal, Sequence

import numpy as np

from src.models.features import FrameFeatures, Segmentation
from src.utils.errors import DegenerateFeatureError, InvalidArgumentError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

# Adjacent-pair similarities closer than this to the maximum count as tied.
SIMILARITY_TIE_TOLERANCE = 1e-12

SegmentationMethod = Literal["cluster", "hard"]


def _check_phase_count(num_frames: int, num_phases: int) -> None:
    if num_phases < 1 or num_phases > num_frames:
        raise InvalidArgumentError(
            f"num_phases must satisfy 1 <= L <= T, got L={num_phases}, T={num_frames}")


def _check_overlap(overlap: int) -> None:
    if overlap < 0:
        raise InvalidArgumentError(f"overlap must be non-negative, got {overlap}")


def mean_cluster_feature(frames: FrameFeatures, indices: Sequence[int]) -> np.ndarray:
    """Arithmetic mean of the selected rows, accumulated in double precision.

    Args:
        frames: Video features
        indices: Row indices to average

    Returns:
        Vector of C float64 values

    Raises:
        InvalidArgumentError: If indices is empty or out of range
    """
    if len(indices) == 0:
        raise InvalidArgumentError("cannot average an empty index list")
    index_array = np.asarray(indices, dtype=np.int64)
    if index_array.min() < 0 or index_array.max() >= frames.num_frames:
        raise InvalidArgumentError(
            f"indices must lie in [0, {frames.num_frames}), got {list(indices)}")
    return frames.frames[index_array].astype(np.float64).mean(axis=0)


def inject_overlap(core_clusters: List[List[int]], overlap: int) -> List[List[int]]:
    """Duplicate boundary frames into each neighbouring cluster.

    Cluster i gains the last min(o, |S_{i-1}|) indices of its left neighbour and
    the first min(o, |S_{i+1}|) indices of its right neighbour. Index lists stay
    sorted because the clusters are contiguous and ordered.
    """
    _check_overlap(overlap)
    if overlap == 0:
        return [list(c) for c in core_clusters]

    result = []
    for i, cluster in enumerate(core_clusters):
        left = core_clusters[i - 1][-overlap:] if i > 0 else []
        right = core_clusters[i + 1][:overlap] if i + 1 < len(core_clusters) else []
        result.append(list(left) + list(cluster) + list(right))
    return result


def _segmentation(starts: List[int], num_frames: int, overlap: int) -> Segmentation:
    ends = starts[1:] + [num_frames]
    core = [list(range(s, e)) for s, e in zip(starts, ends)]
    return Segmentation(
        clusters=inject_overlap(core, overlap),
        overlap=overlap,
        num_frames=num_frames,
        boundaries=list(starts),
    )


def cluster_segment(frames: FrameFeatures, num_phases: int, overlap: int = 1) -> Segmentation:
    """Greedy agglomerative merging of adjacent clusters.

    Starts from T singleton clusters. Each round recomputes every cluster mean,
    takes the cosine similarity of each adjacent pair and merges the most
    similar pair (lowest index on ties) until `num_phases` clusters remain.
    Overlap frames are injected afterwards.

    Args:
        frames: Video features (rows are finite by construction)
        num_phases: Target number of phases L, 1 <= L <= T
        overlap: Frames duplicated into each neighbour

    Returns:
        Segmentation with L clusters

    Raises:
        InvalidArgumentError: If L or overlap are out of range
        DegenerateFeatureError: If a cluster mean has zero norm
    """
    num_frames = frames.num_frames
    _check_phase_count(num_frames, num_phases)
    _check_overlap(overlap)

    data = frames.frames.astype(np.float64)
    starts = list(range(num_frames))

    while len(starts) > num_phases:
        ends = starts[1:] + [num_frames]
        means = np.stack([data[s:e].mean(axis=0) for s, e in zip(starts, ends)])
        norms = np.linalg.norm(means, axis=1)

        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            s, e = starts[zero[0]], ends[zero[0]]
            raise DegenerateFeatureError(
                f"cluster over frames [{s}, {e}) of video {frames.video_id} has a zero-norm mean; "
                "cosine similarity is undefined",
                start=s, end=e)

        sims = np.einsum("ij,ij->i", means[:-1], means[1:]) / (norms[:-1] * norms[1:])
        j = int(np.flatnonzero(sims >= sims.max() - SIMILARITY_TIE_TOLERANCE)[0])
        logger.debug(f"merging clusters {j} and {j + 1} of {len(starts)} (similarity {sims[j]:.6f})")
        del starts[j + 1]

    return _segmentation(starts, num_frames, overlap)


def hard_segment(num_frames: int, num_phases: int, overlap: int = 1) -> Segmentation:
    """Uniform split into L contiguous segments; earlier segments take the remainder."""
    if num_frames < 1:
        raise InvalidArgumentError(f"num_frames must be positive, got {num_frames}")
    _check_phase_count(num_frames, num_phases)
    _check_overlap(overlap)

    base, remainder = divmod(num_frames, num_phases)
    starts, position = [], 0
    for i in range(num_phases):
        starts.append(position)
        position += base + (1 if i < remainder else 0)
    return _segmentation(starts, num_frames, overlap)


def segment(frames: FrameFeatures, method: SegmentationMethod, num_phases: int, overlap: int = 1) -> Segmentation:
    """Dispatch to the requested segmentation method."""
    if method == "cluster":
        return cluster_segment(frames, num_phases, overlap)
    if method == "hard":
        return hard_segment(frames.num_frames, num_phases, overlap)
    raise InvalidArgumentError(f"unknown segmentation method {method!r}")
