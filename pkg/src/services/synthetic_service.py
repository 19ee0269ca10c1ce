"""Synthetic feature stores with known phase structure, and label shuffling."""
import itertools
import math
from typing import Dict, List

import numpy as np

from src.models.feature_store import FeatureStore
from src.models.features import FrameFeatures
from src.models.text_anatomy import AtomicDescriptions, TextAnatomy
from src.services.anatomy_service import hard_segment
from src.utils.errors import InvalidArgumentError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


def _orthonormal(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """`count` orthonormal rows in R^dim via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((dim, count)))
    return (q * np.sign(np.diag(r))).T


def _jittered_starts(rng: np.random.Generator, num_frames: int, num_phases: int, jitter: int) -> List[int]:
    """Nominal equal split with interior starts moved by up to `jitter`; every phase keeps >= 1 frame."""
    starts = hard_segment(num_frames, num_phases, overlap=0).boundaries
    if jitter == 0:
        return starts
    result = [0]
    for i in range(1, num_phases):
        moved = starts[i] + int(rng.integers(-jitter, jitter + 1))
        result.append(min(max(moved, result[-1] + 1), num_frames - (num_phases - i)))
    return result


def _phase_means(
    rng: np.random.Generator,
    classes: int,
    dim: int,
    num_phases: int,
    separation: float,
    shared_phases: bool
) -> List[np.ndarray]:
    if shared_phases:
        basis = _orthonormal(rng, dim, num_phases)
        orders = list(itertools.permutations(range(num_phases)))
        picks = rng.permutation(len(orders))[:classes]
        return [separation * basis[list(orders[p])] for p in picks]
    if dim >= classes * num_phases:
        basis = _orthonormal(rng, dim, classes * num_phases)
        return [separation * basis[c * num_phases:(c + 1) * num_phases] for c in range(classes)]
    return [separation * _orthonormal(rng, dim, num_phases) for _ in range(classes)]


def generate_synthetic(
    classes: int,
    videos_per_class: int,
    num_frames: int,
    dim: int,
    num_phases: int,
    noise_sigma: float,
    phase_separation: float,
    seed: int,
    shared_phases: bool = False,
    boundary_jitter: int = 1
) -> FeatureStore:
    """Build a store whose videos follow known per-class phase means.

    Every class gets `num_phases` orthonormal phase directions scaled by
    `phase_separation` (orthogonal across classes too when C allows). Frames
    are phase mean plus Gaussian noise; phase boundaries are jittered per
    video. Text anatomy rows are the exact phase means and ground-truth
    core-segment starts are recorded in `phase_starts`.

    Args:
        classes: Number of classes
        videos_per_class: Videos per class
        num_frames: T of every video
        dim: Feature dimension C, at least num_phases
        num_phases: True phase count
        noise_sigma: Per-coordinate noise standard deviation
        phase_separation: Norm of each phase mean
        seed: Generator seed
        shared_phases: All classes reuse one set of phase directions in distinct orders
        boundary_jitter: Maximum shift of each interior boundary

    Returns:
        FeatureStore with labels `class_{c:03d}` and video ids `c{c:03d}_v{v:03d}`

    Raises:
        InvalidArgumentError: If a parameter is out of range
    """
    if classes < 1 or videos_per_class < 1:
        raise InvalidArgumentError(f"classes and videos_per_class must be positive, got {classes}, {videos_per_class}")
    if num_phases < 1 or num_frames < num_phases:
        raise InvalidArgumentError(f"need 1 <= L_true <= T, got L_true={num_phases}, T={num_frames}")
    if dim < num_phases:
        raise InvalidArgumentError(f"need C >= L_true, got C={dim}, L_true={num_phases}")
    if noise_sigma < 0 or phase_separation < 0:
        raise InvalidArgumentError("noise_sigma and phase_separation must be non-negative")
    if boundary_jitter < 0:
        raise InvalidArgumentError(f"boundary_jitter must be non-negative, got {boundary_jitter}")
    if shared_phases and classes > math.factorial(num_phases):
        raise InvalidArgumentError(
            f"shared phases give {math.factorial(num_phases)} distinct orders for L_true={num_phases}, "
            f"cannot build {classes} classes")

    rng = np.random.default_rng(seed)
    means = [m.astype(np.float32) for m in _phase_means(rng, classes, dim, num_phases, phase_separation, shared_phases)]

    videos: Dict[str, FrameFeatures] = {}
    phase_starts: Dict[str, List[int]] = {}
    for c in range(classes):
        for v in range(videos_per_class):
            video_id = f"c{c:03d}_v{v:03d}"
            starts = _jittered_starts(rng, num_frames, num_phases, boundary_jitter)
            phase_of_frame = np.searchsorted(starts, np.arange(num_frames), side="right") - 1
            noise = rng.standard_normal((num_frames, dim))
            frames = (means[c][phase_of_frame].astype(np.float64) + noise_sigma * noise).astype(np.float32)
            videos[video_id] = FrameFeatures(frames=frames, video_id=video_id, class_id=c)
            phase_starts[video_id] = starts

    store = FeatureStore(
        videos=videos,
        classes={c: f"class_{c:03d}" for c in range(classes)},
        text={c: TextAnatomy(class_id=c, phase_embeddings=means[c]) for c in range(classes)},
        descriptions={
            c: AtomicDescriptions(
                label=f"class_{c:03d}",
                descriptions=[f"phase {k + 1} of class_{c:03d}" for k in range(num_phases)])
            for c in range(classes)
        },
        dim=dim,
        phase_starts=phase_starts,
    )
    logger.info(f"Generated synthetic store: {classes} classes x {videos_per_class} videos, "
                f"T={num_frames}, C={dim}, L_true={num_phases}, sigma={noise_sigma}, seed={seed}")
    return store


def shuffle_labels(store: FeatureStore, seed: int) -> FeatureStore:
    """Randomly permute class assignments across videos, keeping class sizes.

    Class text and descriptions stay attached to the class ids, so no cue
    links a video to its new label.
    """
    rng = np.random.default_rng(seed)
    video_ids = sorted(store.videos)
    labels = [store.videos[v].class_id for v in video_ids]
    shuffled = [labels[i] for i in rng.permutation(len(labels))]
    videos = {
        video_id: FrameFeatures(frames=store.videos[video_id].frames, video_id=video_id, class_id=class_id)
        for video_id, class_id in zip(video_ids, shuffled)
    }
    logger.info(f"Shuffled labels of {len(videos)} videos (seed {seed})")
    return store.model_copy(update={"videos": videos, "phase_starts": {}})
