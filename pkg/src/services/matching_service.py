"""Multimodal matching: Hausdorff-style video distances, video-text scores and their combination."""
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from src.models.fusion import Prototype
from src.models.matching import ClassScores, KShotReduction, MatchConfig, Metric, ScoreSource
from src.models.text_anatomy import TextAnatomy
from src.utils.errors import DegeneratePhaseError, InvalidArgumentError, NumericError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

ClassSupports = Sequence[Tuple[int, Sequence[Prototype]]]


def _bidirectional_min_sum(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of nearest-neighbour distances from a to b plus from b to a."""
    distances = cdist(a, b, metric="euclidean")
    return float(distances.min(axis=1).sum() + distances.min(axis=0).sum())


def _check_frames(num_frames: int) -> None:
    if num_frames < 1:
        raise InvalidArgumentError(f"T must be positive, got {num_frames}")


def ab_mhm(query: Prototype, support: Prototype, num_frames: int) -> float:
    """Aligned bidirectional mean Hausdorff metric.

    Phase k of the query is only compared with phase k of the support; the
    bidirectional nearest-neighbour sums over all phases are scaled by 1/T.

    Args:
        query: Query prototype
        support: Support prototype with the same phase count
        num_frames: T of the query

    Raises:
        InvalidArgumentError: If phase counts differ
        DegeneratePhaseError: If a phase is empty on either side
    """
    _check_frames(num_frames)
    if query.num_phases != support.num_phases:
        raise InvalidArgumentError(
            f"phase count mismatch: query has L={query.num_phases}, support has L={support.num_phases}")

    total = 0.0
    for k in range(query.num_phases):
        q_rows, s_rows = query.phase_rows(k), support.phase_rows(k)
        if q_rows.shape[0] == 0 or s_rows.shape[0] == 0:
            raise DegeneratePhaseError(
                f"phase {k} is empty (query {q_rows.shape[0]} rows, support {s_rows.shape[0]} rows)")
        total += _bidirectional_min_sum(q_rows, s_rows)
    return total / num_frames


def bi_mhm(query: Prototype, support: Prototype, num_frames: int) -> float:
    """Unaligned bidirectional mean Hausdorff metric over all rows."""
    _check_frames(num_frames)
    if query.fused.shape[0] == 0 or support.fused.shape[0] == 0:
        raise InvalidArgumentError("prototypes must contain at least one row")
    return _bidirectional_min_sum(query.fused, support.fused) / num_frames


METRICS = {
    Metric.AB_MHM: ab_mhm,
    Metric.BI_MHM: bi_mhm,
}


def class_distances(query: Prototype, class_supports: ClassSupports, cfg: MatchConfig) -> List[float]:
    """One distance per class, reducing the K support distances per cfg."""
    if not class_supports:
        raise InvalidArgumentError("class_supports must not be empty")
    metric = METRICS[Metric(cfg.metric)]
    distances = []
    for class_id, supports in class_supports:
        if not supports:
            raise InvalidArgumentError(f"class {class_id} has no support prototypes")
        per_video = [metric(query, support, query.num_frames) for support in supports]
        if KShotReduction(cfg.kshot_reduction) == KShotReduction.MIN_DISTANCE:
            distances.append(min(per_video))
        else:
            distances.append(float(np.mean(per_video)))
    return distances


def _scores(logits: np.ndarray, class_ids: List[int], source: ScoreSource) -> ClassScores:
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite {source.value} logits")
    probs = softmax(logits.astype(np.float64))
    return ClassScores(probs=[float(p) for p in probs], class_ids=list(class_ids), source=source)


def video_video_scores(query: Prototype, class_supports: ClassSupports, cfg: MatchConfig) -> ClassScores:
    """Softmax over negated class distances."""
    distances = class_distances(query, class_supports, cfg)
    class_ids = [class_id for class_id, _ in class_supports]
    logger.debug(f"Class distances for {query.video_id}: {dict(zip(class_ids, distances))}")
    return _scores(-np.asarray(distances), class_ids, ScoreSource.VIDEO_VIDEO)


def pooled_phases(query: Prototype) -> np.ndarray:
    """Average-pool each phase of a prototype into an L x C matrix."""
    return np.stack([query.phase_rows(k).mean(axis=0) for k in range(query.num_phases)])


def video_text_scores(query: Prototype, texts: Sequence[TextAnatomy], cfg: MatchConfig) -> ClassScores:
    """Softmax over summed per-phase inner products with each class's text rows.

    `cfg.text_source` selects atomic phase rows or the repeated label row.

    Raises:
        InvalidArgumentError: If texts is empty or L/C disagree
    """
    if not texts:
        raise InvalidArgumentError("texts must not be empty")
    pooled = pooled_phases(query)
    scores = []
    for text in texts:
        text = text.for_source(cfg.text_source, query.num_phases)
        if text.num_phases != query.num_phases:
            raise InvalidArgumentError(
                f"phase count mismatch: query has L={query.num_phases}, class {text.class_id} text has L={text.num_phases}")
        if text.dim != pooled.shape[1]:
            raise InvalidArgumentError(
                f"feature dimension mismatch: query has C={pooled.shape[1]}, class {text.class_id} text has C={text.dim}")
        scores.append(float(np.einsum("kc,kc->", pooled, text.phase_embeddings.astype(np.float64))))
    logits = np.asarray(scores) / cfg.temperature_vt
    return _scores(logits, [t.class_id for t in texts], ScoreSource.VIDEO_TEXT)


def combine(p_vv: ClassScores, p_vt: ClassScores, alpha: float) -> ClassScores:
    """Weighted geometric mean p_vv^alpha * p_vt^(1-alpha), renormalized.

    0^0 is taken as 1, and the endpoints return the corresponding input
    unchanged.

    Raises:
        InvalidArgumentError: If class ids differ or alpha is outside [0, 1]
        NumericError: If every combined probability is zero
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError("alpha must be in [0,1]")
    if p_vv.class_ids != p_vt.class_ids:
        raise InvalidArgumentError(f"class id mismatch: {p_vv.class_ids} vs {p_vt.class_ids}")

    if alpha == 1.0:
        return ClassScores(probs=list(p_vv.probs), class_ids=list(p_vv.class_ids), source=ScoreSource.COMBINED)
    if alpha == 0.0:
        return ClassScores(probs=list(p_vt.probs), class_ids=list(p_vt.class_ids), source=ScoreSource.COMBINED)

    unnormalized = np.power(np.asarray(p_vv.probs), alpha) * np.power(np.asarray(p_vt.probs), 1.0 - alpha)
    total = unnormalized.sum()
    if total <= 0.0 or not np.isfinite(total):
        raise NumericError("combined probabilities vanish for every class")
    return ClassScores(
        probs=[float(p) for p in unnormalized / total],
        class_ids=list(p_vv.class_ids),
        source=ScoreSource.COMBINED,
    )
