"""Episodic N-way K-shot sampling, the end-to-end pipeline and accuracy statistics."""
import csv
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import beta

from src.models.episode import Episode, EpisodeResult, EvalReport, QueryResult
from src.models.feature_store import FeatureStore
from src.models.fusion import FusionWeights, Prototype
from src.models.matching import MatchConfig, ScoreSource
from src.models.run_config import RunConfig
from src.models.text_anatomy import TextAnatomy, TextSource
from src.services.anatomy_service import SegmentationMethod, segment
from src.services.fusion_service import fuse
from src.services.matching_service import combine, video_text_scores, video_video_scores
from src.utils.errors import EpisodeError, InvalidArgumentError, LGAError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
Z95 = 1.96

EPISODE_LOG_COLUMNS = ["episode", "seed", "query", "true_class", "predicted", "correct"]


def splitmix64(value: int) -> int:
    """SplitMix64 output function (finaliser) on a 64-bit value."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def episode_seed(run_seed: int, index: int) -> int:
    """Seed of episode `index`: splitmix64(run_seed + GOLDEN_GAMMA * (index + 1) mod 2^64)."""
    return splitmix64((run_seed + GOLDEN_GAMMA * (index + 1)) & MASK64)


def sample_episode(
    store: FeatureStore,
    way: int,
    shot: int,
    queries_per_class: Optional[int] = None,
    seed: int = 0,
    index: int = 0
) -> Episode:
    """Sample one episode deterministically from a seed.

    Classes are drawn without replacement among classes holding enough
    videos, then videos without replacement within each class. With
    `queries_per_class=None` a single query is drawn from a uniformly chosen
    episode class; otherwise each class contributes that many queries.

    Raises:
        InvalidArgumentError: If too few classes or videos are available
    """
    if way < 1 or shot < 1:
        raise InvalidArgumentError(f"way and shot must be positive, got N={way}, K={shot}")
    if queries_per_class is not None and queries_per_class < 1:
        raise InvalidArgumentError(f"queries_per_class must be positive, got {queries_per_class}")

    per_class_queries = queries_per_class or 1
    needed = shot + per_class_queries
    grouped = store.videos_by_class()
    eligible = [class_id for class_id, ids in grouped.items() if len(ids) >= needed]
    if len(eligible) < way:
        raise InvalidArgumentError(
            f"{way}-way {shot}-shot with {per_class_queries} queries per class needs {way} classes "
            f"with >= {needed} videos; store has {len(eligible)} (short by {way - len(eligible)})")

    rng = np.random.default_rng(seed & MASK64)
    chosen = [eligible[i] for i in rng.choice(len(eligible), size=way, replace=False)]

    support: List[Tuple[int, List[str]]] = []
    pools: List[List[str]] = []
    for class_id in chosen:
        ids = grouped[class_id]
        order = rng.permutation(len(ids))
        support.append((class_id, [ids[i] for i in order[:shot]]))
        pools.append([ids[i] for i in order[shot:shot + per_class_queries]])

    if queries_per_class is None:
        position = int(rng.integers(way))
        queries = [(pools[position][0], chosen[position])]
    else:
        queries = [(video_id, class_id) for class_id, pool in zip(chosen, pools) for video_id in pool]

    return Episode(way=way, shot=shot, support=support, queries=queries, seed=seed, index=index)


class PrototypeBuilder:
    """Segments and fuses store videos, memoising prototypes.

    Prototypes are pure functions of (video, text, settings), so the cache
    never changes results; it is safe to share across threads.
    """

    def __init__(
        self,
        store: FeatureStore,
        weights: FusionWeights,
        seg_method: SegmentationMethod = "cluster",
        num_phases: int = 3,
        overlap: int = 1,
        attention_residual: bool = False,
        layer_norm: bool = False,
        text_source: TextSource = TextSource.ATOMIC
    ) -> None:
        if weights.dim != store.dim:
            raise InvalidArgumentError(f"feature axis mismatch: store has C={store.dim}, weights have C={weights.dim}")
        self.store = store
        self.weights = weights
        self.seg_method = seg_method
        self.num_phases = num_phases
        self.overlap = overlap
        self.attention_residual = attention_residual
        self.layer_norm = layer_norm
        self.text_source = TextSource(text_source)
        self._cache: Dict[Tuple[str, Optional[int]], Prototype] = {}
        self._lock = threading.Lock()

    @property
    def text_usable(self) -> bool:
        """Store text can supply L rows: atomic text with L phases, or a label row for every class."""
        if self.text_source is TextSource.LABEL:
            return bool(self.store.text) and all(t.label_embedding is not None for t in self.store.text.values())
        return self.store.text_phases == self.num_phases

    def support_text(self, class_id: int) -> Optional[TextAnatomy]:
        """Text used when fusing a support video of class_id."""
        return self.store.text.get(class_id) if self.text_usable else None

    def prototype(self, video_id: str, text: Optional[TextAnatomy]) -> Prototype:
        """Segment and fuse one video with the given text (None = zero text)."""
        key = (video_id, text.class_id if text is not None else None)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        frames = self.store.videos[video_id]
        try:
            seg = segment(frames, self.seg_method, self.num_phases, self.overlap)
            proto = fuse(frames, seg, text, self.weights,
                         attention_residual=self.attention_residual, layer_norm=self.layer_norm,
                         text_source=self.text_source)
        except LGAError as e:
            e.add_note(f"while building the prototype of video {video_id}")
            logger.error(f"Error building prototype for video {video_id}: {str(e)}")
            raise

        with self._lock:
            self._cache.setdefault(key, proto)
        return proto


def run_episode(
    ep: Episode,
    store: FeatureStore,
    seg_method: SegmentationMethod,
    num_phases: int,
    overlap: int,
    weights: FusionWeights,
    cfg: MatchConfig,
    attention_residual: bool = False,
    layer_norm: bool = False,
    builder: Optional[PrototypeBuilder] = None
) -> EpisodeResult:
    """Classify every query of an episode.

    Supports are fused with their class text when the store can supply L
    rows for `cfg.text_source`; queries, whose class is unknown, are fused
    with zero text. With alpha = 1 only video-video matching is used.

    Raises:
        InvalidArgumentError: If alpha < 1 and class text with L phases is missing
    """
    if builder is None:
        builder = PrototypeBuilder(store, weights, seg_method, num_phases, overlap, attention_residual, layer_norm,
                                   cfg.text_source)
    if builder.text_source is not cfg.text_source:
        raise InvalidArgumentError(
            f"prototype builder uses text_source={builder.text_source.value}, match config {cfg.text_source.value}")

    use_text_scores = cfg.alpha < 1.0
    if use_text_scores:
        missing = [c for c in ep.class_ids if c not in store.text]
        if missing or not builder.text_usable:
            raise InvalidArgumentError(
                f"alpha={cfg.alpha} needs text anatomy with L={num_phases} ({cfg.text_source.value} source) "
                f"for classes {ep.class_ids}; missing {missing}, store text has L={store.text_phases}")

    class_supports = [
        (class_id, [builder.prototype(v, builder.support_text(class_id)) for v in video_ids])
        for class_id, video_ids in ep.support
    ]
    texts = [store.text[c] for c in ep.class_ids] if use_text_scores else []

    results = []
    for video_id, true_class in ep.queries:
        query = builder.prototype(video_id, None)
        vv = video_video_scores(query, class_supports, cfg)
        if use_text_scores:
            vt = video_text_scores(query, texts, cfg)
            combined = combine(vv, vt, cfg.alpha)
        else:
            vt = None
            combined = vv.model_copy(update={"source": ScoreSource.COMBINED})
        results.append(QueryResult(
            video_id=video_id, true_class=true_class, video_video=vv, video_text=vt, combined=combined))
    return EpisodeResult(index=ep.index, seed=ep.seed, queries=results)


def accuracy_interval(correct: int, total: int, method: str = "normal") -> Tuple[float, float, float]:
    """95% interval for a binomial proportion.

    Returns:
        (halfwidth, low, high); normal uses 1.96*sqrt(p(1-p)/n), exact is Clopper-Pearson
    """
    if total < 1:
        raise InvalidArgumentError("cannot build an interval from zero trials")
    p = correct / total
    if method == "exact":
        low = float(beta.ppf(0.025, correct, total - correct + 1)) if correct > 0 else 0.0
        high = float(beta.ppf(0.975, correct + 1, total - correct)) if correct < total else 1.0
        return (high - low) / 2.0, low, high
    if method != "normal":
        raise InvalidArgumentError(f"unknown ci method {method!r}")
    halfwidth = Z95 * math.sqrt(p * (1.0 - p) / total)
    return halfwidth, max(0.0, p - halfwidth), min(1.0, p + halfwidth)


def _write_episode_log(results: List[EpisodeResult], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(EPISODE_LOG_COLUMNS)
        for result in results:
            for query in result.queries:
                writer.writerow([result.index, result.seed, query.video_id, query.true_class,
                                 query.predicted_class, int(query.correct)])
    logger.info(f"Wrote per-episode log to {path}")


def evaluate(
    store: FeatureStore,
    way: int,
    shot: int,
    episodes: int,
    seed: int,
    seg_method: SegmentationMethod,
    num_phases: int,
    overlap: int,
    weights: FusionWeights,
    cfg: MatchConfig,
    queries_per_class: Optional[int] = None,
    threads: int = 1,
    ci_method: str = "normal",
    attention_residual: bool = False,
    layer_norm: bool = False,
    episode_log: Optional[Union[str, Path]] = None,
    config_snapshot: Optional[Dict[str, Any]] = None,
    builder: Optional[PrototypeBuilder] = None
) -> EvalReport:
    """Run independent episodes and aggregate accuracy.

    Episode i uses seed episode_seed(seed, i); results are reduced in index
    order, so the report does not depend on thread count.

    Raises:
        InvalidArgumentError: If episodes < 1 or threads < 1
        EpisodeError: If any episode fails (carries its index and seed)
    """
    if episodes < 1:
        raise InvalidArgumentError(f"episodes must be positive, got {episodes}")
    if threads < 1:
        raise InvalidArgumentError(f"threads must be positive, got {threads}")
    if builder is None:
        builder = PrototypeBuilder(store, weights, seg_method, num_phases, overlap, attention_residual, layer_norm,
                                   cfg.text_source)

    def _run(index: int) -> EpisodeResult:
        ep_seed = episode_seed(seed, index)
        try:
            ep = sample_episode(store, way, shot, queries_per_class, ep_seed, index)
            return run_episode(ep, store, seg_method, num_phases, overlap, weights, cfg, builder=builder)
        except LGAError as e:
            raise EpisodeError(str(e), index, ep_seed) from e

    logger.info(f"Starting {episodes} episodes ({way}-way {shot}-shot, seed {seed}, {threads} threads)")
    started = time.perf_counter()
    if threads == 1:
        results = [_run(i) for i in range(episodes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run, range(episodes)))
    wall_time = time.perf_counter() - started

    queries = [q for r in results for q in r.queries]
    correct = sum(q.correct for q in queries)
    per_source = {
        ScoreSource.VIDEO_VIDEO.value: sum(q.video_video.predicted_class == q.true_class for q in queries) / len(queries),
        ScoreSource.COMBINED.value: correct / len(queries),
    }
    if all(q.video_text is not None for q in queries):
        per_source[ScoreSource.VIDEO_TEXT.value] = (
            sum(q.video_text.predicted_class == q.true_class for q in queries) / len(queries))

    halfwidth, low, high = accuracy_interval(correct, len(queries), ci_method)
    if episode_log is not None:
        _write_episode_log(results, episode_log)

    report = EvalReport(
        episodes=episodes,
        queries=len(queries),
        correct=correct,
        accuracy=correct / len(queries),
        ci95_halfwidth=halfwidth,
        ci95_low=low,
        ci95_high=high,
        ci_method=ci_method,
        per_source=per_source,
        wall_time=wall_time,
        config=config_snapshot or {},
    )
    logger.info(f"Finished {episodes} episodes: accuracy {report.accuracy:.4f} ± {halfwidth:.4f} in {wall_time:.1f}s")
    return report


def evaluate_run_config(config: RunConfig, store: FeatureStore, weights: FusionWeights) -> EvalReport:
    """Evaluate with every setting taken from a resolved RunConfig."""
    return evaluate(
        store,
        config.way,
        config.shot,
        config.episodes,
        config.seed,
        config.seg_method,
        config.num_phases,
        config.overlap,
        weights,
        config.match_config(),
        queries_per_class=config.queries_per_class,
        threads=config.threads or 1,
        ci_method=config.ci_method,
        attention_residual=config.attention_residual,
        layer_norm=config.layer_norm,
        episode_log=config.episode_log,
        config_snapshot=config.snapshot(),
    )
