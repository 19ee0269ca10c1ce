"""Fine-grained multimodal fusion: phase-wise cross-attention plus residual FFN."""
import math
from typing import Callable, Optional

import numpy as np
from scipy.special import erf, softmax

from src.models.features import FrameFeatures, Segmentation
from src.models.fusion import FusionWeights, Prototype
from src.models.text_anatomy import TextAnatomy, TextSource
from src.utils.errors import InvalidArgumentError, NumericError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

# Called with (logits, attention) arrays of shape (heads, rows, keys).
DebugHook = Callable[[np.ndarray, np.ndarray], None]

LAYER_NORM_EPS = 1e-5


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LAYER_NORM_EPS)


def _check_finite(array: np.ndarray, stage: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite values after {stage}")
    return array


def multi_head_attention(
    queries: np.ndarray,
    keys_values: np.ndarray,
    weights: FusionWeights,
    debug_hook: Optional[DebugHook] = None
) -> np.ndarray:
    """Scaled dot-product attention over all heads, computed in float64.

    Args:
        queries: (n, C) query inputs
        keys_values: (m, C) rows used for both keys and values
        weights: Projection matrices
        debug_hook: Receives pre-softmax logits and attention probabilities

    Returns:
        (n, C) attention output after the output projection
    """
    h, d_k = weights.heads, weights.head_dim
    w_q, w_k, w_v, w_o = (w.astype(np.float64) for w in (weights.w_q, weights.w_k, weights.w_v, weights.w_o))

    # (rows, C) -> (heads, rows, d_k)
    q = (queries @ w_q).reshape(queries.shape[0], h, d_k).transpose(1, 0, 2)
    k = (keys_values @ w_k).reshape(keys_values.shape[0], h, d_k).transpose(1, 0, 2)
    v = (keys_values @ w_v).reshape(keys_values.shape[0], h, d_k).transpose(1, 0, 2)

    logits = _check_finite(q @ k.transpose(0, 2, 1) / math.sqrt(d_k), "attention logits")
    attention = softmax(logits, axis=-1)
    if debug_hook is not None:
        debug_hook(logits, attention)

    heads_out = attention @ v  # (heads, n, d_k)
    concatenated = heads_out.transpose(1, 0, 2).reshape(queries.shape[0], h * d_k)
    return concatenated @ w_o


def feed_forward(x: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """Two affine maps with GELU in between."""
    hidden = _gelu(x @ weights.ffn_w1.astype(np.float64) + weights.ffn_b1.astype(np.float64))
    return hidden @ weights.ffn_w2.astype(np.float64) + weights.ffn_b2.astype(np.float64)


def fuse(
    frames: FrameFeatures,
    seg: Segmentation,
    text: Optional[TextAnatomy],
    weights: FusionWeights,
    attention_residual: bool = False,
    layer_norm: bool = False,
    debug_hook: Optional[DebugHook] = None,
    text_source: TextSource = TextSource.ATOMIC
) -> Prototype:
    """Fuse a segmented video with its per-phase text features.

    Query rows of phase i are t_i + f_m for every frame m of cluster S_i; keys
    and values are all clustered frames concatenated in cluster order. The
    attention output a is passed through y = FFN(a) + a. `text=None` uses zero
    text vectors.

    Args:
        frames: Video features
        seg: Segmentation of the same video
        text: Class text anatomy, or None
        weights: Fusion parameters
        attention_residual: Add the query input to the attention output
        layer_norm: Parameter-free layer norm after the FFN residual
        debug_hook: Receives per-head logits and attention probabilities
        text_source: Atomic phase rows, or the label row repeated per phase

    Returns:
        Prototype with one fused row per clustered index

    Raises:
        InvalidArgumentError: If phase counts or dimensions disagree
        NumericError: If an intermediate value is not finite
    """
    if seg.num_frames != frames.num_frames:
        raise InvalidArgumentError(
            f"frames axis mismatch: segmentation covers {seg.num_frames} frames, video has {frames.num_frames}")
    if frames.dim != weights.dim:
        raise InvalidArgumentError(f"feature axis mismatch: frames have C={frames.dim}, weights have C={weights.dim}")
    if text is not None:
        text = text.for_source(text_source, seg.num_phases)
        if text.num_phases != seg.num_phases:
            raise InvalidArgumentError(
                f"phase axis mismatch: segmentation has L={seg.num_phases}, text has L={text.num_phases}")
        if text.dim != frames.dim:
            raise InvalidArgumentError(f"feature axis mismatch: frames have C={frames.dim}, text has C={text.dim}")

    data = frames.frames.astype(np.float64)
    order = np.concatenate([np.asarray(c, dtype=np.int64) for c in seg.clusters])
    keys_values = data[order]

    if text is None:
        queries = keys_values
    else:
        phase_of_row = np.repeat(np.arange(seg.num_phases), [len(c) for c in seg.clusters])
        queries = keys_values + text.phase_embeddings.astype(np.float64)[phase_of_row]

    attended = multi_head_attention(queries, keys_values, weights, debug_hook)
    if attention_residual:
        attended = attended + queries
    fused = feed_forward(attended, weights) + attended
    if layer_norm:
        fused = _layer_norm(fused)
    _check_finite(fused, "feed-forward")

    logger.debug(f"Fused video {frames.video_id}: {fused.shape[0]} rows over {seg.num_phases} phases")
    return Prototype(
        fused=fused,
        segmentation=seg,
        class_id=frames.class_id,
        video_id=frames.video_id,
    )


def init_weights(dim: int, heads: int = 8, hidden: Optional[int] = None, seed: int = 0) -> FusionWeights:
    """Seeded initialization.

    Projections are drawn from N(0, 1) / sqrt(C); the first FFN layer likewise
    with zero bias; the second FFN layer is all zeros so fusion at
    initialization is attention plus residual.

    Raises:
        InvalidArgumentError: If C is not divisible by heads
    """
    hidden = 4 * dim if hidden is None else hidden
    _check_shape(dim, heads, hidden)
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(dim)
    return FusionWeights(
        heads=heads,
        w_q=rng.standard_normal((dim, dim)) * scale,
        w_k=rng.standard_normal((dim, dim)) * scale,
        w_v=rng.standard_normal((dim, dim)) * scale,
        w_o=rng.standard_normal((dim, dim)) * scale,
        ffn_w1=rng.standard_normal((dim, hidden)) * scale,
        ffn_b1=np.zeros(hidden),
        ffn_w2=np.zeros((hidden, dim)),
        ffn_b2=np.zeros(dim),
    )


def identity_weights(dim: int, heads: int = 1, hidden: Optional[int] = None) -> FusionWeights:
    """Identity projections and a zero FFN: fusion becomes attention pooling of raw features."""
    hidden = 4 * dim if hidden is None else hidden
    _check_shape(dim, heads, hidden)
    eye = np.eye(dim)
    return FusionWeights(
        heads=heads,
        w_q=eye, w_k=eye, w_v=eye, w_o=eye,
        ffn_w1=np.zeros((dim, hidden)),
        ffn_b1=np.zeros(hidden),
        ffn_w2=np.zeros((hidden, dim)),
        ffn_b2=np.zeros(dim),
    )


def _check_shape(dim: int, heads: int, hidden: int) -> None:
    if dim < 1 or heads < 1 or hidden < 1:
        raise InvalidArgumentError(f"dim, heads and hidden must be positive, got {dim}, {heads}, {hidden}")
    if dim % heads != 0:
        raise InvalidArgumentError(f"dim {dim} is not divisible by heads {heads}")
