"""Repository for the fusion weights file.

Layout: magic "LGAW", u16 version, u32 C, u32 heads, u32 hidden (all little
endian), then float32 parameters in order W_Q, W_K, W_V, W_O, FFN1 weight,
FFN1 bias, FFN2 weight, FFN2 bias, each row-major.
"""
import struct
from pathlib import Path
from typing import Union

from src.models.fusion import FusionWeights
from src.repositories.binary_format import decode_floats, encode_floats, pack_header, unpack_header
from src.utils.errors import CorruptFileError, MissingBlobError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

WEIGHTS_MAGIC = b"LGAW"
WEIGHTS_VERSION = 1
WEIGHTS_HEADER = "<4sHIII"


def _shapes(dim: int, hidden: int) -> dict:
    return {
        "w_q": (dim, dim), "w_k": (dim, dim), "w_v": (dim, dim), "w_o": (dim, dim),
        "ffn_w1": (dim, hidden), "ffn_b1": (hidden,), "ffn_w2": (hidden, dim), "ffn_b2": (dim,),
    }


def encode_weights(weights: FusionWeights) -> bytes:
    """Serialize weights to bytes."""
    parts = [pack_header(WEIGHTS_HEADER, WEIGHTS_MAGIC, WEIGHTS_VERSION, weights.dim, weights.heads, weights.hidden)]
    parts.extend(encode_floats(p) for p in weights.parameters())
    return b"".join(parts)


def decode_weights(data: bytes, path: Union[str, Path] = "<memory>") -> FusionWeights:
    """Parse weights from bytes.

    Raises:
        CorruptFileError: Bad magic/version, bad dimensions or trailing bytes
        TruncatedFileError: Payload shorter than the header declares
    """
    dim, heads, hidden = unpack_header(data, WEIGHTS_HEADER, WEIGHTS_MAGIC, WEIGHTS_VERSION, path)
    if dim < 1 or heads < 1 or hidden < 1 or dim % heads:
        raise CorruptFileError(f"invalid header C={dim}, heads={heads}, hidden={hidden}", path, 6)

    offset = struct.calcsize(WEIGHTS_HEADER)
    params = {}
    for name, shape in _shapes(dim, hidden).items():
        params[name], offset = decode_floats(data, offset, shape, path)
    if offset != len(data):
        raise CorruptFileError(f"{len(data) - offset} trailing bytes after parameters", path, offset)
    return FusionWeights(heads=heads, **params)


def save_weights(weights: FusionWeights, path: Union[str, Path]) -> Path:
    """Write a weights file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_weights(weights))
    logger.info(f"Wrote weights C={weights.dim} heads={weights.heads} hidden={weights.hidden} to {path}")
    return path


def load_weights(path: Union[str, Path]) -> FusionWeights:
    """Read a weights file."""
    path = Path(path)
    if not path.exists():
        raise MissingBlobError("weights file not found", path)
    weights = decode_weights(path.read_bytes(), path)
    logger.debug(f"Loaded weights from {path} (C={weights.dim}, heads={weights.heads})")
    return weights


