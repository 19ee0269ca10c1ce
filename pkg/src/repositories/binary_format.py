"""Little-endian binary helpers for feature blobs and weights files."""
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.utils.errors import CorruptFileError, TruncatedFileError

FLOAT_DTYPE = np.dtype("<f4")


def pack_header(fmt: str, magic: bytes, version: int, *fields: int) -> bytes:
    """Pack magic, u16 version and u32 fields."""
    return struct.pack(fmt, magic, version, *fields)


def unpack_header(data: bytes, fmt: str, magic: bytes, version: int, path: Union[str, Path]) -> Tuple[int, ...]:
    """Validate magic and version and return the remaining header fields.

    Raises:
        CorruptFileError: Magic (offset 0) or version (offset 4) mismatch
        TruncatedFileError: File shorter than the header
    """
    size = struct.calcsize(fmt)
    if len(data) >= len(magic) and data[:len(magic)] != magic:
        raise CorruptFileError(f"bad magic {data[:len(magic)]!r}, expected {magic!r}", path, 0)
    if len(data) < size:
        raise TruncatedFileError(f"header needs {size} bytes, file has {len(data)}", path, len(data))
    found_magic, found_version, *fields = struct.unpack(fmt, data[:size])
    if found_version != version:
        raise CorruptFileError(f"unsupported version {found_version}, expected {version}", path, len(magic))
    return tuple(fields)


def encode_floats(array: np.ndarray) -> bytes:
    """Row-major little-endian float32 bytes."""
    return np.ascontiguousarray(array, dtype=FLOAT_DTYPE).tobytes()


def decode_floats(data: bytes, offset: int, shape: Tuple[int, ...], path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    """Read a float32 array of the given shape starting at offset.

    Returns:
        The array (native float32) and the offset just past it
    """
    count = int(np.prod(shape)) if shape else 1
    end = offset + count * FLOAT_DTYPE.itemsize
    if end > len(data):
        raise TruncatedFileError(
            f"payload needs {end - offset} bytes from offset {offset}, file has {len(data) - offset}",
            path, len(data))
    array = np.frombuffer(data, dtype=FLOAT_DTYPE, count=count, offset=offset).reshape(shape)
    return array.astype(np.float32), end
