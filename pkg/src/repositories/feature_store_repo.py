"""Repository for feature stores: JSON manifest plus binary feature blobs.

Blob layout: magic "LGAF", u16 version, u32 rows, u32 cols (little endian),
then rows x cols float32 values, row-major.
"""
import hashlib
import json
import re
import struct
import threading
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from src.models.feature_store import (
    MANIFEST_VERSION,
    FeatureStore,
    Manifest,
    ManifestClass,
    ManifestVideo,
)
from src.models.features import FrameFeatures
from src.models.text_anatomy import TextAnatomy
from src.repositories.binary_format import decode_floats, encode_floats, pack_header, unpack_header
from src.utils.errors import (
    CorruptFileError,
    DanglingReferenceError,
    DimensionMismatchError,
    InvalidDataError,
    MissingBlobError,
)
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

BLOB_MAGIC = b"LGAF"
BLOB_VERSION = 1
BLOB_HEADER = "<4sHII"
BLOB_HEADER_SIZE = struct.calcsize(BLOB_HEADER)
BLOB_DIR = "blobs"
DEFAULT_MANIFEST = "store.json"

_UNSAFE = re.compile(r"[^A-Za-z0-9_.-]")


def encode_blob(matrix: np.ndarray) -> bytes:
    """Serialize a 2-D matrix as a feature blob."""
    rows, cols = matrix.shape
    return pack_header(BLOB_HEADER, BLOB_MAGIC, BLOB_VERSION, rows, cols) + encode_floats(matrix)


def decode_blob(data: bytes, path: Union[str, Path] = "<memory>") -> np.ndarray:
    """Parse a feature blob into a float32 matrix.

    Raises:
        CorruptFileError: Bad magic (offset 0), version (offset 4) or trailing bytes
        TruncatedFileError: Header or payload cut short
    """
    rows, cols = unpack_header(data, BLOB_HEADER, BLOB_MAGIC, BLOB_VERSION, path)
    matrix, end = decode_floats(data, BLOB_HEADER_SIZE, (rows, cols), path)
    if end != len(data):
        raise CorruptFileError(f"{len(data) - end} trailing bytes after payload", path, end)
    return matrix


def write_blob(matrix: np.ndarray, path: Union[str, Path]) -> Path:
    """Write one blob file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_blob(matrix))
    return path


def read_blob(path: Union[str, Path]) -> np.ndarray:
    """Read one blob file."""
    path = Path(path)
    if not path.is_file():
        raise MissingBlobError("blob not found", path)
    return decode_blob(path.read_bytes(), path)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1, keepdims=True)
    return (matrix / np.where(norms == 0.0, 1.0, norms)).astype(matrix.dtype)


def _read_matrix(base: Path, relative: str, expected: Tuple[int, int], what: str) -> np.ndarray:
    path = base / relative
    matrix = read_blob(path)
    if matrix.shape[0] != expected[0]:
        raise DimensionMismatchError(
            f"{what} has {matrix.shape[0]} rows, manifest declares {expected[0]}", path, 6)
    if matrix.shape[1] != expected[1]:
        raise DimensionMismatchError(
            f"{what} has {matrix.shape[1]} columns, store dim is {expected[1]}", path, 10)
    return matrix


def load_store(manifest: Union[str, Path], normalize: bool = False) -> FeatureStore:
    """Load a feature store from its manifest.

    Args:
        manifest: Path to the manifest JSON
        normalize: L2-normalize every frame and text row at ingestion

    Returns:
        FeatureStore with every referenced blob loaded

    Raises:
        MissingBlobError: Manifest or blob missing
        CorruptFileError: Invalid manifest or blob header
        TruncatedFileError: Blob shorter than declared
        DimensionMismatchError: Blob shape disagrees with manifest
        DanglingReferenceError: Video references an unknown class
        InvalidDataError: Non-finite values in a blob
    """
    manifest_path = Path(manifest)
    if not manifest_path.is_file():
        raise MissingBlobError("manifest not found", manifest_path)
    try:
        parsed = Manifest.model_validate(json.loads(manifest_path.read_text(encoding="utf-8")))
    except (ValueError, ValidationError) as e:
        logger.error(f"Invalid manifest {manifest_path}: {str(e)}")
        raise CorruptFileError(f"invalid manifest: {e}", manifest_path) from e
    if parsed.version != MANIFEST_VERSION:
        raise CorruptFileError(f"unsupported manifest version {parsed.version}", manifest_path)

    base = manifest_path.parent
    classes: Dict[int, str] = {}
    text: Dict[int, TextAnatomy] = {}
    descriptions = {}
    for entry in parsed.classes:
        classes[entry.id] = entry.label
        if entry.descriptions is not None:
            descriptions[entry.id] = entry.descriptions
    text_rows = {}
    for entry in parsed.classes:
        if entry.text_blob is None:
            continue
        matrix = read_blob(base / entry.text_blob)
        if matrix.shape[1] != parsed.dim:
            raise DimensionMismatchError(
                f"text of class {entry.id} has {matrix.shape[1]} columns, store dim is {parsed.dim}",
                base / entry.text_blob, 10)
        if normalize:
            matrix = _normalize_rows(matrix)
        label_embedding = matrix[0] if entry.text_has_label else None
        phases = matrix[1:] if entry.text_has_label else matrix
        if phases.shape[0] < 1:
            raise DimensionMismatchError(f"text of class {entry.id} has no phase rows", base / entry.text_blob, 6)
        text_rows[entry.id] = phases.shape[0]
        try:
            text[entry.id] = TextAnatomy(class_id=entry.id, phase_embeddings=phases, label_embedding=label_embedding)
        except InvalidDataError as e:
            raise InvalidDataError(f"{base / entry.text_blob}: {e}") from e
    if len(set(text_rows.values())) > 1:
        raise DimensionMismatchError(f"text phase counts differ across classes: {text_rows}", manifest_path)

    videos: Dict[str, FrameFeatures] = {}
    phase_starts = {}
    for entry in parsed.videos:
        if entry.class_id not in classes:
            raise DanglingReferenceError(
                f"video {entry.id} references unknown class id {entry.class_id}", entry.class_id, manifest_path)
        if entry.id in videos:
            raise CorruptFileError(f"duplicate video id {entry.id}", manifest_path)
        matrix = _read_matrix(base, entry.blob, (entry.frames, parsed.dim), f"video {entry.id}")
        if normalize:
            matrix = _normalize_rows(matrix)
        try:
            videos[entry.id] = FrameFeatures(frames=matrix, video_id=entry.id, class_id=entry.class_id)
        except InvalidDataError as e:
            raise InvalidDataError(f"{base / entry.blob}: {e}") from e
        if entry.phase_starts is not None:
            phase_starts[entry.id] = list(entry.phase_starts)

    store = FeatureStore(
        videos=videos,
        classes=classes,
        text=text,
        descriptions=descriptions,
        dim=parsed.dim,
        manifest_path=manifest_path,
        phase_starts=phase_starts,
    )
    logger.info(f"Loaded store {manifest_path}: {len(videos)} videos, {len(classes)} classes, C={parsed.dim}")
    return store


def _blob_name(prefix: str, identifier: object) -> str:
    """Blob path for an id; the digest keeps ids that sanitize alike apart."""
    raw = str(identifier)
    digest = hashlib.sha1(raw.encode("utf-8")).hexdigest()[:10]
    return f"{BLOB_DIR}/{prefix}{_UNSAFE.sub('_', raw)}-{digest}.lgaf"


def save_store(store: FeatureStore, directory: Union[str, Path], manifest_name: str = DEFAULT_MANIFEST) -> Path:
    """Write a store as manifest plus blobs; output is byte-stable for equal stores.

    Returns:
        Path to the written manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    class_entries = []
    for class_id in sorted(store.classes):
        entry = ManifestClass(id=class_id, label=store.classes[class_id],
                              descriptions=store.descriptions.get(class_id))
        text = store.text.get(class_id)
        if text is not None:
            matrix = text.phase_embeddings
            if text.label_embedding is not None:
                matrix = np.vstack([text.label_embedding, matrix])
                entry.text_has_label = True
            entry.text_blob = _blob_name("class_", class_id)
            write_blob(matrix, directory / entry.text_blob)
        class_entries.append(entry)

    video_entries = []
    for video_id in sorted(store.videos):
        video = store.videos[video_id]
        blob = _blob_name("video_", video_id)
        write_blob(video.frames, directory / blob)
        video_entries.append(ManifestVideo(
            id=video_id, class_id=video.class_id, blob=blob, frames=video.num_frames,
            phase_starts=store.phase_starts.get(video_id)))

    manifest = Manifest(version=MANIFEST_VERSION, dim=store.dim, classes=class_entries, videos=video_entries)
    manifest_path = directory / manifest_name
    manifest_path.write_text(
        json.dumps(manifest.model_dump(mode="json", exclude_none=True), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")
    logger.info(f"Wrote store with {len(video_entries)} videos to {manifest_path}")
    return manifest_path


class StoreRegistry:
    """Loaded stores keyed by resolved manifest path and normalization flag."""

    def __init__(self) -> None:
        self._stores: Dict[Tuple[Path, bool], FeatureStore] = {}
        self._lock = threading.Lock()

    def get(self, manifest: Union[str, Path], normalize: bool = False) -> FeatureStore:
        """Return the cached store, loading it on first use."""
        key = (Path(manifest).resolve(), normalize)
        with self._lock:
            if key not in self._stores:
                self._stores[key] = load_store(key[0], normalize=normalize)
            return self._stores[key]

    def clear(self) -> None:
        with self._lock:
            self._stores.clear()
