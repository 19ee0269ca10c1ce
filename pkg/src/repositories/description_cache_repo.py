"""Repository for the atomic description cache file."""
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError

from src.models.text_anatomy import AtomicDescriptions
from src.utils.errors import CorruptFileError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

CacheKey = Tuple[str, int]


class DescriptionCacheEntry(BaseModel):
    """One cached LLM decomposition, keyed by the requested label and phase count."""
    label: str = Field(..., min_length=1)
    num_phases: int = Field(..., ge=1)
    record: AtomicDescriptions


class DescriptionCacheRepository:
    """UTF-8 JSON array of cache entries, kept sorted by key."""

    def __init__(self, path: Union[str, Path]):
        """Initialize repository with the cache file path."""
        self.path = Path(path)
        self._entries: Dict[CacheKey, DescriptionCacheEntry] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            raw = json.loads(self.path.read_text(encoding="utf-8"))
            if not isinstance(raw, list):
                raise ValueError("cache root must be a JSON array")
            entries = [DescriptionCacheEntry.model_validate(item) for item in raw]
        except (ValueError, ValidationError) as e:
            logger.error(f"Error reading description cache {self.path}: {str(e)}")
            raise CorruptFileError(f"invalid description cache: {e}", self.path) from e
        self._entries = {(e.label, e.num_phases): e for e in entries}
        logger.debug(f"Loaded {len(self._entries)} cached descriptions from {self.path}")

    def get(self, label: str, num_phases: int) -> Optional[AtomicDescriptions]:
        """Get a cached record by key."""
        entry = self._entries.get((label, num_phases))
        return entry.record if entry else None

    def put(self, label: str, record: AtomicDescriptions) -> None:
        """Insert or replace a record."""
        self._entries[(label, record.num_phases)] = DescriptionCacheEntry(
            label=label, num_phases=record.num_phases, record=record)

    def missing(self, labels: List[str], num_phases: int) -> List[str]:
        """Labels that still need a request, in input order."""
        return [label for label in labels if (label, num_phases) not in self._entries]

    def all(self) -> List[DescriptionCacheEntry]:
        """All entries sorted by key."""
        return [self._entries[key] for key in sorted(self._entries)]

    def save(self) -> Path:
        """Write the cache deterministically via a temporary file and rename."""
        payload = [entry.model_dump(mode="json") for entry in self.all()]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        staging = self.path.with_name(self.path.name + ".tmp")
        staging.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        staging.replace(self.path)
        logger.info(f"Saved {len(payload)} cached descriptions to {self.path}")
        return self.path
