"""Resolved run configuration shared by the CLI and the HTTP surface."""
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.matching import KShotReduction, MatchConfig, Metric
from src.models.text_anatomy import TextSource
from src.utils.errors import ConfigError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

DATASET_ALPHA: Dict[str, float] = {
    "hmdb51": 0.0250,
    "kinetics": 0.0625,
    "ucf101": 0.1125,
    "ssv2": 0.2,
    "ssv2_small": 0.2,
    "ssv2_full": 0.2,
}


class RunConfig(BaseModel):
    """Every knob of an evaluation run.

    Alpha resolves as: explicit value, else the dataset tag's default, else 1.0.
    """
    store: Optional[Path] = Field(default=None, description="Store manifest path")
    weights: Optional[Path] = Field(default=None, description="Fusion weights file; identity weights when unset")
    dataset: Optional[str] = Field(default=None, description="Dataset tag selecting the alpha default")
    way: int = Field(default=5, ge=1, description="N")
    shot: int = Field(default=1, ge=1, description="K")
    episodes: int = Field(default=10000, ge=1)
    seed: int = Field(default=0, ge=0)
    queries_per_class: Optional[int] = Field(default=None, ge=1)
    seg_method: Literal["cluster", "hard"] = "cluster"
    num_phases: int = Field(default=3, ge=1, description="L")
    overlap: int = Field(default=1, ge=0)
    alpha: Optional[float] = None
    temperature_vt: float = Field(default=1.0, gt=0)
    metric: Metric = Metric.AB_MHM
    kshot_reduction: KShotReduction = KShotReduction.MEAN_DISTANCE
    text_source: TextSource = Field(default=TextSource.ATOMIC, description="Atomic descriptions or the label row")
    attention_residual: bool = False
    layer_norm: bool = False
    normalize: bool = Field(default=False, description="L2-normalize features at load")
    threads: Optional[int] = Field(default=None, ge=1)
    ci_method: Literal["normal", "exact"] = "normal"
    episode_log: Optional[Path] = None

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "store": "data/synthetic/store.json",
                "dataset": "hmdb51",
                "way": 5,
                "shot": 1,
                "episodes": 1000,
                "seed": 7
            }
        }
    )

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: Optional[float]) -> Optional[float]:
        """Alpha is a weight in [0, 1]."""
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("alpha must be in [0,1]")
        return v

    @field_validator("dataset")
    @classmethod
    def validate_dataset(cls, v: Optional[str]) -> Optional[str]:
        """Dataset tags are case-insensitive."""
        if v is None:
            return None
        tag = v.lower()
        if tag not in DATASET_ALPHA:
            raise ValueError(f"unknown dataset tag {v!r}; expected one of {sorted(DATASET_ALPHA)}")
        return tag

    @model_validator(mode="after")
    def resolve_alpha(self):
        """Fill alpha from the dataset tag when not given."""
        if self.alpha is None:
            self.alpha = DATASET_ALPHA[self.dataset] if self.dataset else 1.0
        return self

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            alpha=self.alpha,
            temperature_vt=self.temperature_vt,
            metric=self.metric,
            kshot_reduction=self.kshot_reduction,
            text_source=self.text_source,
        )

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready copy echoed into reports."""
        return self.model_dump(mode="json")


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a TOML or JSON config file into a flat dict.

    Raises:
        ConfigError: If the file is missing, unparsable or not a table
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                values = tomllib.load(f)
        elif path.suffix.lower() == ".json":
            values = json.loads(path.read_text(encoding="utf-8"))
        else:
            raise ConfigError(f"config file must be .toml or .json, got {path.name}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        logger.error(f"Error parsing config file {path}: {str(e)}")
        raise ConfigError(f"cannot parse {path}: {str(e)}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path} must hold a table of settings")
    return values


def resolve_run_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Merge defaults < config file < flags; None overrides are ignored."""
    merged: Dict[str, Any] = dict(file_values or {})
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return RunConfig(**merged)
