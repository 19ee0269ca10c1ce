"""Unit tests for settings and run configuration."""
import pytest
from pydantic import ValidationError

from src.config.config import Settings
from src.models.matching import Metric
from src.models.run_config import DATASET_ALPHA, RunConfig, load_config_file, resolve_run_config
from src.utils.errors import ConfigError


class TestRunConfig:
    """Test cases for RunConfig."""

    def test_defaults(self):
        config = RunConfig()
        assert (config.way, config.shot, config.episodes) == (5, 1, 10000)
        assert config.alpha == 1.0
        assert config.overlap == 1
        assert config.metric == Metric.AB_MHM

    @pytest.mark.parametrize("dataset, alpha", sorted(DATASET_ALPHA.items()))
    def test_dataset_alpha_defaults(self, dataset, alpha):
        assert RunConfig(dataset=dataset).alpha == alpha

    def test_dataset_tag_is_case_insensitive(self):
        assert RunConfig(dataset="HMDB51").alpha == 0.025

    def test_explicit_alpha_beats_dataset(self):
        assert RunConfig(dataset="ucf101", alpha=0.3).alpha == 0.3

    def test_alpha_out_of_range(self):
        with pytest.raises(ValidationError, match=r"alpha must be in \[0,1\]"):
            RunConfig(alpha=1.5)

    def test_unknown_dataset(self):
        with pytest.raises(ValidationError, match="unknown dataset tag"):
            RunConfig(dataset="imagenet")

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig(wayy=5)

    def test_match_config(self):
        match = RunConfig(alpha=0.2, temperature_vt=0.5, metric="bi_mhm").match_config()
        assert match.alpha == 0.2
        assert match.temperature_vt == 0.5
        assert match.metric == Metric.BI_MHM

    def test_snapshot_is_json_ready(self, tmp_path):
        snapshot = RunConfig(store=tmp_path / "store.json", dataset="kinetics").snapshot()
        assert snapshot["store"] == str(tmp_path / "store.json")
        assert snapshot["alpha"] == 0.0625
        assert snapshot["metric"] == "ab_mhm"


class TestConfigFiles:
    """Test cases for load_config_file and resolve_run_config."""

    def test_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('way = 3\nshot = 2\ndataset = "ssv2"\n', encoding="utf-8")
        assert load_config_file(path) == {"way": 3, "shot": 2, "dataset": "ssv2"}

    def test_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"episodes": 50}', encoding="utf-8")
        assert load_config_file(path) == {"episodes": 50}

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("way: 3", encoding="utf-8")
        with pytest.raises(ConfigError, match=".toml or .json"):
            load_config_file(path)

    def test_unparsable(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("way = = 3", encoding="utf-8")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config_file(path)

    def test_json_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="table"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "absent.toml")

    def test_precedence(self):
        # Given: Defaults, a file value and a flag value for different keys
        file_values = {"way": 3, "shot": 2, "dataset": "hmdb51"}
        overrides = {"shot": 4, "episodes": None}

        # When: Resolving
        config = resolve_run_config(file_values, overrides)

        # Then: Flags beat the file, the file beats defaults, None flags are ignored
        assert config.way == 3
        assert config.shot == 4
        assert config.episodes == 10000
        assert config.alpha == 0.025


class TestSettings:
    """Test cases for environment settings."""

    def test_reads_environment(self):
        settings = Settings()
        assert settings.LGA_LLM_ENDPOINT == "http://llm.test/v1"
        assert settings.LGA_LLM_RETRIES == 2
        assert settings.LGA_THREADS == 1

    def test_trailing_slash_stripped(self, monkeypatch):
        monkeypatch.setenv("LGA_LLM_ENDPOINT", "https://example.org/v1/")
        assert Settings().LGA_LLM_ENDPOINT == "https://example.org/v1"

    def test_endpoint_must_be_http(self, monkeypatch):
        monkeypatch.setenv("LGA_LLM_ENDPOINT", "ftp://example.org")
        with pytest.raises(ValidationError, match="http"):
            Settings()

    def test_threads_must_be_positive(self, monkeypatch):
        monkeypatch.setenv("LGA_THREADS", "0")
        with pytest.raises(ValidationError, match="LGA_THREADS"):
            Settings()

    def test_negative_backoff_rejected(self, monkeypatch):
        monkeypatch.setenv("LGA_LLM_BACKOFF", "-1")
        with pytest.raises(ValidationError):
            Settings()
