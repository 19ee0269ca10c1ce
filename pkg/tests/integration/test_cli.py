"""Integration tests for the command-line interface."""
import csv
import io
import json
from unittest.mock import AsyncMock

import numpy as np
import pytest

from src.agents.descriptions_agent import build_prompt
from src.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, SWEEP_COLUMNS, main
from src.models.text_anatomy import AtomicDescriptions
from src.repositories.description_cache_repo import DescriptionCacheRepository
from src.repositories.feature_store_repo import load_store, save_store
from src.repositories.weights_repo import load_weights
from src.utils.llm_client import LLMReply
from tests.utils.test_data import example_reply_text


@pytest.fixture
def separable_dir(tmp_path, separable_store):
    return save_store(separable_store, tmp_path / "separable")


def tree_bytes(directory):
    return {str(p.relative_to(directory)): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


class TestEval:
    """Test cases for the eval command."""

    def test_separable_store(self, separable_dir, capsys):
        # When: Evaluating a well separated store
        code = main(["eval", "--store", str(separable_dir), "--episodes", "300", "--seed", "1"])

        # Then: Accuracy is near perfect
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["accuracy"] >= 0.99
        assert report["episodes"] == 300
        assert report["config"]["way"] == 5

    def test_out_file_and_config_file(self, store_dir, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text(f'store = "{store_dir.as_posix()}"\nway = 3\nepisodes = 7\n', encoding="utf-8")
        out = tmp_path / "report.json"

        code = main(["eval", "--config", str(config), "--episodes", "5", "--out", str(out)])

        assert code == EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["episodes"] == 5
        assert report["config"]["way"] == 3

    def test_missing_store(self, capsys):
        assert main(["eval", "--episodes", "5"]) == EXIT_CONFIG
        assert "--store" in capsys.readouterr().err

    def test_alpha_out_of_range(self, store_dir, capsys):
        code = main(["eval", "--store", str(store_dir), "--alpha", "1.5"])
        assert code == EXIT_CONFIG
        assert "alpha must be in [0,1]" in capsys.readouterr().err

    def test_too_many_classes_is_config_error(self, store_dir, capsys):
        code = main(["eval", "--store", str(store_dir), "--episodes", "2"])
        assert code == EXIT_CONFIG
        assert "short by 2" in capsys.readouterr().err

    def test_missing_blob_is_data_error(self, store_dir, capsys):
        blob = json.loads(store_dir.read_text(encoding="utf-8"))["videos"][0]["blob"]
        (store_dir.parent / blob).unlink()

        code = main(["eval", "--store", str(store_dir), "--n", "3"])

        assert code == EXIT_DATA
        assert "blob not found" in capsys.readouterr().err

    def test_invalid_environment_is_config_error(self, store_dir, monkeypatch, capsys):
        # Given: A thread count the settings reject
        monkeypatch.setenv("LGA_THREADS", "0")

        # When/Then: Commands that read settings fail cleanly, the rest still run
        assert main(["eval", "--store", str(store_dir), "--n", "3", "--episodes", "2"]) == EXIT_CONFIG
        assert "LGA_THREADS" in capsys.readouterr().err
        assert main(["prompt", "--label", "archery"]) == EXIT_OK

    def test_unwritable_out_is_runtime_error(self, store_dir, tmp_path, capsys):
        # Given: An output path below a regular file
        blocker = tmp_path / "blocker"
        blocker.write_text("", encoding="utf-8")

        # When: Writing the report there
        code = main(["eval", "--store", str(store_dir), "--n", "3", "--episodes", "2",
                     "--out", str(blocker / "report.json")])

        # Then: The failure is reported with the runtime exit code
        assert code == EXIT_RUNTIME
        assert "error:" in capsys.readouterr().err

    def test_help_exits_ok(self):
        assert main(["--help"]) == EXIT_OK


class TestSweep:
    """Test cases for the sweep command."""

    def test_csv_columns_and_rows(self, store_dir, capsys):
        code = main(["sweep", "--store", str(store_dir), "--n", "3", "--episodes", "10",
                     "--axis", "metric", "--values", "ab_mhm,bi_mhm"])

        assert code == EXIT_OK
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert rows[0] == SWEEP_COLUMNS
        assert [row[:2] for row in rows[1:]] == [["metric", "ab_mhm"], ["metric", "bi_mhm"]]
        assert all(row[4] == "10" and row[5] == "0" for row in rows[1:])

    def test_empty_values(self, store_dir, capsys):
        code = main(["sweep", "--store", str(store_dir), "--axis", "alpha", "--values", ""])
        assert code == EXIT_CONFIG
        assert "must not be empty" in capsys.readouterr().err

    def test_bad_value(self, store_dir):
        assert main(["sweep", "--store", str(store_dir), "--axis", "L", "--values", "two"]) == EXIT_CONFIG

    def test_way_and_shot_axes(self, store_dir, capsys):
        # Given: A store with three classes of four videos
        # When: Sweeping the number of classes, then the number of shots
        assert main(["sweep", "--store", str(store_dir), "--episodes", "4",
                     "--axis", "way", "--values", "2,3"]) == EXIT_OK
        way_rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1:]
        assert main(["sweep", "--store", str(store_dir), "--n", "3", "--episodes", "4",
                     "--axis", "shot", "--values", "1,3"]) == EXIT_OK
        shot_rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1:]

        # Then: One row per value
        assert [row[:2] for row in way_rows] == [["way", "2"], ["way", "3"]]
        assert [row[:2] for row in shot_rows] == [["shot", "1"], ["shot", "3"]]

    def test_text_source_axis(self, store_dir, capsys):
        code = main(["sweep", "--store", str(store_dir), "--n", "3", "--episodes", "4",
                     "--axis", "text_source", "--values", "atomic,label"])

        assert code == EXIT_OK
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1:]
        assert [row[:2] for row in rows] == [["text_source", "atomic"], ["text_source", "label"]]

    def test_unknown_text_source(self, store_dir):
        assert main(["sweep", "--store", str(store_dir), "--n", "3",
                     "--axis", "text_source", "--values", "caption"]) == EXIT_CONFIG


class TestPrompt:
    """Test cases for the prompt command."""

    def test_prints_exact_prompt(self, capsys):
        assert main(["prompt", "--label", "jumping into pool"]) == EXIT_OK
        assert capsys.readouterr().out == build_prompt("jumping into pool", 3)

    def test_phase_count(self, capsys):
        main(["prompt", "--label", "archery", "--L", "4"])
        assert capsys.readouterr().out == build_prompt("archery", 4)


class TestFetchAndEmbed:
    """Test cases for the fetch and embed commands."""

    def test_fetch_without_key(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LGA_LLM_API_KEY", "")
        labels = tmp_path / "labels.txt"
        labels.write_text("archery\n", encoding="utf-8")

        code = main(["fetch", "--labels", str(labels), "--cache", str(tmp_path / "cache.json")])

        assert code == EXIT_CONFIG
        assert "LGA_LLM_API_KEY" in capsys.readouterr().err

    def test_fetch_fills_cache(self, tmp_path, mocker):
        # Given: A mocked LLM and a labels file with a duplicate and a comment
        client = AsyncMock()
        client.create_message = AsyncMock(return_value=LLMReply(text=example_reply_text(), retries=0))
        mocker.patch("src.cli.LLMClientFactory.create_client", return_value=client)
        labels = tmp_path / "labels.txt"
        labels.write_text("# classes\narchery\nbowling\narchery\n", encoding="utf-8")
        cache = tmp_path / "cache.json"

        # When: Fetching twice
        assert main(["fetch", "--labels", str(labels), "--cache", str(cache)]) == EXIT_OK
        assert main(["fetch", "--labels", str(labels), "--cache", str(cache)]) == EXIT_OK

        # Then: Each label was requested once and cached
        assert client.create_message.await_count == 2
        repo = DescriptionCacheRepository(cache)
        assert repo.missing(["archery", "bowling"], 3) == []

    def test_fetch_keeps_successes_when_a_label_fails(self, tmp_path, mocker, capsys):
        # Given: A mocked LLM that cannot answer for one label
        async def reply(prompt):
            if "Input: bowling." in prompt:
                return LLMReply(text="no idea", retries=0)
            return LLMReply(text=example_reply_text(), retries=0)
        client = AsyncMock()
        client.create_message = AsyncMock(side_effect=reply)
        mocker.patch("src.cli.LLMClientFactory.create_client", return_value=client)
        labels = tmp_path / "labels.txt"
        labels.write_text("archery\nbowling\ncurling\n", encoding="utf-8")
        cache = tmp_path / "cache.json"

        # When: Fetching the batch
        code = main(["fetch", "--labels", str(labels), "--cache", str(cache)])

        # Then: The run fails but the labels that succeeded are cached
        assert code == EXIT_RUNTIME
        assert "no JSON object" in capsys.readouterr().err
        assert DescriptionCacheRepository(cache).missing(["archery", "bowling", "curling"], 3) == ["bowling"]

    def test_embed_attaches_text(self, tmp_path, store_dir, small_store, mocker):
        # Given: Cached descriptions for every class and a mocked embedding endpoint
        repo = DescriptionCacheRepository(tmp_path / "cache.json")
        for label in small_store.classes.values():
            repo.put(label, AtomicDescriptions(label=label, descriptions=["start", "middle", "end"]))
        repo.save()
        client = AsyncMock()
        client.create_embeddings = AsyncMock(return_value=np.ones((3, small_store.dim)))
        mocker.patch("src.cli.LLMClientFactory.create_client", return_value=client)

        # When: Embedding into a new store
        code = main(["embed", "--store", str(store_dir), "--cache", str(tmp_path / "cache.json"),
                     "--out", str(tmp_path / "embedded")])

        # Then: Every class has text rows from the endpoint
        assert code == EXIT_OK
        store = load_store(tmp_path / "embedded" / "store.json")
        assert store.text_phases == 3
        np.testing.assert_array_equal(store.text[0].phase_embeddings, np.ones((3, small_store.dim)))
        assert store.descriptions[2].descriptions == ["start", "middle", "end"]

    def test_embed_requires_cached_labels(self, tmp_path, store_dir, capsys):
        code = main(["embed", "--store", str(store_dir), "--cache", str(tmp_path / "cache.json"),
                     "--out", str(tmp_path / "embedded")])
        assert code == EXIT_CONFIG
        assert "run fetch first" in capsys.readouterr().err


class TestStoreCommands:
    """Test cases for synth, inspect and weights."""

    def test_synth_is_byte_stable(self, tmp_path, capsys):
        args = ["--classes", "3", "--videos-per-class", "2", "--frames", "6", "--dim", "8", "--seed", "5"]

        assert main(["synth", "--out", str(tmp_path / "a"), *args]) == EXIT_OK
        assert main(["synth", "--out", str(tmp_path / "b"), *args]) == EXIT_OK

        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
        assert capsys.readouterr().out.splitlines()[0].endswith("store.json")

    def test_synth_shuffle(self, tmp_path):
        main(["synth", "--out", str(tmp_path / "s"), "--classes", "3", "--dim", "8", "--shuffle-seed", "1"])
        store = load_store(tmp_path / "s" / "store.json")
        assert store.phase_starts == {}

    def test_synth_invalid(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "s"), "--dim", "2"]) == EXIT_CONFIG

    def test_inspect(self, store_dir, capsys):
        assert main(["inspect", "--store", str(store_dir)]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["videos"] == 12
        assert summary["videos_per_class"] == {"0": 4, "1": 4, "2": 4}

    def test_weights(self, tmp_path):
        out = tmp_path / "w.lgaw"
        assert main(["weights", "--out", str(out), "--dim", "16", "--heads", "4", "--seed", "2"]) == EXIT_OK
        weights = load_weights(out)
        assert (weights.dim, weights.heads, weights.hidden) == (16, 4, 64)

    def test_eval_with_weights_file(self, tmp_path, store_dir, capsys):
        out = tmp_path / "w.lgaw"
        main(["weights", "--out", str(out), "--dim", "12", "--heads", "3", "--identity"])
        capsys.readouterr()

        code = main(["eval", "--store", str(store_dir), "--weights", str(out), "--n", "3", "--episodes", "5"])

        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["config"]["weights"] == str(out)

    def test_weights_dimension_mismatch(self, tmp_path, store_dir):
        out = tmp_path / "w.lgaw"
        main(["weights", "--out", str(out), "--dim", "8", "--heads", "2"])
        assert main(["eval", "--store", str(store_dir), "--weights", str(out), "--n", "3"]) == EXIT_CONFIG
