"""
Tests for shared utilities module.

This module contains unit tests for the helpers shared by the library, the
command-line application and the reproduction script.
"""

import json
import logging
import math
import tempfile
from pathlib import Path

import pytest

from shared.utils import (
    LOGGER_NAME,
    ConfigError,
    ConfigManager,
    Timer,
    ensure_directory,
    format_number,
    get_environment_info,
    get_file_hash,
    load_json_config,
    save_json_config,
    setup_logging,
    write_csv,
)


class TestUtils:
    """Test cases for utility functions."""

    def test_load_save_json_config(self):
        """Test JSON configuration loading and saving."""
        test_config = {"playout_rate": 100000.0, "rtt": 0.128, "seed": 3}

        with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
            config_path = Path(f.name)

        try:
            save_json_config(test_config, config_path)
            assert config_path.exists()
            assert config_path.read_text(encoding="utf-8").endswith("}\n")

            loaded_config = load_json_config(config_path)
            assert loaded_config == test_config

        finally:
            config_path.unlink()

    def test_load_json_config_file_not_found(self):
        """Test that load_json_config raises FileNotFoundError for missing files."""
        with pytest.raises(FileNotFoundError, match="nonexistent_file.json"):
            load_json_config("nonexistent_file.json")

    def test_load_json_config_rejects_non_object(self, tmp_path):
        """A JSON array is not a configuration document."""
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]", encoding="utf-8")
        with pytest.raises(ValueError):
            load_json_config(path)

    def test_get_file_hash(self):
        """Test file hash calculation."""
        with tempfile.NamedTemporaryFile(mode="w", delete=False) as f:
            f.write("Hello, World!")
            temp_path = Path(f.name)

        try:
            hash_sha256 = get_file_hash(temp_path, "sha256")
            assert len(hash_sha256) == 64
            assert hash_sha256 == "dffd6021bb2bd5b0af676290809ec3a53191dd81c7f70a4b28688a362182986f"

            hash_md5 = get_file_hash(temp_path, "md5")
            assert len(hash_md5) == 32

        finally:
            temp_path.unlink()

    def test_get_file_hash_file_not_found(self):
        """Test that get_file_hash raises FileNotFoundError for missing files."""
        with pytest.raises(FileNotFoundError):
            get_file_hash("nonexistent_file.txt")

    def test_get_file_hash_invalid_algorithm(self):
        """Test that get_file_hash raises ValueError for invalid algorithms."""
        with tempfile.NamedTemporaryFile() as f:
            with pytest.raises(ValueError):
                get_file_hash(f.name, "invalid_algorithm")

    def test_ensure_directory(self):
        """Test directory creation."""
        with tempfile.TemporaryDirectory() as temp_dir:
            test_dir = Path(temp_dir) / "nested" / "directory" / "structure"

            assert not test_dir.exists()

            result = ensure_directory(test_dir)

            assert test_dir.exists()
            assert test_dir.is_dir()
            assert result == test_dir

    def test_environment_info_is_stable(self):
        """Environment info holds only facts that do not change between runs."""
        first = get_environment_info()
        assert first == get_environment_info()
        assert set(first) == {"python_version", "platform", "numpy_version", "scipy_version"}

    def test_setup_logging_returns_named_logger(self):
        """setup_logging configures the root level and returns the project logger."""
        logger = setup_logging("debug")
        assert logger.name == LOGGER_NAME
        assert logging.getLogger().level == logging.DEBUG
        setup_logging("WARNING")

    def test_setup_logging_unknown_level(self):
        """Unknown level names are rejected."""
        with pytest.raises(ValueError, match="Unknown logging level"):
            setup_logging("chatty")


class TestCsvOutput:
    """Test cases for locale-independent CSV output."""

    def test_format_number(self):
        """Floats use a dot separator; None, infinities and ints have fixed spellings."""
        assert format_number(None) == ""
        assert format_number(0.005) == "0.005"
        assert format_number(math.inf) == "inf"
        assert format_number(-math.inf) == "-inf"
        assert format_number(float("nan")) == "nan"
        assert format_number(24) == "24"
        assert format_number(1.0 / 3.0) == "0.333333333333"

    def test_write_csv(self, tmp_path):
        """Rows follow the header with newline endings and formatted floats."""
        path = write_csv(tmp_path / "sub" / "out.csv", ("loss", "pi", "region"), [(0.01, None, "B")])
        assert path.read_bytes() == b"loss,pi,region\n0.01,,B\n"


class TestTimer:
    """Test cases for Timer context manager."""

    def test_timer_basic_functionality(self):
        """Test basic timer functionality."""
        with Timer() as timer:
            pass

        assert timer.elapsed_time >= 0
        assert timer.start_time is not None
        assert timer.end_time is not None

    def test_timer_elapsed_time_increases(self):
        """Test that elapsed time increases during execution."""
        import time

        with Timer() as timer:
            time.sleep(0.01)

        assert timer.elapsed_time >= 0.01


class TestConfigManager:
    """Test cases for ConfigManager class."""

    def test_resolve_precedence(self):
        """Flags beat file values, which beat defaults."""
        config = ConfigManager({"rtt": 0.2, "seed": 5})
        assert config.resolve("rtt", 0.3, 0.128) == 0.3
        assert config.resolve("rtt", None, 0.128) == 0.2
        assert config.resolve("timeout", None, 0.128) == 0.128
        assert config.get("seed") == 5
        assert config.get("nonexistent", "default") == "default"

    def test_from_file(self, tmp_path):
        """Values are read from a flat JSON document."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"playout_rate": 50000}), encoding="utf-8")
        config = ConfigManager.from_file(path, known_keys={"playout_rate"})
        assert config.to_dict() == {"playout_rate": 50000}

    def test_from_file_none(self):
        """No file means an empty configuration."""
        assert ConfigManager.from_file(None).to_dict() == {}

    def test_unknown_keys_rejected(self):
        """Keys outside the known set raise ValueError naming them."""
        with pytest.raises(ValueError, match="rrt"):
            ConfigManager({"rrt": 0.1}, known_keys={"rtt"})

    def test_invalid_json(self, tmp_path):
        """Malformed JSON surfaces as ValueError."""
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="Invalid JSON"):
            ConfigManager.from_file(path)

    def test_config_errors_are_value_errors(self, tmp_path):
        """Configuration problems raise ConfigError, a ValueError subclass."""
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            ConfigManager.from_file(path)
        assert issubclass(ConfigError, ValueError)

    @pytest.mark.parametrize("value", ["fast", True, None, [0.1]])
    def test_numeric_value_type_checked(self, value):
        """A file value must match a numeric default."""
        config = ConfigManager({"rtt": value})
        with pytest.raises(ConfigError, match="rtt"):
            config.resolve("rtt", None, 0.128)

    def test_text_value_type_checked(self):
        config = ConfigManager({"method": 3})
        with pytest.raises(ConfigError, match="method"):
            config.resolve("method", None, "pearson")
        assert ConfigManager({"seed": 4}).resolve("seed", None, 0) == 4
        assert ConfigManager({"out_dir": "x"}).resolve("out_dir", None, None) == "x"

    def test_missing_file(self, tmp_path):
        """A missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            ConfigManager.from_file(tmp_path / "absent.json")

    def test_to_dict_is_a_copy(self):
        """Mutating the exported dictionary leaves the manager unchanged."""
        config = ConfigManager({"seed": 1})
        exported = config.to_dict()
        exported["seed"] = 2
        assert config.get("seed") == 1


if __name__ == "__main__":
    pytest.main([__file__])
