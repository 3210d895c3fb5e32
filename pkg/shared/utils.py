"""
Shared utilities for the pause intensity toolkit.

This module contains the cross-cutting helpers used by the library, the
command-line application and the reproduction script: logging setup, flat JSON
configuration, file hashing for run manifests, CSV writing and timing.
"""

import csv
import hashlib
import json
import logging
import math
import platform
import sys
import time
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Optional, Union

LOGGER_NAME = "pause-intensity"


class ConfigError(ValueError):
    """Invalid logging level or configuration document."""


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    format_string: Optional[str] = None,
) -> logging.Logger:
    """
    Set up logging configuration for applications.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional file path to write logs to
        format_string: Custom format string for log messages

    Returns:
        logging.Logger: Configured logger instance

    Raises:
        ConfigError: If the level name is unknown
    """
    if format_string is None:
        format_string = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ConfigError(f"Unknown logging level: {level}")

    logging.basicConfig(
        level=numeric_level,
        format=format_string,
        handlers=[
            logging.StreamHandler(),
            *([] if log_file is None else [logging.FileHandler(log_file)]),
        ],
        force=True,
    )

    return logging.getLogger(LOGGER_NAME)


def load_json_config(config_path: Union[str, Path]) -> dict[str, Any]:
    """
    Load configuration from a JSON file.

    Args:
        config_path: Path to the JSON configuration file

    Returns:
        dict[str, Any]: Configuration dictionary

    Raises:
        FileNotFoundError: If the config file doesn't exist
        json.JSONDecodeError: If the JSON is invalid
        ConfigError: If the document is not a JSON object
    """
    config_path = Path(config_path)

    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, encoding="utf-8") as f:
        config = json.load(f)

    if not isinstance(config, dict):
        raise ConfigError(f"Configuration file must hold a JSON object: {config_path}")
    return config


def save_json_config(config: dict[str, Any], config_path: Union[str, Path]) -> None:
    """
    Save a dictionary to a JSON file, creating parent directories.

    Args:
        config: Dictionary to save
        config_path: Path where to save the JSON file
    """
    config_path = Path(config_path)
    config_path.parent.mkdir(parents=True, exist_ok=True)

    with open(config_path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, ensure_ascii=False)
        f.write("\n")


def get_file_hash(file_path: Union[str, Path], algorithm: str = "sha256") -> str:
    """
    Calculate hash of a file.

    Args:
        file_path: Path to the file
        algorithm: Hash algorithm to use (md5, sha1, sha256, etc.)

    Returns:
        str: Hexadecimal hash digest

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If the algorithm is not supported
    """
    file_path = Path(file_path)

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    try:
        hash_obj = hashlib.new(algorithm)
    except ValueError:
        raise ValueError(f"Unsupported hash algorithm: {algorithm}")

    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            hash_obj.update(chunk)

    return hash_obj.hexdigest()


def ensure_directory(directory_path: Union[str, Path]) -> Path:
    """
    Ensure a directory exists, creating it and parent directories if necessary.

    Args:
        directory_path: Path to the directory

    Returns:
        Path: The directory path as a Path object
    """
    directory_path = Path(directory_path)
    directory_path.mkdir(parents=True, exist_ok=True)
    return directory_path


def get_environment_info() -> dict[str, Any]:
    """
    Get the interpreter and numerical-library versions a run depends on.

    Only stable facts are reported so that manifests of identical runs compare equal.

    Returns:
        dict[str, Any]: Environment information
    """
    import numpy
    import scipy

    return {
        "python_version": platform.python_version(),
        "platform": sys.platform,
        "numpy_version": numpy.__version__,
        "scipy_version": scipy.__version__,
    }


def format_number(value: Optional[float], digits: int = 12) -> str:
    """
    Format a number for CSV output independently of the locale.

    ``None`` becomes an empty cell; infinities and NaN use their lowercase names.
    """
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{digits}g")


def write_csv(
    path: Union[str, Path],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    """
    Write a header row and data rows to a CSV file with ``\\n`` line endings.

    Floats are passed through :func:`format_number`; everything else through ``str``.

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    format_number(cell) if cell is None or isinstance(cell, float) else str(cell)
                    for cell in row
                ]
            )
    return path


class Timer:
    """
    A simple context manager for timing code execution.

    Usage:
        with Timer() as t:
            # some code
            pass
        print(f"Execution took {t.elapsed_time:.2f} seconds")
    """

    def __init__(self) -> None:
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None

    def __enter__(self) -> "Timer":
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.end_time = time.perf_counter()

    @property
    def elapsed_time(self) -> float:
        """Get the elapsed time in seconds."""
        if self.start_time is None:
            return 0.0

        end_time = self.end_time or time.perf_counter()
        return end_time - self.start_time


class ConfigManager:
    """
    Resolves flat configuration values with flag > file > default precedence.

    Usage:
        config = ConfigManager.from_file("run.json", known_keys={"rtt", "seed"})
        rtt = config.resolve("rtt", flag_value=None, default=0.128)
    """

    def __init__(
        self,
        values: Optional[dict[str, Any]] = None,
        known_keys: Optional[Iterable[str]] = None,
    ) -> None:
        self._config: dict[str, Any] = dict(values or {})
        if known_keys is not None:
            unknown = sorted(set(self._config) - set(known_keys))
            if unknown:
                raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")

    @classmethod
    def from_file(
        cls,
        config_file: Optional[Union[str, Path]],
        known_keys: Optional[Iterable[str]] = None,
    ) -> "ConfigManager":
        """
        Load a flat JSON document; ``None`` yields an empty configuration.

        Raises:
            FileNotFoundError: If the file doesn't exist
            ConfigError: If the JSON is invalid, not an object, or has unknown keys
        """
        if config_file is None:
            return cls({}, known_keys)
        try:
            values = load_json_config(config_file)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Invalid JSON in configuration file {config_file}: {exc}")
        return cls(values, known_keys)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value or ``default``."""
        return self._config.get(key, default)

    def resolve(self, key: str, flag_value: Any, default: Any) -> Any:
        """
        Return the flag value if given, else the file value, else ``default``.

        Raises:
            ConfigError: If a file value doesn't match the type of a numeric or text default
        """
        if flag_value is not None:
            return flag_value
        if key not in self._config:
            return default
        value = self._config[key]
        numeric = isinstance(default, (int, float)) and not isinstance(default, bool)
        if numeric and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"Configuration value for {key!r} must be a number, got {value!r}")
        if isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"Configuration value for {key!r} must be a string, got {value!r}")
        return value

    def to_dict(self) -> dict[str, Any]:
        """Get the configuration as a dictionary."""
        return self._config.copy()
