"""Tests for settings files and logging setup."""

import logging

import pytest

from config import ConfigError, Settings, configure_logging, load_settings


def test_defaults_without_a_file():
    settings = load_settings()
    assert settings == Settings()
    assert settings.seed == 0
    assert settings.output_format == "json"


def test_file_values_are_typed(tmp_path):
    path = tmp_path / "toolkit.env"
    path.write_text("SEED=7\nENUMERATION_CAP=1000\nVERIFY_SCALE=0.25\noutput_format=csv\n")
    settings = load_settings(str(path))
    assert settings.seed == 7
    assert settings.enumeration_cap == 1000
    assert settings.verify_scale == 0.25
    assert settings.output_format == "csv"


def test_overrides_beat_the_file_and_none_is_ignored(tmp_path):
    path = tmp_path / "toolkit.env"
    path.write_text("SEED=7\n")
    settings = load_settings(str(path), seed=11, output_format=None)
    assert settings.seed == 11
    assert settings.output_format == "json"


def test_unknown_key_is_rejected(tmp_path):
    path = tmp_path / "toolkit.env"
    path.write_text("SEEED=7\n")
    with pytest.raises(ConfigError, match="Unknown setting"):
        load_settings(str(path))


@pytest.mark.parametrize("line", ["SEED=seven", "CHUNK_SIZE=0", "VERIFY_SCALE=2", "OUTPUT_FORMAT=xml", "LOG_LEVEL=LOUD"])
def test_bad_values_are_rejected(tmp_path, line):
    path = tmp_path / "toolkit.env"
    path.write_text(line + "\n")
    with pytest.raises(ConfigError):
        load_settings(str(path))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_settings("no/such/settings.env")


def test_logging_goes_to_stderr(capsys):
    configure_logging("info")
    logging.getLogger("toolkit.test").info("hello from the test")
    captured = capsys.readouterr()
    assert "hello from the test" in captured.err
    assert captured.out == ""
    configure_logging("WARNING")
