"""Tests for settings module."""

from __future__ import annotations

import pytest
from pydantic import ValidationError

from grappa.settings import Settings, get_settings, reload_settings


class TestSettings:
    """Test the Settings class."""

    def test_default_settings(self):
        """Defaults keep runs deterministic and checks on."""
        settings = Settings()

        assert settings.log_level == "INFO"
        assert settings.num_threads == 1
        assert settings.strict_config_hash is False
        assert settings.check_invariants is True

    def test_environment_variable_override(self, monkeypatch):
        """GRAPPA_* variables override defaults."""
        monkeypatch.setenv("GRAPPA_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("GRAPPA_NUM_THREADS", "4")
        monkeypatch.setenv("GRAPPA_STRICT_CONFIG_HASH", "true")

        settings = Settings()

        assert settings.log_level == "DEBUG"
        assert settings.num_threads == 4
        assert settings.strict_config_hash is True

    def test_case_insensitive_env(self, monkeypatch):
        monkeypatch.setenv("grappa_check_invariants", "false")

        assert Settings().check_invariants is False

    @pytest.mark.parametrize("level", ["VERBOSE", "info", ""])
    def test_invalid_log_level(self, level):
        with pytest.raises(ValidationError):
            Settings(log_level=level)

    @pytest.mark.parametrize("threads", [0, -1, 257])
    def test_thread_bounds(self, threads):
        with pytest.raises(ValidationError):
            Settings(num_threads=threads)

    def test_validate_assignment(self):
        settings = Settings()
        with pytest.raises(ValidationError):
            settings.num_threads = 0


class TestSettingsSingleton:
    """Test get_settings / reload_settings."""

    def test_get_settings_is_cached(self):
        assert get_settings() is get_settings()

    def test_reload_picks_up_environment(self, monkeypatch):
        first = get_settings()
        monkeypatch.setenv("GRAPPA_NUM_THREADS", "2")

        reloaded = reload_settings()

        assert reloaded is not first
        assert reloaded.num_threads == 2
        assert get_settings() is reloaded
