from __future__ import annotations

from pathlib import Path

from sdde_analytic.settings import Settings


def test_settings_home_and_runs_dir_env(monkeypatch) -> None:
    monkeypatch.setenv("SDDE_HOME", "/tmp/sdde")
    settings = Settings.from_env()
    assert settings.home == Path("/tmp/sdde")
    assert settings.runs_dir == Path("/tmp/sdde/runs")


def test_settings_out_dir_overrides_runs_dir(monkeypatch) -> None:
    monkeypatch.setenv("SDDE_OUT_DIR", "/tmp/elsewhere")
    settings = Settings.from_env()
    assert settings.runs_dir == Path("/tmp/elsewhere")


def test_settings_log_level_and_plain_env(monkeypatch) -> None:
    monkeypatch.setenv("SDDE_LOG_LEVEL", "debug")
    monkeypatch.setenv("SDDE_PLAIN", "yes")
    settings = Settings.from_env()
    assert settings.log_level == "DEBUG"
    assert settings.plain is True


def test_settings_workers_env(monkeypatch) -> None:
    monkeypatch.setenv("SDDE_WORKERS", "4")
    assert Settings.from_env().workers == 4
    monkeypatch.setenv("SDDE_WORKERS", "0")
    assert Settings.from_env().workers == 1
    monkeypatch.setenv("SDDE_WORKERS", "lots")
    assert Settings.from_env().workers >= 1
